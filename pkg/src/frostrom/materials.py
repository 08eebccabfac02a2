"""Thermophysical properties: salmon (effective heat capacity), air and glass."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .mesh import FLUID, FOOD, SHELF


@dataclass
class PiecewiseCubicProperty:
    """Cubic in T with coefficients switching on right-closed temperature intervals.

    ``breakpoints`` has one more entry than ``coefficients``; interval k is
    ``(breakpoints[k], breakpoints[k+1]]``, except the first which also includes
    its left end. Out-of-range temperatures are clamped and counted.
    """

    breakpoints: tuple[float, ...]
    coefficients: tuple[tuple[float, float, float, float], ...]
    name: str = ""
    clamp_count: int = field(default=0, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        coef = np.asarray(self.coefficients, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if coef.shape != (len(bp) - 1, 4):
            raise ValueError(f"need {len(bp) - 1} rows of 4 coefficients, got shape {coef.shape}")
        self._bp = bp
        self._coef = coef

    @property
    def t_min(self) -> float:
        return float(self._bp[0])

    @property
    def t_max(self) -> float:
        return float(self._bp[-1])

    def interval(self, T):
        return np.searchsorted(self._bp[1:-1], T, side="left")

    def _prepare(self, T):
        T = np.asarray(T, dtype=float)
        if np.isnan(T).any():
            raise ValueError(f"NaN temperature passed to property {self.name or 'evaluation'}")
        outside = (T < self._bp[0]) | (T > self._bp[-1])
        if outside.any():
            self.clamp_count += int(np.count_nonzero(outside))
            T = np.clip(T, self._bp[0], self._bp[-1])
        return T

    def __call__(self, T):
        T = self._prepare(T)
        a = self._coef[self.interval(T)]
        out = a[..., 0] + T * (a[..., 1] + T * (a[..., 2] + T * a[..., 3]))
        return out if out.ndim else float(out)

    def derivative(self, T):
        T = self._prepare(T)
        a = self._coef[self.interval(T)]
        out = a[..., 1] + T * (2.0 * a[..., 2] + 3.0 * T * a[..., 3])
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "breakpoints": [float(b) for b in self._bp],
            "coefficients": [[float(c) for c in row] for row in self._coef],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseCubicProperty":
        return cls(
            breakpoints=tuple(d["breakpoints"]),
            coefficients=tuple(tuple(r) for r in d["coefficients"]),
            name=d.get("name", ""),
        )

    @classmethod
    def from_json(cls, path) -> "PiecewiseCubicProperty":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def eval_property(prop: PiecewiseCubicProperty, T):
    return prop(T)


SALMON_BREAKPOINTS = (-25.0, -5.0, -3.5, 0.0, 25.0)

# rows per interval: (a0, a1, a2, a3)
SALMON_HEAT_CAPACITY = PiecewiseCubicProperty(
    SALMON_BREAKPOINTS,
    (
        (4.298e7, 7.166e6, 4.199e5, 8.031e3),
        (3.046e10, 1.906e10, 4.002e9, 2.817e8),
        (-4.604e6, -1.037e8, -1.095e8, -4.260e7),
        (4.365e6, -3.228e5, 2.535e4, -5.838e2),
    ),
    name="rho_c_salmon",
)

SALMON_CONDUCTIVITY = PiecewiseCubicProperty(
    SALMON_BREAKPOINTS,
    (
        (5.654e-1, -9.014e-2, -4.038e-3, -6.721e-5),
        (-3.276e-1, -5.611e-1, -9.160e-2, -5.767e-3),
        (5.202e-1, 1.181e-2, 2.707e-2, 1.081e-3),
        (5.122e-1, -3.900e-3, 3.585e-4, -7.767e-6),
    ),
    name="lambda_salmon",
)


@dataclass(frozen=True)
class AirProperties:
    rho: float = 1.292
    cp: float = 1006.0
    conductivity: float = 0.0243
    turbulent_conductivity_multiplier: float = 10.0

    def __post_init__(self):
        for name in ("rho", "cp", "conductivity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"air {name} must be strictly positive")
        if self.turbulent_conductivity_multiplier < 0:
            raise ValueError("turbulent_conductivity_multiplier must be non-negative")

    @property
    def heat_capacity(self) -> float:
        return self.rho * self.cp

    @property
    def effective_conductivity(self) -> float:
        return self.conductivity * (1.0 + self.turbulent_conductivity_multiplier)


@dataclass(frozen=True)
class ShelfProperties:
    conductivity: float = 1.0
    heat_capacity: float = 1.68e6


T_SOLIDUS = -5.0
T_LIQUIDUS = 0.0


def liquid_fraction(T, mode: str = "linear", t_solidus: float = T_SOLIDUS, t_liquidus: float = T_LIQUIDUS):
    """Unfrozen fraction in [0, 1], non-decreasing in T.

    ``linear`` ramps from 0 at ``t_solidus`` to 1 at ``t_liquidus``. ``enthalpy``
    normalises the cumulative latent excess of the salmon heat capacity over
    the straight line joining its values at the two ends of the range.
    """
    T = np.asarray(T, dtype=float)
    if not np.isfinite(T).all():
        raise ValueError("liquid_fraction needs finite temperatures")
    if mode == "linear":
        out = np.clip((T - t_solidus) / (t_liquidus - t_solidus), 0.0, 1.0)
    elif mode == "enthalpy":
        tt, ff = _enthalpy_table(t_solidus, t_liquidus)
        out = np.interp(T, tt, ff, left=0.0, right=1.0)
    else:
        raise ValueError(f"unknown liquid fraction mode {mode!r}")
    return out if out.ndim else float(out)


_ENTHALPY_CACHE: dict = {}


def _enthalpy_table(t_solidus, t_liquidus, n=4001):
    key = (t_solidus, t_liquidus)
    if key not in _ENTHALPY_CACHE:
        tt = np.linspace(t_solidus, t_liquidus, n)
        c = SALMON_HEAT_CAPACITY(tt)
        c0, c1 = SALMON_HEAT_CAPACITY(t_solidus), SALMON_HEAT_CAPACITY(t_liquidus)
        sensible = c0 + (c1 - c0) * (tt - t_solidus) / (t_liquidus - t_solidus)
        # negative excess (the cubics dip below the line near the interval ends) is dropped
        excess = np.maximum(c - sensible, 0.0)
        cum = cumulative_trapezoid(excess, tt, initial=0.0)
        _ENTHALPY_CACHE[key] = (tt, cum / cum[-1])
    return _ENTHALPY_CACHE[key]


@dataclass
class MaterialModel:
    """Per-cell property dispatch on the FLUID/FOOD/SHELF labels.

    ``capacity_floor`` keeps the food heat capacity positive in the solver:
    the printed cubics dip below zero just above -5 C and just below 0 C.
    ``uniform`` = (heat capacity, conductivity) overrides every cell, which is
    what the verification cases use.
    """

    heat_capacity: PiecewiseCubicProperty = field(default_factory=lambda: SALMON_HEAT_CAPACITY)
    conductivity: PiecewiseCubicProperty = field(default_factory=lambda: SALMON_CONDUCTIVITY)
    air: AirProperties = field(default_factory=AirProperties)
    shelf: ShelfProperties = field(default_factory=ShelfProperties)
    capacity_floor: float = 5.0e5
    uniform: tuple[float, float] | None = None
    enthalpy_resolution: float = 1e-3
    _enthalpy: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def food_enthalpy(self, T):
        """Antiderivative of the floored food heat capacity, zero at the table's lower end."""
        if self._enthalpy is None:
            prop = self.heat_capacity
            n = int(round((prop.t_max - prop.t_min) / self.enthalpy_resolution)) + 1
            tt = np.linspace(prop.t_min, prop.t_max, n)
            cc = np.maximum(prop(tt), self.capacity_floor)
            self._enthalpy = (tt, cumulative_trapezoid(cc, tt, initial=0.0))
            prop.clamp_count = 0
        tt, hh = self._enthalpy
        T = np.asarray(T, dtype=float)
        # linear continuation outside the table keeps the secant well defined
        lo, hi = tt[0], tt[-1]
        c_lo = max(float(self.heat_capacity(lo)), self.capacity_floor)
        c_hi = max(float(self.heat_capacity(hi)), self.capacity_floor)
        out = np.interp(T, tt, hh)
        out = np.where(T < lo, hh[0] + c_lo * (T - lo), out)
        return np.where(T > hi, hh[-1] + c_hi * (T - hi), out)

    def enthalpy(self, T: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Volumetric enthalpy per cell, up to a per-material constant."""
        T = np.asarray(T, dtype=float)
        if self.uniform is not None:
            return self.uniform[0] * T
        H = np.empty_like(T)
        food = mask == FOOD
        fluid = mask == FLUID
        shelf = mask == SHELF
        H[fluid] = self.air.heat_capacity * T[fluid]
        H[shelf] = self.shelf.heat_capacity * T[shelf]
        H[food] = self.food_enthalpy(T[food])
        return H

    def volumetric_heat_capacity(self, T, label: int):
        if self.uniform is not None:
            return _const_like(T, self.uniform[0])
        if label == FOOD:
            return self.heat_capacity(T)
        if label == FLUID:
            return _const_like(T, self.air.heat_capacity)
        if label == SHELF:
            return _const_like(T, self.shelf.heat_capacity)
        raise ValueError(f"unknown cell label {label}")

    def cell_conductivity(self, T, label: int):
        if self.uniform is not None:
            return _const_like(T, self.uniform[1])
        if label == FOOD:
            return self.conductivity(T)
        if label == FLUID:
            return _const_like(T, self.air.effective_conductivity)
        if label == SHELF:
            return _const_like(T, self.shelf.conductivity)
        raise ValueError(f"unknown cell label {label}")

    def fields(self, T: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Heat capacity and conductivity arrays for a full temperature field."""
        n = len(T)
        if self.uniform is not None:
            return np.full(n, float(self.uniform[0])), np.full(n, float(self.uniform[1]))
        cap = np.empty(n)
        cond = np.empty(n)
        food = mask == FOOD
        fluid = mask == FLUID
        shelf = mask == SHELF
        cap[fluid] = self.air.heat_capacity
        cond[fluid] = self.air.effective_conductivity
        cap[shelf] = self.shelf.heat_capacity
        cond[shelf] = self.shelf.conductivity
        if food.any():
            tf = T[food]
            cap[food] = np.maximum(self.heat_capacity(tf), self.capacity_floor)
            cond[food] = self.conductivity(tf)
        return cap, cond

    def to_dict(self) -> dict:
        return {
            "heat_capacity": self.heat_capacity.to_dict(),
            "conductivity": self.conductivity.to_dict(),
            "air": vars(self.air).copy(),
            "shelf": vars(self.shelf).copy(),
            "capacity_floor": self.capacity_floor,
            "uniform": list(self.uniform) if self.uniform is not None else None,
        }


def _const_like(T, value):
    if np.ndim(T):
        return np.full(np.shape(T), float(value))
    if isinstance(T, float) and math.isnan(T):
        raise ValueError("NaN temperature")
    return float(value)
