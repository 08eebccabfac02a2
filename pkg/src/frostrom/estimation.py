"""Least-squares state estimation on the reduced basis, the a-priori bound and error metrics."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .materials import MaterialModel, liquid_fraction
from .mesh import FOOD, StructuredGrid
from .observation import ObservationMatrix
from .rom import PODBasis, tail_energy


class IllConditionedError(ValueError):
    def __init__(self, condition: float):
        super().__init__(f"cross-Gramian is rank deficient (condition number {condition:.3e})")
        self.condition = condition


def _as_dense_projector(W):
    if isinstance(W, ObservationMatrix):
        return W.project, W.n_sensors
    W = np.asarray(W, dtype=float)
    return (lambda X: W.T @ X), W.shape[1]


@dataclass(frozen=True, eq=False)
class CrossGramian:
    g: np.ndarray
    u: np.ndarray
    s_hat: np.ndarray
    vt: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[1]

    @property
    def m(self) -> int:
        return self.g.shape[0]

    @property
    def s_min(self) -> float:
        return float(self.s_hat[-1])


def gramian_from_matrix(g: np.ndarray) -> CrossGramian:
    g = np.atleast_2d(np.asarray(g, dtype=float))
    u, s, vt = np.linalg.svd(g, full_matrices=False)
    return CrossGramian(g, u, s, vt)


def cross_gramian(W, basis: PODBasis | np.ndarray, n: int) -> CrossGramian:
    phi = basis.phi if isinstance(basis, PODBasis) else np.asarray(basis, dtype=float)
    project, m = _as_dense_projector(W)
    if not 1 <= n <= phi.shape[1]:
        raise ValueError(f"n={n} outside [1, {phi.shape[1]}]")
    if n > m:
        raise ValueError(f"well-posedness needs n <= m (N > m > n), got n={n} > m={m}")
    return gramian_from_matrix(project(phi[:, :n]))


def solve_normal_equations(G: CrossGramian, ell: np.ndarray, rcond: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Minimiser of ||ell - G c|| through the SVD of G; returns (c, residual norm).

    ``ell`` may hold one measurement vector per column.
    """
    ell = np.asarray(ell, dtype=float)
    if ell.shape[0] != G.m:
        raise ValueError(f"measurement has {ell.shape[0]} entries, cross-Gramian has {G.m} rows")
    s = G.s_hat
    if s[0] == 0 or s[-1] < rcond * s[0]:
        raise IllConditionedError(np.inf if s[-1] == 0 else float(s[0] / s[-1]))
    proj = G.u.T @ ell
    c = G.vt.T @ (proj / s if ell.ndim == 1 else proj / s[:, None])
    residual = np.linalg.norm(ell - G.g @ c, axis=0)
    return c, residual


@dataclass
class ReconstructionResult:
    coefficients: np.ndarray
    field: np.ndarray
    n: int
    residual: np.ndarray | float


def reconstruct(basis: PODBasis, W, n: int, ell: np.ndarray, G: CrossGramian | None = None) -> ReconstructionResult:
    """T* = Phi_n c* (plus the stored mean field when the basis has one)."""
    G = G if G is not None else cross_gramian(W, basis, n)
    ell = np.asarray(ell, dtype=float)
    if basis.mean is not None:
        project, _ = _as_dense_projector(W)
        offset = project(basis.mean)
        ell = ell - (offset if ell.ndim == 1 else offset[:, None])
    c, residual = solve_normal_equations(G, ell)
    field = basis.phi[:, :n] @ c
    if basis.mean is not None:
        field = field + (basis.mean if field.ndim == 1 else basis.mean[:, None])
    return ReconstructionResult(c, field, n, residual if np.ndim(residual) else float(residual))


@dataclass
class BoundCurve:
    n: np.ndarray
    s_hat: np.ndarray
    tail: np.ndarray
    e: np.ndarray

    def rows(self):
        return zip(self.n.tolist(), self.e.tolist())


def apriori_bound_curve(basis: PODBasis, W, n_range: Sequence[int] | None = None) -> BoundCurve:
    """e(n) = tail(n) / S_n with S_n the smallest singular value of W^T Phi_n; +inf where S_n = 0."""
    project, m = _as_dense_projector(W)
    upper = min(m, basis.n_max)
    if n_range is None:
        n_range = range(1, max(upper - 1, 1) + 1)
    n_range = np.asarray(list(n_range), dtype=int)
    if n_range.size == 0 or n_range.min() < 1 or n_range.max() > upper:
        raise ValueError(f"n_range must lie within [1, {upper}]")
    G_full = project(basis.phi[:, : int(n_range.max())])
    s_hat = np.empty(len(n_range))
    tail = np.empty(len(n_range))
    for k, n in enumerate(n_range):
        s = np.linalg.svd(G_full[:, :n], compute_uv=False)
        s_hat[k] = s[n - 1] if len(s) >= n else 0.0
        tail[k] = tail_energy(basis, int(n))
    # singular values at round-off level count as zero
    scale = max(float(np.linalg.norm(G_full, 2)), 1e-300)
    zero = s_hat <= 1e-13 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(zero, np.inf, tail / np.where(zero, 1.0, s_hat))
    return BoundCurve(n_range, s_hat, tail, e)


def select_rom_dimension(curve: BoundCurve | Sequence[float], n_values: Sequence[int] | None = None) -> int:
    """Argmin of e(n); the first (smallest) n wins ties."""
    if isinstance(curve, BoundCurve):
        e, n_values = curve.e, curve.n
    else:
        e = np.asarray(curve, dtype=float)
        n_values = np.arange(1, len(e) + 1) if n_values is None else np.asarray(n_values)
    if e.size == 0 or not np.isfinite(e).any():
        raise ValueError("bound curve has no finite value")
    return int(n_values[int(np.argmin(np.where(np.isfinite(e), e, np.inf)))])


def relative_l2_error(T_gt: np.ndarray, T_star: np.ndarray) -> float:
    """100 * ||T_gt - T*|| / ||T_gt||."""
    T_gt = np.asarray(T_gt, dtype=float)
    denom = np.linalg.norm(T_gt)
    if denom == 0:
        raise ValueError("relative error undefined for a zero ground truth")
    return float(100.0 * np.linalg.norm(T_gt - np.asarray(T_star, dtype=float)) / denom)


def relative_l2_errors(truth: np.ndarray, recon: np.ndarray) -> np.ndarray:
    """Column-wise relative errors (%) for N x K arrays."""
    denom = np.linalg.norm(truth, axis=0)
    if np.any(denom == 0):
        raise ValueError("relative error undefined for a zero ground truth")
    return 100.0 * np.linalg.norm(truth - recon, axis=0) / denom


def local_relative_error(series_gt: np.ndarray, series_star: np.ndarray) -> np.ndarray:
    """100 * |phi_P - phi*_P| / |time mean of phi_P|."""
    series_gt = np.asarray(series_gt, dtype=float)
    mean = abs(float(np.mean(series_gt)))
    if mean == 0:
        raise ValueError("local error undefined when the ground-truth series averages to zero")
    return 100.0 * np.abs(series_gt - np.asarray(series_star, dtype=float)) / mean


def accumulated_error(series: np.ndarray, times: np.ndarray | None = None) -> float:
    """Trapezoidal time integral divided by the duration."""
    series = np.asarray(series, dtype=float)
    if series.size == 1:
        return float(series[0])
    times = np.arange(series.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    duration = times[-1] - times[0]
    if duration <= 0:
        raise ValueError("times must increase")
    return float(trapezoid(series, times) / duration)


@dataclass
class DerivedQuantities:
    liquid_fraction: np.ndarray
    heat_capacity: np.ndarray
    freezing_rate: dict[str, np.ndarray]


def derived_quantities(
    T_series: np.ndarray,
    grid: StructuredGrid,
    times: np.ndarray,
    points: Mapping[str, int] | None = None,
    materials: MaterialModel | None = None,
    fraction_mode: str = "linear",
) -> DerivedQuantities:
    """Food liquid fraction and rho C fields (K x n_food) and dT/dt in C/h at the given cells.

    ``T_series`` is K x N, one row per time.
    """
    materials = materials if materials is not None else MaterialModel()
    T_series = np.atleast_2d(np.asarray(T_series, dtype=float))
    food = np.flatnonzero(grid.mask == FOOD)
    Tf = T_series[:, food]
    fpc = liquid_fraction(Tf, fraction_mode)
    cap = materials.heat_capacity(Tf)
    hours = np.asarray(times, dtype=float) / 3600.0
    rates = {}
    for name, cell in (points or {}).items():
        s = T_series[:, cell]
        rates[name] = np.gradient(s, hours) if len(s) > 1 else np.zeros_like(s)
    return DerivedQuantities(np.asarray(fpc), np.asarray(cap), rates)


@dataclass
class ErrorReport:
    times: list[float]
    l2_percent: list[float]
    time_average: float
    accumulated: float
    local: dict[str, list[float]] = field(default_factory=dict)
    local_accumulated: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **meta) -> str:
        return json.dumps({**meta, **self.to_dict()}, indent=2, sort_keys=True)


def build_error_report(
    truth: np.ndarray,
    recon: np.ndarray,
    times: np.ndarray,
    points: Mapping[str, int] | None = None,
    rows: np.ndarray | None = None,
) -> ErrorReport:
    """Errors for N x K truth/reconstruction pairs; ``rows`` restricts the norm to a subset of cells."""
    truth = np.asarray(truth, dtype=float)
    recon = np.asarray(recon, dtype=float)
    if truth.shape != recon.shape:
        raise ValueError("truth and reconstruction shapes differ")
    if rows is not None:
        err = relative_l2_errors(truth[rows], recon[rows])
    else:
        err = relative_l2_errors(truth, recon)
    times = np.asarray(times, dtype=float)
    local, local_acc = {}, {}
    for name, cell in (points or {}).items():
        series = local_relative_error(truth[cell], recon[cell])
        local[name] = series.tolist()
        local_acc[name] = accumulated_error(series, times)
    return ErrorReport(
        times=times.tolist(),
        l2_percent=err.tolist(),
        time_average=float(np.mean(err)),
        accumulated=accumulated_error(err, times),
        local=local,
        local_accumulated=local_acc,
    )
