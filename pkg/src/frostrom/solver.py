"""Desk-scale conjugate forward model.

Conduction with phase change in the food and shelf, advection-diffusion in the
air over a prescribed divergence-free velocity field. Cell-centred finite
volumes, WENO3 + Lax-Friedrichs advective faces, BDF2-opt in time and Picard
iteration on the temperature-dependent properties.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .materials import MaterialModel
from .mesh import FLUID, StructuredGrid

log = logging.getLogger(__name__)

PARAMETER_RANGES = {
    "u_in": (0.15, 0.25),
    "t_cold": (-26.0, -18.0),
    "t_ext": (18.0, 26.0),
    "h_ext": (0.4, 1.2),
}


@dataclass(frozen=True)
class ParameterSample:
    u_in: float
    t_cold: float
    t_ext: float
    h_ext: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u_in, self.t_cold, self.t_ext, self.h_ext], dtype=float)

    def in_range(self) -> bool:
        return all(lo <= getattr(self, k) <= hi for k, (lo, hi) in PARAMETER_RANGES.items())

    def to_dict(self) -> dict:
        return asdict(self)


def sample_parameters(count: int, seed: int) -> list[ParameterSample]:
    """Uniform draws over the operating ranges (PCG64, reproducible across platforms)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in PARAMETER_RANGES.values()])
    hi = np.array([r[1] for r in PARAMETER_RANGES.values()])
    draws = rng.uniform(lo, hi, size=(count, len(lo)))
    return [ParameterSample(*map(float, row)) for row in draws]


@dataclass(frozen=True)
class BDFCoefficients:
    """Weights of T^{n+1}, T^n, T^{n-1}, T^{n-2} in dt * dT/dt."""

    c1: float
    c2: float
    c3: float
    c4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3, self.c4])

    @property
    def levels(self) -> int:
        """History levels the formula needs (excluding the new one)."""
        return 3 if self.c4 != 0 else 2 if self.c3 != 0 else 1


BDF1 = BDFCoefficients(1.0, -1.0, 0.0, 0.0)
BDF2 = BDFCoefficients(1.5, -2.0, 0.5, 0.0)
BDF3 = BDFCoefficients(11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0)


def bdf2opt_coefficients(chi: float = 0.52) -> BDFCoefficients:
    """Blend ``chi * BDF2 + (1 - chi) * BDF3``."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError(f"chi must lie in [0, 1], got {chi}")
    c = chi * BDF2.as_array() + (1.0 - chi) * BDF3.as_array()
    return BDFCoefficients(*map(float, c))


def startup_coefficients(step: int, chi: float = 0.52) -> BDFCoefficients:
    """Implicit Euler for steps 0 and 1, BDF2 for step 2, BDF2-opt afterwards."""
    if step < 2:
        return BDF1
    if step == 2:
        return BDF2
    return bdf2opt_coefficients(chi)


WENO_EPS = 1e-6
WENO_D = (1.0 / 3.0, 2.0 / 3.0)


def weno3_weights(phi_im1, phi_i, phi_ip1):
    beta0 = (phi_im1 - phi_i) ** 2
    beta1 = (phi_i - phi_ip1) ** 2
    a0 = WENO_D[0] / (beta0 + WENO_EPS) ** 2
    a1 = WENO_D[1] / (beta1 + WENO_EPS) ** 2
    s = a0 + a1
    return a0 / s, a1 / s


def weno3_face_value(phi_im1, phi_i, phi_ip1):
    """Value at the face between cells i and i+1, reconstructed from the i side."""
    w0, w1 = weno3_weights(phi_im1, phi_i, phi_ip1)
    # S0 = (3 phi_i - phi_im1)/2 and S1 = (phi_i + phi_ip1)/2, written as increments on
    # phi_i so constant data comes back bit-exact
    return phi_i + 0.5 * (w0 * (phi_i - phi_im1) + w1 * (phi_ip1 - phi_i))


def lax_friedrichs_face_flux(phi_L, phi_R, u_face, alpha):
    return 0.5 * (u_face * (phi_L + phi_R) - alpha * (phi_R - phi_L))


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Staggered face velocities derived from a nodal stream function.

    ``u[j, i]`` lives on the vertical face at ``x_faces[i]`` of row j and
    ``v[j, i]`` on the horizontal face at ``y_faces[j]`` of column i.
    """

    u: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    dx: float
    dy: float

    def divergence(self) -> np.ndarray:
        """Net volumetric outflow of every cell (m^2 s^-1)."""
        du = (self.u[:, 1:] - self.u[:, :-1]) * self.dy
        dv = (self.v[1:, :] - self.v[:-1, :]) * self.dx
        return (du + dv).ravel()

    @property
    def max_speed(self) -> float:
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))

    @classmethod
    def zero(cls, grid: StructuredGrid) -> "VelocityField":
        nx, ny = grid.nx, grid.ny
        return cls(np.zeros((ny, nx + 1)), np.zeros((ny + 1, nx)), np.zeros((ny + 1, nx + 1)), grid.dx, grid.dy)

    @classmethod
    def uniform(cls, grid: StructuredGrid, ux: float, uy: float) -> "VelocityField":
        """Constant velocity on every face, walls included (verification use only)."""
        nx, ny = grid.nx, grid.ny
        return cls(np.full((ny, nx + 1), ux), np.full((ny + 1, nx), uy), np.zeros((ny + 1, nx + 1)), grid.dx, grid.dy)


def _duct_profile(grid: StructuredGrid) -> np.ndarray:
    """Stream function along the duct wall nodes for unit through-flow."""
    ny, dy = grid.ny, grid.dy
    g = grid.geometry
    out_hi = int(round(g.outlet_height / dy))
    in_lo = ny - int(round(g.inlet_height / dy))
    j = np.arange(ny + 1, dtype=float)
    prof = np.full(ny + 1, -1.0)
    prof[: out_hi + 1] = -j[: out_hi + 1] / out_hi
    prof[in_lo:] = -1.0 + (j[in_lo:] - in_lo) / (ny - in_lo)
    return prof if g.duct_wall == "left" else -prof


def _solve_laplace(psi: np.ndarray, known: np.ndarray, dx: float, dy: float) -> np.ndarray:
    ny1, nx1 = psi.shape
    unknown = ~known
    idx = -np.ones(psi.shape, dtype=np.int64)
    idx[unknown] = np.arange(np.count_nonzero(unknown))
    n = int(unknown.sum())
    if n == 0:
        return psi
    jj, ii = np.nonzero(unknown)
    cx, cy = 1.0 / dx**2, 1.0 / dy**2
    rows = [idx[jj, ii]]
    cols = [idx[jj, ii]]
    vals = [np.full(n, -2.0 * (cx + cy))]
    rhs = np.zeros(n)
    for dj, di, c in ((0, 1, cx), (0, -1, cx), (1, 0, cy), (-1, 0, cy)):
        nj, ni = jj + dj, ii + di
        nb_unknown = unknown[nj, ni]
        rows.append(idx[jj, ii][nb_unknown])
        cols.append(idx[nj, ni][nb_unknown])
        vals.append(np.full(int(nb_unknown.sum()), c))
        np.subtract.at(rhs, np.flatnonzero(~nb_unknown), c * psi[nj, ni][~nb_unknown])
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            sol = spla.spsolve(A, rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise RuntimeError("singular stream-function system (disconnected fluid region?)") from exc
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("singular stream-function system (disconnected fluid region?)")
    out = psi.copy()
    out[unknown] = sol
    return out


def build_velocity_field(grid: StructuredGrid, u_in: float) -> VelocityField:
    """Potential-flow surrogate through the cabinet carrying ``u_in * inlet_height``.

    The food+shelf obstacle is a streamline whose level is the mean of an
    obstacle-free solution over its footprint.
    """
    nx, ny, dx, dy = grid.nx, grid.ny, grid.dx, grid.dy
    if u_in == 0:
        return VelocityField.zero(grid)
    Q = u_in * grid.geometry.inlet_height

    psi = np.zeros((ny + 1, nx + 1))
    known = np.zeros_like(psi, dtype=bool)
    known[0, :] = known[-1, :] = known[:, 0] = known[:, -1] = True
    duct_col = 0 if grid.geometry.duct_wall == "left" else nx
    psi[:, duct_col] = Q * _duct_profile(grid)

    solid = (grid.mask != FLUID).reshape(ny, nx)
    obstacle = np.zeros_like(known)
    obstacle[:-1, :-1] |= solid
    obstacle[1:, :-1] |= solid
    obstacle[:-1, 1:] |= solid
    obstacle[1:, 1:] |= solid

    if obstacle.any():
        on_wall = obstacle & known
        if on_wall.any():
            levels = np.unique(np.round(psi[on_wall], 15))
            if len(levels) > 1:
                raise ValueError("obstacle touches wall runs with different stream-function levels")
            level = float(levels[0])
        else:
            level = float(_solve_laplace(psi, known, dx, dy)[obstacle].mean())
        psi[obstacle] = level
        known = known | obstacle

    psi = _solve_laplace(psi, known, dx, dy)
    u = (psi[1:, :] - psi[:-1, :]) / dy
    v = -(psi[:, 1:] - psi[:, :-1]) / dx
    return VelocityField(u, v, psi, dx, dy)


@dataclass
class SolverSettings:
    chi: float = 0.52
    picard_tol: float = 1e-6
    max_picard: int = 50
    wall_conductivity: float = 0.026
    wall_thickness: float = 0.05
    linear_tol: float = 1e-10
    # "enthalpy": conservative dH/dt linearised about the iterate; "pointwise": rho C(T) dT/dt
    capacity_mode: str = "enthalpy"
    min_relaxation: float = 1.0 / 16.0
    # plain Picard iterations before under-relaxation may start
    relax_after: int = 8

    def to_dict(self) -> dict:
        return asdict(self)


class PicardError(RuntimeError):
    def __init__(self, message: str, residuals: Sequence[float]):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass
class Snapshot:
    time: float
    params: ParameterSample
    temperature: np.ndarray


def _interior_faces(grid: StructuredGrid, vel: VelocityField):
    """Interior faces in both directions with their 4-cell upwind stencils."""
    nx, ny = grid.nx, grid.ny
    idx = np.arange(nx * ny).reshape(ny, nx)
    out = {k: [] for k in ("L", "R", "LL", "RR", "area", "dist", "vel")}

    def _add(L, R, LL, RR, area, dist, velocity):
        out["L"].append(L.ravel())
        out["R"].append(R.ravel())
        out["LL"].append(LL.ravel())
        out["RR"].append(RR.ravel())
        out["area"].append(np.full(L.size, area))
        out["dist"].append(np.full(L.size, dist))
        out["vel"].append(velocity.ravel())

    # vertical faces x_faces[1..nx-1]
    L, R = idx[:, :-1], idx[:, 1:]
    LL = np.full_like(L, -1)
    LL[:, 1:] = idx[:, :-2]
    RR = np.full_like(R, -1)
    RR[:, :-1] = idx[:, 2:]
    _add(L, R, LL, RR, grid.dy, grid.dx, vel.u[:, 1:-1])
    # horizontal faces y_faces[1..ny-1]
    L, R = idx[:-1, :], idx[1:, :]
    LL = np.full_like(L, -1)
    LL[1:, :] = idx[:-2, :]
    RR = np.full_like(R, -1)
    RR[:-1, :] = idx[2:, :]
    _add(L, R, LL, RR, grid.dx, grid.dy, vel.v[1:-1, :])
    return {k: np.concatenate(v) for k, v in out.items()}


def _boundary_flow(grid: StructuredGrid, vel: VelocityField):
    """Cells, face lengths and inward normal velocities of all boundary faces."""
    nx, ny = grid.nx, grid.ny
    idx = np.arange(nx * ny).reshape(ny, nx)
    cells = np.concatenate([idx[:, 0], idx[:, -1], idx[0, :], idx[-1, :]])
    inward = np.concatenate([vel.u[:, 0], -vel.u[:, -1], vel.v[0, :], -vel.v[-1, :]])
    length = np.concatenate([np.full(ny, grid.dy), np.full(ny, grid.dy), np.full(nx, grid.dx), np.full(nx, grid.dx)])
    half = np.concatenate([np.full(2 * ny, 0.5 * grid.dx), np.full(2 * nx, 0.5 * grid.dy)])
    sel = inward != 0
    return cells[sel], length[sel], inward[sel], half[sel]


class ForwardModel:
    """Energy operator for one grid/velocity pair; time-steps temperature fields.

    The food and shelf carry no velocity, so advection only acts across air
    faces. The capacity multiplies the BDF difference (``rho C dT/dt``).
    """

    def __init__(
        self,
        grid: StructuredGrid,
        velocity: VelocityField | None = None,
        materials: MaterialModel | None = None,
        settings: SolverSettings | None = None,
    ):
        self.grid = grid
        self.velocity = velocity if velocity is not None else VelocityField.zero(grid)
        self.materials = materials if materials is not None else MaterialModel()
        self.settings = settings if settings is not None else SolverSettings()
        self.volume = grid.cell_area
        self.n = grid.n_cells
        self.last_residuals: list[float] = []
        self._lu = None
        self.factorizations = 0

        f = _interior_faces(grid, self.velocity)
        self._dL, self._dR = f["L"], f["R"]
        self._dgeo = f["area"] / f["dist"]
        adv = f["vel"] != 0
        self._aL, self._aR = f["L"][adv], f["R"][adv]
        self._aLL, self._aRR = f["LL"][adv], f["RR"][adv]
        u = f["vel"][adv]
        alpha = np.abs(u)
        rc = self.materials.air.heat_capacity if self.materials.uniform is None else self.materials.uniform[0]
        self._kL = 0.5 * (u + alpha) * rc * f["area"][adv]
        self._kR = 0.5 * (u - alpha) * rc * f["area"][adv]

        bc, blen, binw, bhalf = _boundary_flow(grid, self.velocity)
        self._b_cells, self._b_rate = bc, rc * np.abs(binw) * blen
        self._b_in = binw > 0
        self._b_half, self._b_len = bhalf, blen
        inlet = set(grid.domain.boundary["inlet"].cells.tolist())
        if any(c not in inlet for c in bc[self._b_in]):
            raise ValueError("inflow through a boundary face outside the inlet segment")
        self._wall = grid.domain.boundary["wall"]

    def _stencil(self, T, c_up, c_far, c_down):
        """Linear weights of a WENO3 face value on (far, upwind, downwind) cells."""
        w0, w1 = weno3_weights(T[np.maximum(c_far, 0)], T[c_up], T[c_down])
        missing = c_far < 0
        w0 = np.where(missing, 0.0, w0)
        w1 = np.where(missing, 0.0, w1)
        coef_far = -0.5 * w0
        coef_up = 1.5 * w0 + 0.5 * w1 + missing
        coef_down = 0.5 * w1
        return np.where(missing, c_up, c_far), coef_far, coef_up, coef_down

    def assemble(self, T_iter, history, coefficients, dt, params, source=None, T_weno=None):
        """Linear system for T^{n+1}; properties at ``T_iter``, WENO weights at ``T_weno``."""
        n = self.n
        T_weno = T_iter if T_weno is None else T_weno
        cap, cond = self.materials.fields(T_iter, self.grid.mask)
        c = coefficients.as_array()
        rows, cols, vals = [], [], []
        diag = self.volume * cap * c[0] / dt
        if self.settings.capacity_mode == "enthalpy":
            # d/dt H(T), with H(T) linearised about the iterate
            mask = self.grid.mask
            H_iter = self.materials.enthalpy(T_iter, mask)
            hist = sum(ck * self.materials.enthalpy(h, mask) for ck, h in zip(c[1:], history))
            b = -self.volume * (c[0] * (H_iter - cap * T_iter) + hist) / dt
        else:
            hist = sum(ck * h for ck, h in zip(c[1:], history))
            b = -self.volume * cap * hist / dt

        # diffusion, harmonic-mean face conductivity
        kL, kR = cond[self._dL], cond[self._dR]
        D = 2.0 * kL * kR / (kL + kR) * self._dgeo
        diag = diag + np.bincount(self._dL, D, n) + np.bincount(self._dR, D, n)
        rows += [self._dL, self._dR]
        cols += [self._dR, self._dL]
        vals += [-D, -D]

        # advection: F = kL * phi_L + kR * phi_R, outflow from L, inflow to R
        if len(self._aL):
            far, cf, cu, cd = self._stencil(T_weno, self._aL, self._aLL, self._aR)
            for col, coef in ((far, cf), (self._aL, cu), (self._aR, cd)):
                rows += [self._aL, self._aR]
                cols += [col, col]
                vals += [self._kL * coef, -self._kL * coef]
            far, cf, cu, cd = self._stencil(T_weno, self._aR, self._aRR, self._aL)
            for col, coef in ((far, cf), (self._aR, cu), (self._aL, cd)):
                rows += [self._aL, self._aR]
                cols += [col, col]
                vals += [self._kR * coef, -self._kR * coef]

        # ducts: inflow carries t_cold (plus Dirichlet conduction), outflow is upwind
        if len(self._b_cells):
            inflow = self._b_in
            cin = self._b_cells[inflow]
            g_in = self._b_rate[inflow] + cond[cin] * self._b_len[inflow] / self._b_half[inflow]
            diag = diag + np.bincount(cin, g_in, n)
            b = b + np.bincount(cin, g_in * params.t_cold, n)
            cout = self._b_cells[~inflow]
            diag = diag + np.bincount(cout, self._b_rate[~inflow], n)

        # Robin walls through the insulation layer
        if params.h_ext > 0:
            s = self.settings
            r_w = 1.0 / params.h_ext + s.wall_thickness / s.wall_conductivity
            g = self._wall.lengths / r_w
            diag = diag + np.bincount(self._wall.cells, g, n)
            b = b + np.bincount(self._wall.cells, g * params.t_ext, n)

        if source is not None:
            b = b + self.volume * source

        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        return A, b

    def _solve(self, A, b, x0):
        """BiCGSTAB preconditioned with a stale LU; refactor when it stops paying off."""
        tol = self.settings.linear_tol
        # an initial guess that already meets the tolerance is returned untouched
        if np.linalg.norm(b - A @ x0) <= tol * np.linalg.norm(b):
            return x0.copy()
        if self._lu is not None:
            count = [0]

            def _tick(_):
                count[0] += 1

            M = spla.LinearOperator(A.shape, self._lu.solve)
            x, info = spla.bicgstab(A, b, x0=x0, rtol=tol, atol=0.0, M=M, maxiter=25, callback=_tick)
            if info == 0 and np.all(np.isfinite(x)):
                if count[0] > 6:
                    self._lu = None
                return x
        self._lu = spla.splu(A)
        self.factorizations += 1
        return self._lu.solve(b)

    def step(
        self,
        history: Sequence[np.ndarray],
        params: ParameterSample,
        dt: float,
        coefficients: BDFCoefficients | None = None,
        source: np.ndarray | None = None,
    ) -> np.ndarray:
        """One implicit step from ``history = (T^n, T^{n-1}, T^{n-2})`` (newest first)."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        if coefficients is None:
            coefficients = bdf2opt_coefficients(self.settings.chi)
        if len(history) < coefficients.levels:
            raise ValueError(f"scheme needs {coefficients.levels} history levels, got {len(history)}")
        history = [np.asarray(h, dtype=float) for h in history[: coefficients.levels]]
        if not all(np.all(np.isfinite(h)) for h in history):
            raise FloatingPointError("non-finite temperature in the step history")
        T = history[0].copy()
        # nonlinear WENO weights are lagged to the previous level; Picard handles the properties
        T_weno = history[0]
        residuals = []
        omega = 1.0
        for _ in range(self.settings.max_picard):
            A, b = self.assemble(T, history, coefficients, dt, params, source, T_weno)
            T_new = self._solve(A, b, T)
            if not np.all(np.isfinite(T_new)):
                raise FloatingPointError("non-finite temperature in implicit solve")
            change = float(np.max(np.abs(T_new - T)) / max(np.max(np.abs(T_new)), 1.0))
            residuals.append(change)
            if change < self.settings.picard_tol:
                self.last_residuals = residuals
                return T_new
            # stalled or cycling across a capacity kink: damp the update; recover when it contracts
            if len(residuals) > self.settings.relax_after and change > 0.7 * residuals[-2]:
                omega = max(0.5 * omega, self.settings.min_relaxation)
            elif len(residuals) > 1 and change < 0.3 * residuals[-2]:
                omega = min(2.0 * omega, 1.0)
            T = T + omega * (T_new - T)
        raise PicardError(
            f"Picard iteration did not converge in {self.settings.max_picard} iterations "
            f"(last change {residuals[-1]:.3e})",
            residuals,
        )


def advance_step(
    grid: StructuredGrid,
    history: Sequence[np.ndarray],
    velocity: VelocityField,
    params: ParameterSample,
    dt: float,
    coefficients: BDFCoefficients | None = None,
    materials: MaterialModel | None = None,
    settings: SolverSettings | None = None,
    source: np.ndarray | None = None,
) -> np.ndarray:
    return ForwardModel(grid, velocity, materials, settings).step(history, params, dt, coefficients, source)


def run_case(
    grid: StructuredGrid,
    params: ParameterSample,
    dt: float,
    t_final: float,
    snapshot_stride: int = 1,
    materials: MaterialModel | None = None,
    settings: SolverSettings | None = None,
    velocity: VelocityField | None = None,
    callback: Callable[[int, float, np.ndarray], None] | None = None,
) -> list[Snapshot]:
    """Freeze from thermal equilibrium with the room; every ``snapshot_stride``-th state is kept."""
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    settings = settings if settings is not None else SolverSettings()
    if velocity is None:
        velocity = build_velocity_field(grid, params.u_in)
    model = ForwardModel(grid, velocity, materials, settings)
    n_steps = int(round(t_final / dt))
    T = np.full(grid.n_cells, float(params.t_ext))
    snaps = [Snapshot(0.0, params, T.copy())]
    history = [T]
    for step in range(n_steps):
        T = model.step(history, params, dt, startup_coefficients(step, settings.chi))
        history = [T] + history[:2]
        t = (step + 1) * dt
        if callback is not None:
            callback(step, t, T)
        if (step + 1) % snapshot_stride == 0:
            snaps.append(Snapshot(t, params, T.copy()))
    return snaps
