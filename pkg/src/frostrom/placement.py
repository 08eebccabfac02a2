"""Greedy observability-driven sensor selection and the regular nested-ring baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimation import ErrorReport, build_error_report, cross_gramian, reconstruct
from .observation import ObservationMatrix, PixelSensor, assemble_observer, measure
from .rom import PODBasis


@dataclass(frozen=True, eq=False)
class SensorPool:
    """Candidate pixels; the observer holds their unit-norm columns in pool order."""

    candidates: tuple[PixelSensor, ...]
    observer: ObservationMatrix

    @classmethod
    def from_sensors(cls, sensors: Sequence[PixelSensor], n_cells: int, mode: str = "unit", grid_hash: bytes = b""):
        # assemble_observer rejects overlapping pixels
        return cls(tuple(sensors), assemble_observer(sensors, n_cells, mode, grid_hash))

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass
class Placement:
    indices: list[int]
    objectives: list[float] = field(default_factory=list)
    method: str = "greedy"

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("placement repeats a sensor")

    def observer(self, pool: SensorPool) -> ObservationMatrix:
        return pool.observer.subset(self.indices)


def _smallest_eig(batch: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(batch)[:, 0]


def greedy_place(
    phi: np.ndarray,
    pool: SensorPool | np.ndarray,
    m_target: int,
    tie_tol: float = 1e-12,
) -> Placement:
    """Sequential selection maximising the observability of span(phi).

    The first pick maximises ||w^T phi||; picks 2..n maximise the i-th (smallest)
    singular value of the grown i x n cross-Gramian; later picks maximise its
    n-th singular value. Candidates within ``tie_tol`` (relative) of the best
    score go to the lowest index. ``pool`` may also be a dense N x M matrix whose
    columns are the candidate representers.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.shape[0] == 1 and phi.shape[1] > 1:
        phi = phi.T
    n = phi.shape[1]
    R = pool.observer.project(phi) if isinstance(pool, SensorPool) else np.asarray(pool, dtype=float).T @ phi
    M = R.shape[0]
    if m_target < n:
        raise ValueError(f"m_target={m_target} < n={n}: at least n sensors are needed for well-posedness")
    if m_target > M:
        raise ValueError(f"sensor pool exhausted: m_target={m_target} > {M} candidates")

    available = np.ones(M, dtype=bool)
    chosen: list[int] = []
    objectives: list[float] = []
    for step in range(1, m_target + 1):
        cand = np.flatnonzero(available)
        Rc = R[cand]
        if step == 1:
            score = np.linalg.norm(Rc, axis=1)
        elif step <= n:
            # i x i Gram of the stacked rows: its smallest eigenvalue is sigma_i^2
            S = R[chosen]
            k = len(chosen)
            gram = np.empty((len(cand), k + 1, k + 1))
            gram[:, :k, :k] = S @ S.T
            cross = Rc @ S.T
            gram[:, :k, k] = cross
            gram[:, k, :k] = cross
            gram[:, k, k] = np.einsum("ij,ij->i", Rc, Rc)
            score = np.sqrt(np.clip(_smallest_eig(gram), 0.0, None))
        else:
            # n x n Gram: sigma_n^2 of the stacked rows
            S = R[chosen]
            base = S.T @ S
            gram = base[None] + Rc[:, :, None] * Rc[:, None, :]
            score = np.sqrt(np.clip(_smallest_eig(gram), 0.0, None))
        best = float(score.max())
        pick = int(cand[np.flatnonzero(score >= best - tie_tol * max(best, 1e-300))[0]])
        chosen.append(pick)
        available[pick] = False
        sv = np.linalg.svd(R[chosen], compute_uv=False)
        objectives.append(float(np.linalg.norm(R[pick])) if step == 1 else float(sv[min(step, n) - 1]))
    return Placement(chosen, objectives, "greedy")


def ring_order(sensors: Sequence[PixelSensor], shape: tuple[int, int] | None = None) -> list[int]:
    """Pool indices sorted ring by ring from the lattice boundary inward.

    Each ring is walked counterclockwise from its lower-left corner.
    """
    lat = np.array([s.lattice for s in sensors], dtype=int)
    if np.any(lat < 0):
        raise ValueError("sensors carry no lattice position")
    if shape is None:
        shape = (int(lat[:, 0].max()) + 1, int(lat[:, 1].max()) + 1)
    A, B = shape
    keys = []
    for k, (a, b) in enumerate(lat):
        r = int(min(a, b, A - 1 - a, B - 1 - b))
        w, h = A - 1 - 2 * r, B - 1 - 2 * r
        if b == r:
            pos = a - r
        elif a == A - 1 - r:
            pos = w + (b - r)
        elif b == B - 1 - r:
            pos = w + h + (A - 1 - r - a)
        else:
            pos = 2 * w + h + (B - 1 - r - b)
        keys.append((r, pos, k))
    return [k for _, _, k in sorted(keys)]


def regular_placement(pool: SensorPool, m_target: int, shape: tuple[int, int] | None = None) -> Placement:
    """First ``m_target`` pool pixels in nested-ring order, outermost ring first."""
    if m_target > len(pool):
        raise ValueError(f"m_target={m_target} exceeds the pool size {len(pool)}")
    if m_target < 1:
        raise ValueError("m_target must be positive")
    order = ring_order(pool.candidates, shape)
    return Placement(order[:m_target], [], "regular")


@dataclass
class PlacementEvaluation:
    method: str
    m: int
    n: int
    reports: list[ErrorReport]

    @property
    def time_average(self) -> float:
        return float(np.mean([r.time_average for r in self.reports]))

    @property
    def accumulated(self) -> float:
        return float(np.mean([r.accumulated for r in self.reports]))


def evaluate_placement(
    placement: Placement,
    pool: SensorPool,
    basis: PODBasis,
    n: int,
    test_runs: Sequence[tuple[np.ndarray, np.ndarray]],
    rows: np.ndarray | None = None,
    points: dict[str, int] | None = None,
) -> PlacementEvaluation:
    """Reconstruct every snapshot of each test run (``(times, N x K fields)``) under ``placement``."""
    W = placement.observer(pool)
    G = cross_gramian(W, basis, n)
    reports = []
    for times, fields in test_runs:
        rec = reconstruct(basis, W, n, measure(W, fields), G)
        reports.append(build_error_report(fields, rec.field, times, points, rows))
    return PlacementEvaluation(placement.method, len(placement.indices), n, reports)


def budget_for(n: int, factor: float = 1.5) -> int:
    return int(math.ceil(factor * n))
