"""Snapshot matrices and their truncated SVD (POD) bases."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class SnapshotMatrix:
    """Columns are full-state fields; ``column_meta`` keeps (run id, time, params) per column."""

    data: np.ndarray
    column_meta: list[dict] = field(default_factory=list)
    mean: np.ndarray | None = None
    grid_hash: bytes = b""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError("snapshot matrix must be 2D with at least one column")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("snapshot matrix contains non-finite entries")
        if self.column_meta and len(self.column_meta) != self.data.shape[1]:
            raise ValueError("column_meta length does not match the number of columns")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]

    @property
    def mean_subtracted(self) -> bool:
        return self.mean is not None


@dataclass(frozen=True, eq=False)
class PODBasis:
    """Leading left singular vectors ``phi`` (N x n_max).

    ``sigma`` keeps every computed singular value, so it may be longer than
    n_max; the tail energy beyond the stored modes stays exact.
    """

    phi: np.ndarray
    sigma: np.ndarray
    grid_hash: bytes = b""
    mean: np.ndarray | None = None

    def __post_init__(self):
        if self.phi.ndim != 2 or self.phi.shape[1] > len(self.sigma):
            raise ValueError("phi must be N x n_max with at least n_max singular values")
        if len(self.sigma) and np.any(np.diff(self.sigma) > 1e-12 * max(float(self.sigma[0]), 1.0)):
            raise ValueError("singular values must be non-increasing")

    @property
    def n_max(self) -> int:
        return self.phi.shape[1]

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def mean_subtracted(self) -> bool:
        return self.mean is not None

    def truncate(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.n_max:
            raise ValueError(f"n={n} outside [1, {self.n_max}]")
        return self.phi[:, :n]

    @property
    def leading_sigma(self) -> np.ndarray:
        return self.sigma[: self.n_max]

    def energy_total(self) -> float:
        return float(np.sum(self.sigma**2))


def assemble_snapshots(
    runs: Sequence[tuple[bytes, Sequence]],
    subtract_mean: bool = False,
) -> SnapshotMatrix:
    """Stack snapshots column-wise in run then time order.

    ``runs`` holds ``(grid_hash, snapshots)`` pairs; every snapshot exposes
    ``time``, ``params`` and ``temperature``.
    """
    if not runs:
        raise ValueError("no runs to assemble")
    hashes = {h for h, _ in runs}
    if len(hashes) != 1:
        raise ValueError("runs were computed on different grids (grid hash mismatch)")
    cols, meta = [], []
    for run_id, (_, snaps) in enumerate(runs):
        for s in snaps:
            cols.append(np.asarray(s.temperature, dtype=float))
            params = s.params.to_dict() if hasattr(s.params, "to_dict") else dict(s.params)
            meta.append({"run": run_id, "time": float(s.time), "params": params})
    if not cols:
        raise ValueError("runs contain no snapshots")
    A = np.column_stack(cols)
    mean = None
    if subtract_mean:
        mean = A.mean(axis=1)
        A = A - mean[:, None]
    return SnapshotMatrix(A, meta, mean, hashes.pop())


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive (first one on ties)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def compute_pod(A: SnapshotMatrix | np.ndarray, n_max: int, weights: np.ndarray | None = None) -> PODBasis:
    """Leading ``n_max`` left singular vectors by thin SVD.

    With ``weights`` (one positive value per row) the rows are scaled by
    sqrt(weight) before the decomposition, so the basis is orthonormal in the
    weighted inner product ``sum_k w_k x_k y_k`` after mapping back.
    """
    data = A.data if isinstance(A, SnapshotMatrix) else np.asarray(A, dtype=float)
    if data.ndim != 2:
        raise ValueError("snapshot data must be 2D")
    N, K = data.shape
    if not 1 <= n_max <= min(N, K):
        raise ValueError(f"n_max={n_max} must lie in [1, min(N, K)={min(N, K)}]")
    if weights is not None:
        w = np.sqrt(np.asarray(weights, dtype=float))
        if w.shape != (N,) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per row")
        data = data * w[:, None]
    U, s, _ = np.linalg.svd(data, full_matrices=False)
    phi = _fix_signs(U[:, :n_max])
    if weights is not None:
        phi = phi / w[:, None]
    return PODBasis(
        phi=np.ascontiguousarray(phi),
        sigma=s.copy(),
        grid_hash=A.grid_hash if isinstance(A, SnapshotMatrix) else b"",
        mean=A.mean if isinstance(A, SnapshotMatrix) else None,
    )


def tail_energy(basis: PODBasis | np.ndarray, n: int, total_sq: float | None = None) -> float:
    """sqrt(sum_{i>n} sigma_i^2) / sqrt(total_sq); ``total_sq`` defaults to the sum over all of sigma."""
    sigma = basis.sigma if isinstance(basis, PODBasis) else np.asarray(basis, dtype=float)
    if not 0 <= n <= len(sigma):
        raise ValueError(f"n={n} outside [0, {len(sigma)}]")
    if total_sq is None:
        total_sq = float(np.sum(sigma**2))
    if total_sq <= 0:
        raise ValueError("tail energy is undefined for a zero snapshot matrix")
    return float(np.sqrt(np.sum(sigma[n:] ** 2) / total_sq))
