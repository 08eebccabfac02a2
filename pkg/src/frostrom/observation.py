"""Pixel sensors and the observation matrix W of discrete Riesz representers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .mesh import FOOD, StructuredGrid

MODES = ("unit", "average")


@dataclass(frozen=True, eq=False)
class PixelSensor:
    """Axis-aligned pixel; ``lattice`` is its (column, row) on the pixel tiling."""

    rect: tuple[float, float, float, float]
    cell_indices: np.ndarray
    cell_areas: np.ndarray
    lattice: tuple[int, int] = (-1, -1)

    @property
    def area(self) -> float:
        return float(np.sum(self.cell_areas))

    def weights(self, mode: str = "unit") -> np.ndarray:
        if mode == "unit":
            w = self.cell_areas / math.sqrt(self.area)
            return w / np.linalg.norm(w)
        if mode == "average":
            return self.cell_areas / self.area
        raise ValueError(f"unknown observation mode {mode!r}; expected one of {MODES}")


def _cells_per_pixel(pixel_size: float, h: float, axis: str) -> int:
    ratio = pixel_size / h
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-6 * max(ratio, 1.0):
        raise ValueError(f"pixel size {pixel_size} is not an integer multiple of the {axis} cell size {h}")
    return k


def food_exclusion(grid: StructuredGrid) -> np.ndarray:
    return grid.mask == FOOD


def build_pixel_grid(
    grid: StructuredGrid,
    pixel_size: float,
    exclude: np.ndarray | None = None,
) -> list[PixelSensor]:
    """Tile the cabinet with square pixels anchored at the origin.

    Pixels at the top and right edges are clipped to the cabinet when its
    size is not a multiple of ``pixel_size``. Any pixel touching a cell flagged
    in ``exclude`` is dropped entirely.
    """
    kx = _cells_per_pixel(pixel_size, grid.dx, "x")
    ky = _cells_per_pixel(pixel_size, grid.dy, "y")
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=bool)
        if exclude.shape != (grid.n_cells,):
            raise ValueError("exclusion mask must have one entry per cell")
    areas = grid.cell_area
    sensors = []
    for b in range(math.ceil(grid.ny / ky)):
        j0, j1 = b * ky, min((b + 1) * ky, grid.ny)
        for a in range(math.ceil(grid.nx / kx)):
            i0, i1 = a * kx, min((a + 1) * kx, grid.nx)
            jj, ii = np.meshgrid(np.arange(j0, j1), np.arange(i0, i1), indexing="ij")
            cells = grid.index(ii.ravel(), jj.ravel())
            if exclude is not None and exclude[cells].any():
                continue
            rect = (
                float(grid.x_faces[i0]),
                float(grid.y_faces[j0]),
                float(grid.x_faces[i1]),
                float(grid.y_faces[j1]),
            )
            sensors.append(PixelSensor(rect, cells, areas[cells], (a, b)))
    return sensors


def sensor_from_rect(grid: StructuredGrid, rect: Sequence[float], lattice=(-1, -1)) -> PixelSensor:
    """Rebuild a sensor from its rectangle (cells whose centres fall inside)."""
    x0, y0, x1, y1 = rect
    X, Y = grid.centers
    inside = np.flatnonzero((X > x0) & (X < x1) & (Y > y0) & (Y < y1))
    if inside.size == 0:
        raise ValueError(f"rectangle {tuple(rect)} covers no cells")
    return PixelSensor(tuple(map(float, rect)), inside, grid.cell_area[inside], tuple(lattice))


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """Sparse N x m matrix; column k holds the weights of sensor k."""

    matrix: sp.csc_matrix
    mode: str
    sensors: tuple[PixelSensor, ...]
    grid_hash: bytes = b""

    @property
    def n_sensors(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def project(self, phi: np.ndarray) -> np.ndarray:
        """W^T phi for a dense N x k (or length N) array."""
        return np.asarray(self.matrix.T @ phi)

    def subset(self, indices: Iterable[int]) -> "ObservationMatrix":
        idx = list(indices)
        return ObservationMatrix(self.matrix[:, idx].tocsc(), self.mode, tuple(self.sensors[i] for i in idx), self.grid_hash)


def assemble_observer(
    sensors: Sequence[PixelSensor],
    n_cells: int,
    mode: str = "unit",
    grid_hash: bytes = b"",
) -> ObservationMatrix:
    if not sensors:
        raise ValueError("at least one sensor is required")
    if mode not in MODES:
        raise ValueError(f"unknown observation mode {mode!r}; expected one of {MODES}")
    rows = np.concatenate([s.cell_indices for s in sensors])
    if len(np.unique(rows)) != len(rows):
        raise ValueError("sensor pixels overlap; columns would not be orthogonal")
    if rows.min() < 0 or rows.max() >= n_cells:
        raise ValueError("sensor cell index outside the grid")
    cols = np.concatenate([np.full(len(s.cell_indices), k) for k, s in enumerate(sensors)])
    vals = np.concatenate([s.weights(mode) for s in sensors])
    W = sp.csc_matrix((vals, (rows, cols)), shape=(n_cells, len(sensors)))
    return ObservationMatrix(W, mode, tuple(sensors), grid_hash)


def measure(
    W: ObservationMatrix,
    T: np.ndarray,
    noise_sd: float = 0.0,
    seed: int | None = None,
) -> np.ndarray:
    """ell = W^T T (one column per snapshot when T is N x K), plus optional Gaussian noise."""
    T = np.asarray(T, dtype=float)
    if T.shape[0] != W.n_cells:
        raise ValueError(f"field has {T.shape[0]} entries, observer expects {W.n_cells}")
    ell = W.project(T)
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    if noise_sd > 0:
        ell = ell + np.random.default_rng(seed).normal(0.0, noise_sd, size=ell.shape)
    return ell
