"""Freezer cross-section geometry and the uniform finite-volume grid.

Cells are indexed row-major with x fastest: ``index = j * nx + i``, so cell 0 is
the lower-left corner of the cabinet.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

FLUID, FOOD, SHELF = 0, 1, 2
LABELS = {FLUID: "FLUID", FOOD: "FOOD", SHELF: "SHELF"}

# Robin walls exchange heat with the room; the rear wall carrying the ducts is adiabatic.
SEGMENTS = ("inlet", "outlet", "rear", "wall")


@dataclass(frozen=True)
class CaseGeometry:
    """2D mid-section of the freezer cabinet (SI units).

    ``duct_wall`` selects the wall carrying the inlet (top end) and the outlet
    (bottom end). That wall is the adiabatic rear wall.
    """

    cabinet_width: float = 0.35
    cabinet_height: float = 0.40
    food_width: float = 0.08
    food_height: float = 0.03
    shelf_width: float = 0.25
    shelf_thickness: float = 0.002
    inlet_height: float = 0.12
    outlet_height: float = 0.06
    food_anchor: tuple[float, float] = (0.14, 0.201)
    shelf_y: float = 0.20
    shelf_x: float = 0.05
    duct_wall: str = "left"

    def __post_init__(self):
        object.__setattr__(self, "food_anchor", tuple(float(v) for v in self.food_anchor))
        lengths = {
            "cabinet_width": self.cabinet_width,
            "cabinet_height": self.cabinet_height,
            "food_width": self.food_width,
            "food_height": self.food_height,
            "shelf_width": self.shelf_width,
            "shelf_thickness": self.shelf_thickness,
            "inlet_height": self.inlet_height,
            "outlet_height": self.outlet_height,
        }
        for name, value in lengths.items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.inlet_height + self.outlet_height >= self.cabinet_height:
            raise ValueError("inlet_height + outlet_height must be smaller than cabinet_height")
        if self.duct_wall not in ("left", "right"):
            raise ValueError(f"duct_wall must be 'left' or 'right', got {self.duct_wall!r}")
        W, H = self.cabinet_width, self.cabinet_height
        _check_inside("shelf", self.shelf_rect, W, H)
        _check_inside("food", self.food_rect, W, H)
        if not math.isclose(self.food_anchor[1], self.shelf_rect[3], abs_tol=1e-9):
            raise ValueError(
                f"food must rest on the shelf top (y={self.shelf_rect[3]:.6g}), "
                f"got food_anchor y={self.food_anchor[1]:.6g}"
            )
        fx0, _, fx1, _ = self.food_rect
        sx0, _, sx1, _ = self.shelf_rect
        if fx0 < sx0 - 1e-12 or fx1 > sx1 + 1e-12:
            raise ValueError("food slab overhangs the shelf")

    @property
    def shelf_rect(self) -> tuple[float, float, float, float]:
        h = 0.5 * self.shelf_thickness
        return (self.shelf_x, self.shelf_y - h, self.shelf_x + self.shelf_width, self.shelf_y + h)

    @property
    def food_rect(self) -> tuple[float, float, float, float]:
        x0, y0 = self.food_anchor
        return (x0, y0, x0 + self.food_width, y0 + self.food_height)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["food_anchor"] = list(self.food_anchor)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CaseGeometry":
        d = dict(d)
        if "food_anchor" in d:
            d["food_anchor"] = tuple(d["food_anchor"])
        return cls(**d)


def _check_inside(name, rect, W, H):
    x0, y0, x1, y1 = rect
    if x0 < -1e-12 or y0 < -1e-12 or x1 > W + 1e-12 or y1 > H + 1e-12:
        raise ValueError(f"{name} rectangle {rect} lies outside the {W} x {H} cabinet")


@dataclass(frozen=True)
class BoundarySegment:
    """Boundary faces of one wall segment: owning cell, side ('W','E','S','N'), face length."""

    cells: np.ndarray
    sides: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class DomainMask:
    fluid: np.ndarray
    food: np.ndarray
    shelf: np.ndarray
    boundary: dict[str, BoundarySegment]
    # interior faces separating FLUID from FOOD/SHELF, as (fluid cell, solid cell) pairs
    interface: np.ndarray


@dataclass(frozen=True, eq=False)
class StructuredGrid:
    nx: int
    ny: int
    x_faces: np.ndarray
    y_faces: np.ndarray
    mask: np.ndarray
    geometry: CaseGeometry
    domain: DomainMask = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return float(self.x_faces[1] - self.x_faces[0])

    @property
    def dy(self) -> float:
        return float(self.y_faces[1] - self.y_faces[0])

    @property
    def cell_area(self) -> np.ndarray:
        ax = np.diff(self.x_faces)
        ay = np.diff(self.y_faces)
        return np.outer(ay, ax).ravel()

    @property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xc = 0.5 * (self.x_faces[1:] + self.x_faces[:-1])
        yc = 0.5 * (self.y_faces[1:] + self.y_faces[:-1])
        X, Y = np.meshgrid(xc, yc)
        return X.ravel(), Y.ravel()

    def index(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    def ij(self, k):
        k = np.asarray(k)
        return k % self.nx, k // self.nx

    @property
    def grid_hash(self) -> bytes:
        h = hashlib.sha256()
        h.update(np.asarray([self.nx, self.ny], dtype="<u8").tobytes())
        h.update(np.ascontiguousarray(self.x_faces, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y_faces, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.mask, dtype="u1").tobytes())
        h.update(json.dumps(self.geometry.to_dict(), sort_keys=True).encode())
        return h.digest()

    @property
    def grid_hash_hex(self) -> str:
        return self.grid_hash.hex()

    def locate_point(self, x: float, y: float) -> int:
        return locate_point(self, x, y)


def _snap(value: float, h: float) -> int:
    """Index of the face nearest to ``value`` on a uniform lattice of spacing ``h``."""
    return int(math.floor(value / h + 0.5 + 1e-9))


def build_grid(geom: CaseGeometry, nx: int, ny: int) -> StructuredGrid:
    """Uniform ``nx`` x ``ny`` grid with the food and shelf snapped to grid faces.

    The shelf keeps at least one cell of thickness and the food is re-seated on
    the snapped shelf top. The snapped geometry is stored on the returned grid.
    """
    if nx < 8 or ny < 8:
        raise ValueError(f"grid must have at least 8 cells per direction, got {nx} x {ny}")
    W, H = geom.cabinet_width, geom.cabinet_height
    dx, dy = W / nx, H / ny

    sx0, sy0, sx1, sy1 = geom.shelf_rect
    si0, si1 = _snap(sx0, dx), _snap(sx1, dx)
    sj0, sj1 = _snap(sy0, dy), _snap(sy1, dy)
    if si1 <= si0:
        si1 = si0 + 1
    if sj1 <= sj0:
        sj1 = sj0 + 1
    fx0, _, fx1, _ = geom.food_rect
    fi0, fi1 = _snap(fx0, dx), _snap(fx1, dx)
    fj0 = sj1
    fj1 = _snap(sj1 * dy + geom.food_height, dy)
    if fi1 - fi0 < 2 or fj1 - fj0 < 2:
        raise ValueError(
            f"grid {nx} x {ny} resolves the food slab with fewer than 2 cells across "
            f"({fi1 - fi0} x {fj1 - fj0})"
        )
    if si1 > nx or fj1 > ny or fi0 < si0 or fi1 > si1:
        raise ValueError("snapped food/shelf rectangles do not fit the cabinet")

    out_hi = min(max(1, _snap(geom.outlet_height, dy)), ny - 2)
    in_lo = max(min(ny - 1, _snap(H - geom.inlet_height, dy)), out_hi + 1)

    snapped = replace(
        geom,
        inlet_height=(ny - in_lo) * dy,
        outlet_height=out_hi * dy,
        shelf_x=si0 * dx,
        shelf_width=(si1 - si0) * dx,
        shelf_y=0.5 * (sj0 + sj1) * dy,
        shelf_thickness=(sj1 - sj0) * dy,
        food_anchor=(fi0 * dx, sj1 * dy),
        food_width=(fi1 - fi0) * dx,
        food_height=(fj1 - fj0) * dy,
    )

    mask2d = np.full((ny, nx), FLUID, dtype=np.int8)
    mask2d[sj0:sj1, si0:si1] = SHELF
    mask2d[fj0:fj1, fi0:fi1] = FOOD
    mask = mask2d.ravel()

    x_faces = np.linspace(0.0, W, nx + 1)
    y_faces = np.linspace(0.0, H, ny + 1)
    domain = _build_domain(snapped, mask2d, x_faces, y_faces)
    return StructuredGrid(nx, ny, x_faces, y_faces, mask, snapped, domain)


def _build_domain(geom, mask2d, x_faces, y_faces) -> DomainMask:
    ny, nx = mask2d.shape
    dx, dy = x_faces[1] - x_faces[0], y_faces[1] - y_faces[0]
    mask = mask2d.ravel()
    idx = np.arange(nx * ny).reshape(ny, nx)

    # geometry is already snapped, so the duct spans are whole rows
    out_hi = _snap(geom.outlet_height, dy)
    in_lo = ny - _snap(geom.inlet_height, dy)
    rows = np.arange(ny)
    duct_col, duct_side = (0, "W") if geom.duct_wall == "left" else (nx - 1, "E")
    other_col, other_side = (nx - 1, "E") if geom.duct_wall == "left" else (0, "W")

    segs: dict[str, list] = {s: [] for s in SEGMENTS}
    for j in rows:
        cell = idx[j, duct_col]
        if j >= in_lo:
            segs["inlet"].append((cell, duct_side, dy))
        elif j < out_hi:
            segs["outlet"].append((cell, duct_side, dy))
        else:
            segs["rear"].append((cell, duct_side, dy))
        segs["wall"].append((idx[j, other_col], other_side, dy))
    for i in range(nx):
        segs["wall"].append((idx[0, i], "S", dx))
        segs["wall"].append((idx[ny - 1, i], "N", dx))

    boundary = {}
    for name, items in segs.items():
        cells = np.array([c for c, _, _ in items], dtype=np.int64)
        sides = np.array([s for _, s, _ in items], dtype="<U1")
        lengths = np.array([l for _, _, l in items], dtype=float)
        boundary[name] = BoundarySegment(cells, sides, lengths)

    pairs = []
    for a, b in ((idx[:, :-1].ravel(), idx[:, 1:].ravel()), (idx[:-1, :].ravel(), idx[1:, :].ravel())):
        fa, fb = mask[a] == FLUID, mask[b] == FLUID
        sel = fa & ~fb
        pairs.append(np.column_stack([a[sel], b[sel]]))
        sel = fb & ~fa
        pairs.append(np.column_stack([b[sel], a[sel]]))
    interface = np.concatenate(pairs).astype(np.int64)

    return DomainMask(
        fluid=np.flatnonzero(mask == FLUID),
        food=np.flatnonzero(mask == FOOD),
        shelf=np.flatnonzero(mask == SHELF),
        boundary=boundary,
        interface=interface,
    )


def locate_point(grid: StructuredGrid, x: float, y: float) -> int:
    """Cell containing ``(x, y)``; points on a shared face go to the lower-index cell."""
    W, H = grid.x_faces[-1], grid.y_faces[-1]
    if not (0.0 <= x <= W and 0.0 <= y <= H):
        raise ValueError(f"point ({x}, {y}) lies outside the {W} x {H} cabinet")
    i = max(int(np.searchsorted(grid.x_faces, x, side="left")) - 1, 0)
    j = max(int(np.searchsorted(grid.y_faces, y, side="left")) - 1, 0)
    return int(j * grid.nx + i)


def food_point(grid: StructuredGrid, offset_x: float, offset_y: float) -> int:
    """Cell at an offset from the lower-left corner of the food slab."""
    x0, y0 = grid.geometry.food_anchor
    return locate_point(grid, x0 + offset_x, y0 + offset_y)


# control points inside the food, offsets from the food's lower-left corner (m)
CONTROL_POINTS = {"P1": (0.052, 0.015), "P2": (0.002, 0.028), "P3": (0.078, 0.002)}
