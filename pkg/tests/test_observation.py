import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frostrom.mesh import CaseGeometry, build_grid
from frostrom.observation import (
    PixelSensor,
    assemble_observer,
    build_pixel_grid,
    food_exclusion,
    measure,
    sensor_from_rect,
)


@pytest.fixture(scope="module")
def small_box():
    # 4 x 4 cm cabinet on 1 cm cells
    geom = CaseGeometry(
        cabinet_width=0.04,
        cabinet_height=0.04,
        food_width=0.02,
        food_height=0.01,
        shelf_width=0.03,
        shelf_thickness=0.005,
        inlet_height=0.01,
        outlet_height=0.01,
        shelf_x=0.005,
        shelf_y=0.0125,
        food_anchor=(0.01, 0.015),
    )
    return build_grid(geom, 8, 8)


def test_four_pixels_in_small_box(small_box):
    assert len(build_pixel_grid(small_box, 0.02)) == 4


def test_pixel_tiles_cells_exactly(small_box):
    sensors = build_pixel_grid(small_box, 0.02)
    cells = np.concatenate([s.cell_indices for s in sensors])
    assert sorted(cells) == list(range(small_box.n_cells))


def test_non_multiple_pixel_rejected(small_box):
    with pytest.raises(ValueError, match="integer multiple"):
        build_pixel_grid(small_box, 0.013)


def test_food_exclusion_drops_whole_pixels(fine_grid):
    full = build_pixel_grid(fine_grid, 0.02)
    excl = build_pixel_grid(fine_grid, 0.02, food_exclusion(fine_grid))
    food = set(fine_grid.domain.food)
    assert all(not food.intersection(s.cell_indices) for s in excl)
    assert len(full) - len(excl) == 8


def test_unit_norm_weights_on_four_cells():
    s = PixelSensor((0, 0, 0.02, 0.02), np.arange(4), np.full(4, 1e-4))
    assert np.allclose(s.weights("unit"), 0.5)
    assert np.allclose(s.weights("average"), 0.25)
    with pytest.raises(ValueError):
        s.weights("sum")


def test_measure_constant_field(small_box):
    sensors = build_pixel_grid(small_box, 0.02)
    T = np.full(small_box.n_cells, 10.0)
    avg = measure(assemble_observer(sensors, small_box.n_cells, "average"), T)
    assert np.allclose(avg, 10.0)
    # 2 cm pixel on 0.5 cm cells: 16 entries of 1/4
    unit = measure(assemble_observer(sensors, small_box.n_cells, "unit"), T)
    assert np.allclose(unit, 10.0 * 16 * 0.25)


def test_unit_gram_is_identity(fine_grid):
    W = assemble_observer(build_pixel_grid(fine_grid, 0.02), fine_grid.n_cells).dense()
    G = W.T @ W
    assert np.allclose(G, np.eye(W.shape[1]), atol=1e-12)


def test_average_gram_is_diagonal(fine_grid):
    W = assemble_observer(build_pixel_grid(fine_grid, 0.02), fine_grid.n_cells, "average").dense()
    G = W.T @ W
    assert np.max(np.abs(G - np.diag(np.diag(G)))) < 1e-14


def test_overlap_rejected(small_box):
    s = build_pixel_grid(small_box, 0.02)
    with pytest.raises(ValueError, match="overlap"):
        assemble_observer([s[0], s[0]], small_box.n_cells)
    with pytest.raises(ValueError):
        assemble_observer([], small_box.n_cells)


def test_dimension_mismatch(small_box):
    W = assemble_observer(build_pixel_grid(small_box, 0.02), small_box.n_cells)
    with pytest.raises(ValueError):
        measure(W, np.zeros(small_box.n_cells + 1))


def test_noise_seeded(small_box):
    W = assemble_observer(build_pixel_grid(small_box, 0.02), small_box.n_cells)
    T = np.linspace(0, 1, small_box.n_cells)
    assert np.array_equal(measure(W, T), measure(W, T))
    a = measure(W, T, noise_sd=0.1, seed=3)
    assert np.array_equal(a, measure(W, T, noise_sd=0.1, seed=3))
    assert not np.array_equal(a, measure(W, T))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_measure_linear(a, b, seed):
    g = build_grid(CaseGeometry(), 35, 40)
    W = assemble_observer(build_pixel_grid(g, 0.02), g.n_cells)
    rng = np.random.default_rng(seed)
    T1, T2 = rng.normal(size=g.n_cells), rng.normal(size=g.n_cells)
    lhs = measure(W, a * T1 + b * T2)
    rhs = a * measure(W, T1) + b * measure(W, T2)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)


def test_rect_roundtrip(fine_grid):
    for s in build_pixel_grid(fine_grid, 0.02)[:20]:
        again = sensor_from_rect(fine_grid, s.rect, s.lattice)
        assert np.array_equal(np.sort(again.cell_indices), np.sort(s.cell_indices))


def test_edge_pixels_clipped(fine_grid):
    sensors = build_pixel_grid(fine_grid, 0.02)
    right = [s for s in sensors if s.rect[2] == pytest.approx(0.35)]
    assert right and all(s.rect[2] - s.rect[0] == pytest.approx(0.01) for s in right)
    assert all(np.linalg.norm(s.weights("unit")) == pytest.approx(1.0) for s in right)
