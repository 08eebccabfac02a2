import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frostrom.materials import (
    SALMON_BREAKPOINTS,
    SALMON_CONDUCTIVITY,
    SALMON_HEAT_CAPACITY,
    AirProperties,
    MaterialModel,
    PiecewiseCubicProperty,
    eval_property,
    liquid_fraction,
)
from frostrom.mesh import FLUID, FOOD, SHELF


def test_heat_capacity_at_10():
    assert math.isclose(eval_property(SALMON_HEAT_CAPACITY, 10.0), 3.0882e6, rel_tol=1e-12)


def test_heat_capacity_at_minus_10():
    assert math.isclose(eval_property(SALMON_HEAT_CAPACITY, -10.0), 5.279e6, rel_tol=1e-12)


def test_conductivity_at_minus_10():
    assert math.isclose(eval_property(SALMON_CONDUCTIVITY, -10.0), 1.13021, rel_tol=1e-12)


def test_conductivity_at_zero_uses_left_row():
    assert eval_property(SALMON_CONDUCTIVITY, 0.0) == pytest.approx(0.5202, abs=1e-15)


@pytest.mark.parametrize("bp,row", [(-5.0, 0), (-3.5, 1), (0.0, 2), (25.0, 3)])
def test_breakpoints_are_right_closed(bp, row):
    a = SALMON_HEAT_CAPACITY.coefficients[row]
    expect = a[0] + a[1] * bp + a[2] * bp**2 + a[3] * bp**3
    assert SALMON_HEAT_CAPACITY(bp) == pytest.approx(expect, rel=1e-14)


def test_left_end_belongs_to_first_row():
    a = SALMON_HEAT_CAPACITY.coefficients[0]
    assert SALMON_HEAT_CAPACITY(-25.0) == pytest.approx(a[0] - 25 * a[1] + 625 * a[2] - 15625 * a[3])


def test_clamping_counts():
    prop = PiecewiseCubicProperty.from_dict(SALMON_HEAT_CAPACITY.to_dict())
    assert prop(30.0) == prop(25.0)
    assert prop(-40.0) == prop(-25.0)
    assert prop.clamp_count == 2


def test_nan_rejected():
    with pytest.raises(ValueError):
        SALMON_CONDUCTIVITY(float("nan"))


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        PiecewiseCubicProperty((0.0, -1.0), ((1, 0, 0, 0),))
    with pytest.raises(ValueError):
        PiecewiseCubicProperty((0.0, 1.0, 2.0), ((1, 0, 0, 0),))


def test_json_roundtrip(tmp_path):
    p = tmp_path / "lam.json"
    import json

    p.write_text(json.dumps(SALMON_CONDUCTIVITY.to_dict()))
    again = PiecewiseCubicProperty.from_json(p)
    T = np.linspace(-25, 25, 101)
    assert np.array_equal(again(T), SALMON_CONDUCTIVITY(T))


def test_conductivity_jump_at_minus_five_is_kept():
    left = SALMON_CONDUCTIVITY(-5.0)
    right = SALMON_CONDUCTIVITY(np.nextafter(-5.0, 0.0))
    assert abs(right - left) / left > 0.01


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.floats(0.05, 0.95))
def test_derivative_matches_finite_difference(row, frac):
    lo, hi = SALMON_BREAKPOINTS[row], SALMON_BREAKPOINTS[row + 1]
    T = lo + frac * (hi - lo)
    for prop in (SALMON_HEAT_CAPACITY, SALMON_CONDUCTIVITY):
        h = 1e-5
        fd = (prop(T + h) - prop(T - h)) / (2 * h)
        d = prop.derivative(T)
        assert fd == pytest.approx(d, rel=1e-8, abs=1e-8 * abs(prop(T)))


@pytest.mark.parametrize("T,f", [(-25.0, 0.0), (20.0, 1.0), (-2.5, 0.5)])
def test_liquid_fraction_examples(T, f):
    assert liquid_fraction(T) == pytest.approx(f)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=40), st.sampled_from(["linear", "enthalpy"]))
def test_liquid_fraction_monotone(temps, mode):
    T = np.sort(np.array(temps))
    f = liquid_fraction(T, mode)
    assert np.all(np.diff(f) >= -1e-15)
    assert np.all((f >= 0) & (f <= 1))


def test_enthalpy_fraction_ends():
    assert liquid_fraction(-5.0, "enthalpy") == 0.0
    assert liquid_fraction(0.0, "enthalpy") == pytest.approx(1.0)


def test_unknown_fraction_mode():
    with pytest.raises(ValueError):
        liquid_fraction(0.0, "cubic")


def test_cell_dispatch():
    m = MaterialModel()
    assert m.volumetric_heat_capacity(10.0, FOOD) == pytest.approx(3.0882e6)
    assert m.volumetric_heat_capacity(-7.0, FLUID) == pytest.approx(1.292 * 1006)
    assert m.cell_conductivity(3.0, SHELF) == 1.0
    assert m.cell_conductivity(3.0, FLUID) == pytest.approx(0.0243 * 11)


def test_air_validation():
    with pytest.raises(ValueError):
        AirProperties(rho=0.0)


def test_food_enthalpy_is_antiderivative():
    m = MaterialModel()
    T = np.array([-20.0, -4.2, -1.0, 5.0])
    h = 1e-3
    slope = (m.food_enthalpy(T + h) - m.food_enthalpy(T - h)) / (2 * h)
    cap = np.maximum(SALMON_HEAT_CAPACITY(T), m.capacity_floor)
    assert np.allclose(slope, cap, rtol=1e-3)
