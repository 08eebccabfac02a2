import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frostrom.materials import MaterialModel, liquid_fraction
from frostrom.mesh import FLUID
from frostrom.solver import (
    BDF1,
    BDF2,
    PARAMETER_RANGES,
    ForwardModel,
    ParameterSample,
    PicardError,
    SolverSettings,
    VelocityField,
    advance_step,
    bdf2opt_coefficients,
    build_velocity_field,
    lax_friedrichs_face_flux,
    run_case,
    sample_parameters,
    startup_coefficients,
    weno3_face_value,
)
from frostrom.verification import (
    INSULATED,
    conservation_drift,
    manufactured_temporal_study,
    unit_box_grid,
    weno_face_study,
)

MEAN_CASE = ParameterSample(0.2, -22.0, 22.0, 0.8)


# time coefficients

def test_bdf_endpoints():
    assert np.allclose(bdf2opt_coefficients(1.0).as_array(), [1.5, -2.0, 0.5, 0.0])
    assert np.allclose(bdf2opt_coefficients(0.0).as_array(), [11 / 6, -3.0, 1.5, -1 / 3])


def test_bdf2opt_default():
    assert np.allclose(bdf2opt_coefficients(0.52).as_array(), [1.66, -2.48, 0.98, -0.16], atol=1e-14)


@settings(max_examples=50)
@given(st.floats(0.0, 1.0))
def test_bdf_identities(chi):
    c = bdf2opt_coefficients(chi).as_array()
    assert abs(c.sum()) < 1e-14
    assert abs(-c[1] - 2 * c[2] - 3 * c[3] - 1.0) < 1e-14


@pytest.mark.parametrize("chi", [-0.1, 1.5])
def test_chi_out_of_range(chi):
    with pytest.raises(ValueError):
        bdf2opt_coefficients(chi)


def test_cold_start_sequence():
    assert startup_coefficients(0) == BDF1
    assert startup_coefficients(1) == BDF1
    assert startup_coefficients(2) == BDF2
    assert startup_coefficients(3) == bdf2opt_coefficients(0.52)


# face reconstruction and flux

def test_weno_linear_data():
    assert weno3_face_value(1.0, 2.0, 3.0) == pytest.approx(2.5, abs=1e-14)


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_weno_reproduces_constants(c):
    assert weno3_face_value(c, c, c) == c


def test_weno_discontinuity():
    assert weno3_face_value(1.0, 1.0, 10.0) == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=50)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 1.0))
def test_weno_exact_for_symmetric_quadratic(a, c, h):
    # cell averages of a(x - x_i)^2 + c centred on cell i; face value at x_i + h/2
    avg_centre = c + a * h**2 / 12
    avg_side = c + a * (h**2 + h**2 / 12)
    face = weno3_face_value(avg_side, avg_centre, avg_side)
    assert face == pytest.approx(c + a * h**2 / 4, abs=1e-12 * (1 + abs(a) + abs(c)))


def test_lax_friedrichs_cases():
    assert lax_friedrichs_face_flux(2.0, 2.0, 0.3, 0.5) == pytest.approx(0.6)
    assert lax_friedrichs_face_flux(2.0, 7.0, 0.4, 0.4) == pytest.approx(0.8)
    assert lax_friedrichs_face_flux(2.0, 7.0, 0.0, 0.4) == pytest.approx(-1.0)


def test_weno_face_convergence():
    assert weno_face_study().slope >= 2.5


# velocity surrogate

def test_zero_inlet_velocity(coarse_grid):
    vel = build_velocity_field(coarse_grid, 0.0)
    assert vel.max_speed == 0.0


@pytest.mark.parametrize("u_in", [0.15, 0.2, 0.25])
def test_velocity_divergence_and_fluxes(fine_grid, u_in):
    g = fine_grid
    vel = build_velocity_field(g, u_in)
    div = vel.divergence()
    assert np.max(np.abs(div[g.mask == FLUID])) < 1e-12
    inlet = g.domain.boundary["inlet"].cells // g.nx
    outlet = g.domain.boundary["outlet"].cells // g.nx
    q_in = np.sum(vel.u[inlet, 0]) * g.dy
    q_out = -np.sum(vel.u[outlet, 0]) * g.dy
    assert q_in == pytest.approx(u_in * g.geometry.inlet_height, rel=1e-12)
    assert q_out == pytest.approx(q_in, rel=1e-12)


def test_velocity_vanishes_in_solids_and_walls(fine_grid):
    g = fine_grid
    vel = build_velocity_field(g, 0.2)
    solid = (g.mask != FLUID).reshape(g.ny, g.nx)
    # faces touching a solid cell
    assert np.all(vel.u[:, :-1][solid] == 0) and np.all(vel.u[:, 1:][solid] == 0)
    assert np.all(vel.v[:-1, :][solid] == 0) and np.all(vel.v[1:, :][solid] == 0)
    rear = g.domain.boundary["rear"].cells // g.nx
    assert np.allclose(vel.u[rear, 0], 0.0, atol=1e-14)
    assert np.allclose(vel.u[:, -1], 0.0, atol=1e-14)
    assert np.allclose(vel.v[0, :], 0.0, atol=1e-14) and np.allclose(vel.v[-1, :], 0.0, atol=1e-14)


# implicit steps

def test_insulated_uniform_state_is_steady(coarse_grid):
    T = np.full(coarse_grid.n_cells, 4.0)
    vel = VelocityField.zero(coarse_grid)
    T1 = advance_step(coarse_grid, [T, T, T], vel, INSULATED, 5.0, bdf2opt_coefficients())
    assert np.array_equal(T1, T)


def test_one_step_maximum_principle(coarse_grid):
    T0 = 5.0
    params = ParameterSample(0.25, -20.0, T0, 0.0)
    vel = build_velocity_field(coarse_grid, params.u_in)
    T = np.full(coarse_grid.n_cells, T0)
    T1 = advance_step(coarse_grid, [T], vel, params, 10.0, BDF1)
    assert T1.min() >= params.t_cold - 0.005 * (T0 - params.t_cold)
    assert T1.max() <= T0 + 1e-9


def test_manufactured_solution_second_order():
    study = manufactured_temporal_study()
    assert np.all((study.orders >= 1.8) & (study.orders <= 2.6))


def test_conservation_insulated():
    assert conservation_drift(steps=100) < 1e-5


def test_history_length_checked(coarse_grid):
    T = np.zeros(coarse_grid.n_cells)
    with pytest.raises(ValueError, match="history"):
        advance_step(coarse_grid, [T], VelocityField.zero(coarse_grid), INSULATED, 1.0, bdf2opt_coefficients())


def test_nan_history_rejected(coarse_grid):
    T = np.zeros(coarse_grid.n_cells)
    T[3] = np.nan
    with pytest.raises(FloatingPointError):
        advance_step(coarse_grid, [T], VelocityField.zero(coarse_grid), INSULATED, 1.0, BDF1)


def test_picard_failure_carries_residuals(coarse_grid):
    T = np.full(coarse_grid.n_cells, -3.0)
    model = ForwardModel(
        coarse_grid,
        build_velocity_field(coarse_grid, 0.2),
        MaterialModel(),
        SolverSettings(max_picard=1),
    )
    with pytest.raises(PicardError) as info:
        model.step([T], MEAN_CASE, 30.0, BDF1)
    assert len(info.value.residuals) == 1


def test_pointwise_capacity_mode_agrees_for_constant_properties():
    g = unit_box_grid(20)
    rng = np.random.default_rng(0)
    T = rng.random(g.n_cells)
    out = []
    for mode in ("enthalpy", "pointwise"):
        model = ForwardModel(g, VelocityField.zero(g), MaterialModel(uniform=(3.0, 2.0)), SolverSettings(capacity_mode=mode))
        out.append(model.step([T], INSULATED, 0.01, BDF1))
    assert np.allclose(out[0], out[1], atol=1e-12)


# whole runs

def test_zero_duration_run(coarse_grid):
    snaps = run_case(coarse_grid, MEAN_CASE, 10.0, 0.0)
    assert len(snaps) == 1
    assert np.all(snaps[0].temperature == MEAN_CASE.t_ext)


@pytest.fixture(scope="module")
def mean_run(coarse_grid):
    return run_case(coarse_grid, MEAN_CASE, 10.0, 5400.0, snapshot_stride=30)


def test_food_cools_monotonically(coarse_grid, mean_run):
    food = coarse_grid.domain.food
    means = np.array([s.temperature[food].mean() for s in mean_run])
    assert np.all(np.diff(means) <= 1e-9)
    assert means[-1] < 0.0


def test_liquid_fraction_falls_from_one(coarse_grid, mean_run):
    food = coarse_grid.domain.food
    fpc = np.array([liquid_fraction(s.temperature[food]).mean() for s in mean_run])
    assert fpc[0] == 1.0
    assert np.all(np.diff(fpc) <= 1e-12)
    assert fpc[-1] < 0.95


def test_snapshot_times_and_stride(mean_run):
    times = [s.time for s in mean_run]
    assert times[0] == 0.0
    assert np.allclose(np.diff(times), 300.0)
    assert all(np.all(np.isfinite(s.temperature)) for s in mean_run)


# parameter sampling

def test_single_sample_in_range():
    (p,) = sample_parameters(1, seed=7)
    assert p.in_range()


def test_sampling_deterministic():
    assert sample_parameters(5, 11) == sample_parameters(5, 11)
    assert sample_parameters(5, 11) != sample_parameters(5, 12)


def test_sampling_mean_u_in():
    draws = sample_parameters(64, seed=2024)
    assert abs(np.mean([p.u_in for p in draws]) - 0.2) <= 0.01
    for name, (lo, hi) in PARAMETER_RANGES.items():
        vals = [getattr(p, name) for p in draws]
        assert lo <= min(vals) and max(vals) <= hi


def test_sampling_count_checked():
    with pytest.raises(ValueError):
        sample_parameters(0, 1)
