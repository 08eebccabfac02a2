"""Reduced-order reconstruction of food-freezing temperature fields from pixel sensors."""
from .estimation import (
    apriori_bound_curve,
    cross_gramian,
    reconstruct,
    relative_l2_error,
    select_rom_dimension,
    solve_normal_equations,
)
from .materials import MaterialModel, liquid_fraction
from .mesh import CaseGeometry, StructuredGrid, build_grid
from .observation import assemble_observer, build_pixel_grid, measure
from .placement import SensorPool, greedy_place, regular_placement
from .rom import PODBasis, SnapshotMatrix, assemble_snapshots, compute_pod, tail_energy
from .solver import ParameterSample, SolverSettings, advance_step, build_velocity_field, run_case, sample_parameters

__version__ = "0.1.0"
