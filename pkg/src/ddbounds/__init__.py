"""Stationary drift-diffusion with electrons, holes and mobile ions.

Finite-volume discretisation with an excess-chemical-potential flux,
damped Newton with continuation, explicit L-infinity bounds and the
perovskite-cell and laser-beam-induced-current experiments.
"""
from .statistics import Blakemore, Boltzmann, FermiDiracHalf, make_statistics
from .model import (
    Contact,
    DeviceScenario,
    RecombinationModel,
    SpeciesConfig,
    validate_assumptions,
)
from .mesh import FvMesh, build_interval_mesh, build_rect_mesh, lbic_fixture_mesh
from .fvm import DiscreteSystem, StateVector, solve_constrained_poisson
from .newton import NewtonConfig, continuation_solve, newton_solve
from .bounds import (
    BoundInputs,
    density_upper_bound,
    linf_norms,
    stampacchia_root,
    verify_solution_bounds,
)
from .scenarios import (
    contact_current,
    current_report,
    lbic_scan,
    lbic_scenario,
    parameter_sweep,
    psc_scenario,
    solve_scenario,
)

__version__ = "0.1.0"
