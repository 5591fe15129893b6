"""Sparse measure-valued optimal control of the 1D heat equation.

Two space-time discretizations of the same predual problem are provided: a
variational Petrov-Galerkin scheme whose optimal controls are Dirac atoms on
the space-time grid, and a DG scheme with piecewise-constant-in-time controls.
Both are solved by a semismooth Newton method on the KKT system of the
box-constrained predual, and the controls are recovered from the converged
adjoint.
"""

from .assembly import (
    DiscreteSystem,
    assemble_dg_system,
    assemble_mass,
    assemble_stiffness,
    assemble_vd_system,
    lumped_weights,
)
from .grid import (
    ControlRegion,
    GridError,
    IndexSets,
    SpaceTimeGrid,
    build_grid,
    control_index_sets,
    equidistant_time_points,
)
from .newton import (
    KktResidual,
    NewtonError,
    PredualIterate,
    SolverConfig,
    alpha_max,
    generalized_jacobian,
    kkt_residual,
    newton_solve,
    objective,
)
from .oracle import (
    DesiredState,
    PointSource,
    fourier_heat_dirac,
    manufactured_adjoint,
    manufactured_desired_state,
    sample_desired_state,
)
from .recovery import (
    MeasureControl,
    RecoveryError,
    RunReport,
    SupportSets,
    build_report,
    measure_norm,
    recover_alpha_zero,
    recover_control,
    solve_state,
    support_from_adjoint,
    tracking_error,
    tracking_error_quadrature,
)

__version__ = "0.1.0"
