"""Numerical laboratory for critical mean-field equations on unit-area tori."""

__version__ = "0.1.0"

from .backend import backend_name
from .errors import LabError
from .surface import (
    GridPoint,
    ScalarField,
    TorusGrid,
    build_torus,
    dirichlet_energy,
    gauss_curvature,
    integrate,
    laplacian,
    load_field,
    make_field,
    save_field,
)
from .functional import (
    RHO_CRITICAL,
    FunctionalReport,
    TMReport,
    empirical_tm_constant,
    eval_functional,
    euler_lagrange_residual,
    grad_functional,
    jensen_gap,
    moser_trudinger_ratio,
    normalize_mean_zero,
    normalize_unit_mass,
    tm_sweep,
)
from .minimizer import (
    ContinuationResult,
    ContinuationStep,
    MinimizeOptions,
    MinimizeResult,
    continuation,
    default_schedule,
    minimize_subcritical,
    oscillation_monitor,
)
from .green import (
    GreenExpansion,
    extract_expansion,
    robin_constant_oracle,
    solve_green,
)
from .analysis import (
    BlowupDiagnostics,
    ConditionReport,
    EnergyFloorReport,
    blowup_energy_floor,
    bubble_profile,
    compare_to_bubble,
    concentration_masses,
    energy_inequality_check,
    existence_condition,
    zero_avoidance_report,
)
