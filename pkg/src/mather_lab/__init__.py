"""Numerical laboratory for periodic minimizers of variational problems on tori."""

from .slope_lattice import (
    PeriodLattice,
    RationalSlope,
    RationalSubspace,
    decompose_slope,
    format_slope,
    fundamental_domain,
    gamma_group,
    gram_projection,
    irrationality_index,
    parse_slope,
    projection_M,
    rat_space,
)
from .lagrangian import (
    HypothesisViolation,
    LagrangianModel,
    Potential,
    check_hypotheses,
    perturb,
    preset_potential,
)
from .fields import Field, Grid, grid_for, load_field, save_field
from .periodic_minimizer import (
    birkhoff_check,
    default_starts,
    discrete_action,
    distinct_minimizers,
    euler_lagrange_residual,
    minimize,
)
from .mather_functions import (
    BetaConfig,
    BoundaryArgmaxWarning,
    beta,
    beta_table,
    double_conjugate,
    flats,
    legendre,
    mode_locking_measure,
    senn_check,
)
from .currents import (
    boundary_check,
    current_distance,
    measure_of_field,
    slope_of_current,
    translation_check,
)

__version__ = "0.1.0"
