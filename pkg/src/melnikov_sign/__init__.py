"""Melnikov-type analysis of x'' + alpha*sign(x) = eta*x + eps*f(t, x, x').

The public surface is re-exported here; see the submodules for details.
"""
__version__ = "0.1.0"

from ._jit import BACKEND
from .closed_form import (
    Involution,
    apply_involution,
    exp_At,
    gamma_minus,
    gamma_plus,
    kernel_U,
    kernel_U_inner,
    tau0,
    u_vector,
    v_of,
)
from .errors import *  # noqa: F401,F403
from .melnikov import (
    MelnikovResult,
    MelnikovZero,
    melnikov,
    melnikov_derivative,
    melnikov_grid,
    melnikov_values,
    predicted_initial_condition,
    sin_oracle,
)
from .model import (
    AnnulusInfo,
    Case,
    CaseClass,
    Parameters,
    PhasePoint,
    SectionPoint,
    annulus_info,
    classify,
    sigma_admissible,
)
from .numerics import DEFAULT_TOL, ToleranceConfig, adaptive_quad, brent, loglog_slope, newton2
from .perturbation import PerturbationExpr, check_periodicity, diff_t, evaluate, parse
from .simulator import (
    Branch,
    CrossingEvent,
    DisplacementValue,
    ExtendedPoint,
    Flow,
    PeriodicOrbit,
    Region,
    TimeLimit,
    TrajectorySegment,
    continuation,
    delta3_tilde,
    displacement,
    find_periodic_orbit,
    flow_concat,
    integrate_piece,
)
