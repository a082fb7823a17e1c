"""Optimal consumption and investment with proportional transaction costs.

Reduces the problem to a first-order free-boundary ODE, classifies the
parameter regime, solves for the no-transaction wedge, rebuilds the value
function and checks it by Monte Carlo.
"""

from ._backend import NAME as BACKEND
from .boundary import (
    Regime,
    WedgeSolution,
    closed_form_lambda_under,
    lambda_at_singular,
    lambda_of,
    sigma_of,
    solve_boundaries,
    thresholds,
)
from .errors import (
    BoundaryCase,
    ConfigInvalid,
    DegenerateStart,
    HitZero,
    IllPosedAlways,
    IllPosedCurve,
    IllPosedForThisXi,
    Insolvent,
    InvalidParams,
    MertonIllPosed,
    NotSingularCase,
    OrderingUnsupported,
    RootsNotReal,
    SingularDenominator,
    StepFailure,
    WedgeError,
)
from .ode import (
    DEFAULT_OPTIONS,
    SingularExpansion,
    SolutionCurve,
    ToleranceOptions,
    continue_through_singularity,
    integrate_curve,
    ode_rhs,
    start_expansion,
    zeta,
)
from .params import (
    Boundary,
    Case,
    DimensionlessParams,
    MarketParams,
    QuadraticGeometry,
    WellPosedness,
    classify,
    classify_by_range,
    dimensionless,
    geometry,
    reduce_params,
    wellposedness,
)
from .policy import (
    Action,
    PolicySpec,
    ValuePoint,
    build_policy,
    discount,
    merton_reference,
    merton_value,
    value_at,
)
from .simulate import SimConfig, SimResult, compare, dt_study, simulate_policy
from .statics import SweepResult, check_bounds, monotone, sweep_drift, sweep_xi

__version__ = "0.1.0"
