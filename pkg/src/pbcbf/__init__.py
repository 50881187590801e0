"""Prediction-based control barrier function safety filtering.

Augments a user-supplied barrier function with a numerically predicted
stopping margin so that a quadratic-program safety filter stays feasible
under hard input bounds, and ships a scenario harness with built-in models
(planar double integrator, cruise control, longitudinal aircraft) to exercise
the scheme end to end.
"""

from . import errors
from .barrier import (
    Barrier,
    ClassKappa,
    HddotQuadraticForm,
    LinearKappa,
    check_opposed_pair,
    h_ddot_form,
    h_dot,
    select_active,
)
from .ode import Trace, propagate_until, rk4_step
from .predictor import (
    BangBangPolicy,
    CustomPolicy,
    NormBallGradientPolicy,
    PredictionPolicy,
    PredictionResult,
    QpMaximalPolicy,
    bang_bang_u0,
    compute_delta_h,
    normball_u0,
    qp_maximal_u0,
)
from .qpfilter import (
    MODE_BASE,
    MODE_NONE,
    MODE_PB,
    FilterConfig,
    FilterDiagnostics,
    QpProblem,
    filter_step,
    solve_small_qp,
)
from .systems import (
    AffineSystem,
    AircraftParams,
    Box,
    NormBall,
    acc_system,
    aircraft_longitudinal,
    double_integrator_polar,
    linearize,
    trim_solve,
)
from .harness import (
    Metrics,
    Scenario,
    SliceGrid,
    load_scenario,
    run_scenario,
    safe_set_slice,
    write_metrics_json,
    write_trace_csv,
)

__version__ = "0.1.0"
