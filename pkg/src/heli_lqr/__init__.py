"""LQR trajectory-tracking control of the Yamaha R-50 small helicopter linear model."""

from .control import BoundedController, ControlLimits, bounded_control, clamp_channel, unbounded_control
from .errors import (
    ConvergenceError,
    DimensionError,
    HeliLqrError,
    InputError,
    IntegrationError,
    MissingFieldError,
    NumericalError,
    StabilizabilityError,
    ValidationError,
)
from .lqr import (
    CareSolution,
    FiniteHorizonSolution,
    RiccatiConfig,
    care_residual,
    feedback_gain,
    riccati_rhs,
    solve_care,
    solve_finite_horizon,
)
from .metrics import TrackingReport, compare_cases, mse, tracking_report
from .model import (
    ControlInput,
    R50Params,
    RigidBodyState,
    StateSpaceModel,
    build_model,
    default_params,
    gearing_ratios,
    load_params,
)
from .sim import (
    ReferenceTrajectory,
    SimConfig,
    SimOutput,
    body_to_local_horizon,
    dcm_body_from_inertial,
    make_rect_circle,
    make_rectangle,
    rk4_step,
    run_closed_loop,
)
from .tracking import AugmentedModel, TrackingWeights, augment, compose, split

__version__ = "0.1.0"
