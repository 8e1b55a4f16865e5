"""Sequential action control for smooth and hybrid impulsive systems.

Set ``SEQACTION_NUMBA=0`` before import to run the pure-numpy kernels.
"""
from ._jit import NUMBA_ENABLED
from .dynamics import (
    HybridModel,
    SystemModel,
    Transition,
    apply_reset,
    eval_drift,
    eval_dynamics,
    eval_guard,
    eval_guard_gradient,
    eval_input_map,
    eval_linearization,
    variational_reset,
)
from .errors import (
    ActionRejected,
    AmbiguousTransitionError,
    ConfigError,
    DivergenceError,
    GrazingError,
    NumericError,
    SacError,
    UsageError,
    ZenoError,
)
from .hybrid_sac import (
    HybridAdjointTrajectory,
    MayerAugmentedModel,
    VariationalTrajectory,
    augment_mayer,
    hybrid_sac_step,
    hybrid_sensitivity,
    propagate_variation,
    simulate_hybrid_adjoint,
    terminal_sensitivity,
    transition_time_derivative,
)
from .integrator import (
    HybridTrajectory,
    PiecewiseControl,
    Trajectory,
    detect_crossing,
    integrate_hybrid,
    integrate_smooth,
    sample_state,
)
from .objectives import (
    Cost,
    QuadraticTrackingCost,
    StateTarget,
    StateWeight,
    barrier_weight,
    control_energy,
    eval_comparison_metric,
    eval_cost,
    incremental_gradient,
    terminal_gradient,
)
from .sac_core import (
    Action,
    ActionSchedule,
    AdjointTrajectory,
    ClosedLoopResult,
    SacController,
    SacParams,
    StepInfo,
    choose_alpha_d,
    equilibrium_feedback_gain,
    line_search_duration,
    mode_insertion_gradient,
    optimal_action_schedule,
    run_closed_loop,
    sac_step,
    saturate_action,
    search_application_time,
    simulate_adjoint,
)

__version__ = "0.1.0"
