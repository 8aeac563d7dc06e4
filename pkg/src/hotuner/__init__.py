"""High-order tuner optimization library.

Implements a two-state, gradient-normalizing momentum tuner that stays stable
under time-varying regressors, alongside normalized gradient descent and
Nesterov's method as baselines, a continuous-time variant with an RK4
integrator, Lyapunov-based stability diagnostics, and an experiment harness
with reference presets.
"""

from ._backend import backend_name, compiled_available, load_backend
from .analysis import (
    EnvelopeReport,
    LyapunovSample,
    StabilityReport,
    Violation,
    check_lyapunov_decrease,
    classify_stability,
    exponential_envelope_check,
    finite_diff_gradient_check,
    iterations_to_epsilon,
    lyapunov_value,
    max_gamma,
    resolve_optimum,
    solve_optimum,
    validate_hyperparams,
)
from .harness import (
    ExperimentConfig,
    Trace,
    export_trace,
    preset,
    preset_variants,
    reproduce_figure,
    run_experiment,
    summarize_run,
)
from .losses import (
    LinearSample,
    LogSumExpLoss,
    LogSumExpSample,
    LossEvaluation,
    QuadraticRegressionLoss,
    RegularizedLoss,
    evaluate,
    performance_error,
    strong_convexity_constant,
)
from .plotting import emit_plot
from .schedules import (
    ConstantSchedule,
    CustomListSchedule,
    SinusoidalSchedule,
    StepChangeSchedule,
    sample_at,
)
from .tuners import (
    HyperParams,
    NesterovState,
    StepRecord,
    TunerState,
    ht_continuous_rhs,
    ht_step,
    integrate_continuous,
    nesterov_gains,
    nesterov_step,
    normalized_gd_step,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    "compiled_available",
    "load_backend",
    # losses
    "LinearSample",
    "LogSumExpSample",
    "LossEvaluation",
    "QuadraticRegressionLoss",
    "LogSumExpLoss",
    "RegularizedLoss",
    "evaluate",
    "performance_error",
    "strong_convexity_constant",
    # schedules
    "ConstantSchedule",
    "StepChangeSchedule",
    "SinusoidalSchedule",
    "CustomListSchedule",
    "sample_at",
    # tuners
    "HyperParams",
    "TunerState",
    "NesterovState",
    "StepRecord",
    "ht_step",
    "normalized_gd_step",
    "nesterov_step",
    "nesterov_gains",
    "ht_continuous_rhs",
    "integrate_continuous",
    # analysis
    "LyapunovSample",
    "Violation",
    "EnvelopeReport",
    "StabilityReport",
    "lyapunov_value",
    "max_gamma",
    "validate_hyperparams",
    "check_lyapunov_decrease",
    "exponential_envelope_check",
    "finite_diff_gradient_check",
    "iterations_to_epsilon",
    "solve_optimum",
    "resolve_optimum",
    "classify_stability",
    # harness
    "ExperimentConfig",
    "Trace",
    "run_experiment",
    "export_trace",
    "preset",
    "preset_variants",
    "reproduce_figure",
    "summarize_run",
    "emit_plot",
]
