"""Federated edge learning simulator with probabilistic device scheduling."""

from .channel import (
    ChannelRealization,
    CommParams,
    DeviceProfile,
    expected_future_time,
    path_loss_variance,
    q_factor,
    sample_channels,
    upload_time,
)
from .learning import (
    GradientSet,
    LogisticTask,
    QuadraticTask,
    StepSchedule,
    apply_update,
    local_gradient,
    make_logistic_task,
    make_quadratic_task,
    scaled_upload,
)
from .scheduler import (
    BoundParams,
    SchedulingDistribution,
    channel_aware_policy,
    ctm_policy,
    ica_policy,
    importance_aware_policy,
    p2_objective,
    remaining_rounds_bound,
    rho,
    sample_device,
    uniform_policy,
)
from .simulator import POLICIES, RoundLog, RunResult, Simulation, check_convergence, run_experiment

__all__ = [
    "ChannelRealization", "CommParams", "DeviceProfile", "expected_future_time",
    "path_loss_variance", "q_factor", "sample_channels", "upload_time",
    "GradientSet", "LogisticTask", "QuadraticTask", "StepSchedule",
    "apply_update", "local_gradient", "make_logistic_task", "make_quadratic_task",
    "scaled_upload",
    "BoundParams", "SchedulingDistribution", "channel_aware_policy", "ctm_policy",
    "ica_policy", "importance_aware_policy", "p2_objective",
    "remaining_rounds_bound", "rho", "sample_device", "uniform_policy",
    "POLICIES", "RoundLog", "RunResult", "Simulation", "check_convergence",
    "run_experiment",
]
