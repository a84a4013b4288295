"""Round loop of the federated edge learning system.

Each round: broadcast the model, compute local gradients on every device,
ask the active policy for a scheduling distribution, sample one uploader,
charge its upload latency to the simulated clock, apply the unbiased scaled
update, and log. Only communication time is modeled; compute latency is not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import learning, scheduler
from .channel import (
    ChannelRealization,
    CommParams,
    DeviceProfile,
    expected_future_time,
    realization_from_gains,
)
from .learning import LearningTask, StepSchedule
from .scheduler import AllGradientsZero, BoundParams, SchedulingDistribution, StarvationError

POLICIES = ("uniform", "ia", "ca", "ica", "ctm")

# Stable sub-stream labels so adding a purpose never perturbs the others.
_STREAM_CHANNEL = 0
_STREAM_BATCH = 1
_STREAM_SELECT = 2


@dataclass
class RoundLog:
    """One row of the per-round record."""

    round: int
    policy: str
    device: int
    eta: float
    upload_s: float
    round_s: float
    cum_s: float
    loss: float
    gap: float
    grad_norms: list[float]
    rho: float | None = None
    lam: float | None = None
    bound: float | None = None


@dataclass
class RunResult:
    logs: list[RoundLog]
    converged: bool
    rounds: int
    total_time_s: float
    seed: int
    policy: str


def check_convergence(task: LearningTask, w: np.ndarray, epsilon: float) -> bool:
    """Epsilon-accuracy stopping rule: |L(w) - L(w*)| <= epsilon."""
    return abs(task.loss(w) - task.loss_star) <= epsilon


def _device_generator(seed: int, purpose: int, device_key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, device_key)))


class Simulation:
    """Mutable state of a single run; owns its RNG streams.

    Every (purpose, device) pair gets an independent stream derived from the
    master seed, so the channel sequence seen by a device does not depend on
    the policy under test or on the ordering of the device list. This enables
    paired policy comparisons and relabeling symmetry.
    """

    def __init__(
        self,
        task: LearningTask,
        devices: list[DeviceProfile],
        comm: CommParams,
        schedule: StepSchedule,
        policy: str,
        epsilon: float,
        seed: int,
        ica_beta: float = 0.01,
        batch_size: int | None = None,
        device_keys: list[int] | None = None,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        if len(devices) != task.num_devices:
            raise ValueError("device list and task device count disagree")
        self.task = task
        self.devices = devices
        self.comm = comm
        self.schedule = schedule
        self.policy = policy
        self.epsilon = epsilon
        self.seed = seed
        self.ica_beta = ica_beta
        self.batch_size = batch_size

        keys = device_keys if device_keys is not None else list(range(len(devices)))
        self._channel_rngs = [_device_generator(seed, _STREAM_CHANNEL, k) for k in keys]
        self._batch_rngs = [_device_generator(seed, _STREAM_BATCH, k) for k in keys]
        self._select_rngs = [_device_generator(seed, _STREAM_SELECT, k) for k in keys]

        self.sizes = np.array([d.dataset_size for d in devices])
        self.w = np.zeros(task.dim)
        self.t = 0
        self.clock = 0.0
        self.logs: list[RoundLog] = []
        self.g_proxy = 0.0
        self.stalled = False
        self.t_future = expected_future_time(devices, comm) if policy == "ctm" else None

    def _sample_channels(self) -> ChannelRealization:
        gains = np.array(
            [rng.exponential(d.channel_variance)
             for rng, d in zip(self._channel_rngs, self.devices)]
        )
        return realization_from_gains(gains, self.devices, self.comm)

    def _local_gradients(self) -> np.ndarray:
        grads = [
            learning.local_gradient(self.task, m, self.w, self.batch_size, self._batch_rngs[m])
            for m in range(len(self.devices))
        ]
        return np.stack(grads)

    def _distribution(
        self, grads: np.ndarray, channel: ChannelRealization
    ) -> tuple[SchedulingDistribution, dict]:
        norms = np.linalg.norm(grads, axis=1)
        if self.policy == "uniform":
            return scheduler.uniform_policy(len(self.devices)), {}
        if self.policy == "ia":
            return scheduler.importance_aware_policy(norms, self.sizes), {}
        if self.policy == "ca":
            return scheduler.channel_aware_policy(channel), {}
        if self.policy == "ica":
            return scheduler.ica_policy(norms, self.sizes, channel, self.ica_beta), {}
        bound = BoundParams(
            ell=self.task.ell, mu=self.task.mu, epsilon=self.epsilon,
            chi=self.schedule.chi, nu=self.schedule.nu, t=self.t,
        )
        dist, diag = scheduler.ctm_policy(
            norms, self.sizes, channel, self.comm, bound, self.t_future,
            return_diagnostics=True,
        )
        weights = self.sizes / self.sizes.sum()
        aggregate_norm = float(np.linalg.norm(weights @ grads))
        self.g_proxy = max(self.g_proxy, aggregate_norm)
        diag["bound"] = scheduler.remaining_rounds_bound(
            norms, self.sizes, dist.probs, bound, self.g_proxy, aggregate_norm
        )
        return dist, diag

    def run_round(self) -> RoundLog:
        """Execute one communication round and append its log."""
        t = self.t
        self.clock += self.comm.broadcast_time_s
        channel = self._sample_channels()
        grads = self._local_gradients()

        try:
            dist, diag = self._distribution(grads, channel)
        except (AllGradientsZero, StarvationError):
            self.stalled = True
            raise

        gumbels = np.array([rng.gumbel() for rng in self._select_rngs])
        m = scheduler.sample_device_gumbel(dist, gumbels)
        upload = float(channel.upload_s[m])
        self.clock += upload

        g_hat = learning.scaled_upload(
            grads[m], int(self.sizes[m]), int(self.sizes.sum()), float(dist.probs[m])
        )
        self.w = learning.apply_update(self.w, t, self.schedule, g_hat)
        self.t = t + 1

        loss = self.task.loss(self.w)
        log = RoundLog(
            round=t,
            policy=self.policy,
            device=m,
            eta=self.schedule.eta(t),
            upload_s=upload,
            round_s=self.comm.broadcast_time_s + upload,
            cum_s=self.clock,
            loss=loss,
            gap=loss - self.task.loss_star,
            grad_norms=[float(x) for x in np.linalg.norm(grads, axis=1)],
            rho=diag.get("rho"),
            lam=diag.get("lambda"),
            bound=diag.get("bound"),
        )
        self.logs.append(log)
        return log

    def run(self, max_rounds: int) -> RunResult:
        converged = check_convergence(self.task, self.w, self.epsilon)
        while not converged and self.t < max_rounds:
            try:
                self.run_round()
            except (AllGradientsZero, StarvationError):
                break
            converged = abs(self.logs[-1].gap) <= self.epsilon
        return RunResult(
            logs=self.logs,
            converged=converged or check_convergence(self.task, self.w, self.epsilon),
            rounds=self.t,
            total_time_s=self.clock,
            seed=self.seed,
            policy=self.policy,
        )


def run_experiment(
    task: LearningTask,
    devices: list[DeviceProfile],
    comm: CommParams,
    schedule: StepSchedule,
    policy: str,
    epsilon: float,
    max_rounds: int,
    seed: int,
    ica_beta: float = 0.01,
    batch_size: int | None = None,
    device_keys: list[int] | None = None,
) -> RunResult:
    """Run one (policy, seed) experiment; deterministic given its arguments."""
    sim = Simulation(
        task, devices, comm, schedule, policy, epsilon, seed,
        ica_beta=ica_beta, batch_size=batch_size, device_keys=device_keys,
    )
    return sim.run(max_rounds)
