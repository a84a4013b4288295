"""Device scheduling policies.

Implements the communication-time-minimizing (CTM) probabilistic policy in
closed form (with a bisection search for the Lagrange multiplier of the
simplex constraint) alongside four baselines: uniform, importance-aware (IA),
channel-aware (CA) and joint importance-and-channel-aware (ICA).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, CommParams


class AllGradientsZero(RuntimeError):
    """All device gradients vanished; the model has converged."""


class StarvationError(RuntimeError):
    """No device is eligible for scheduling this round."""


class BisectionError(RuntimeError):
    """The multiplier search failed to bracket or converge."""


_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SchedulingDistribution:
    """Probability vector over devices produced by a policy."""

    probs: np.ndarray
    policy: str

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.shape[0] < 1:
            raise ValueError("probs must be a nonempty 1-D vector")
        if np.any(p < 0):
            raise ValueError(f"negative scheduling probability in {p}")
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
        object.__setattr__(self, "probs", p)

    @property
    def num_devices(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class BoundParams:
    """Constants of the convergence analysis used by CTM and the diagnostics."""

    ell: float
    mu: float
    epsilon: float
    chi: float
    nu: float
    t: int
    g_proxy: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.t < 0:
            raise ValueError(f"round index must be >= 0, got {self.t}")
        if 2.0 * self.mu * self.chi <= 1.0:
            raise ValueError(
                f"stepsize constant violates 2*mu*chi > 1 (mu={self.mu}, chi={self.chi})"
            )

    @property
    def eta(self) -> float:
        return self.chi / (self.t + self.nu)

    @property
    def a_t(self) -> float:
        """Round-dependent factor ell*(t+1+nu)/(2*epsilon) of the objective."""
        return self.ell * (self.t + 1 + self.nu) / (2.0 * self.epsilon)


def importance_weights(norms: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Size-weighted gradient norms a_m = (n_m/n) * ||g_m||."""
    sizes = np.asarray(sizes, dtype=float)
    return (sizes / sizes.sum()) * np.asarray(norms, dtype=float)


def uniform_policy(num_devices: int) -> SchedulingDistribution:
    if num_devices < 1:
        raise ValueError(f"need at least one device, got {num_devices}")
    return SchedulingDistribution(np.full(num_devices, 1.0 / num_devices), "uniform")


def importance_aware_policy(norms: np.ndarray, sizes: np.ndarray) -> SchedulingDistribution:
    """p_m proportional to n_m * ||g_m||."""
    scores = np.asarray(sizes, dtype=float) * np.asarray(norms, dtype=float)
    total = scores.sum()
    if total <= 0:
        raise AllGradientsZero("all importance scores are zero")
    return SchedulingDistribution(scores / total, "ia")


def channel_aware_policy(channel: ChannelRealization) -> SchedulingDistribution:
    """Probability one on the strongest channel; ties go to the lowest index."""
    probs = np.zeros(channel.num_devices)
    probs[int(np.argmax(channel.rate_bps_per_hz))] = 1.0
    return SchedulingDistribution(probs, "ca")


def ica_policy(
    norms: np.ndarray,
    sizes: np.ndarray,
    channel: ChannelRealization,
    beta: float,
) -> SchedulingDistribution:
    """Deterministic argmax of (n_m/n)*||g_m|| - beta * T_{U,m}.

    ``beta`` trades gradient importance against per-round latency and has to
    be tuned offline.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    scores = importance_weights(norms, sizes) - beta * channel.upload_s
    probs = np.zeros(len(scores))
    probs[int(np.argmax(scores))] = 1.0
    return SchedulingDistribution(probs, "ica")


def rho(t: int, bound: BoundParams, t_future: float) -> float:
    """Trade-off scalar of the CTM closed form.

    sqrt( ell*(t+1+nu)*chi^2 / (2*(t+nu)^2*epsilon) * T_future ), where
    T_future is the expected upload time of a future round.
    """
    num = bound.ell * (t + 1 + bound.nu) * bound.chi**2
    den = 2.0 * (t + bound.nu) ** 2 * bound.epsilon
    return math.sqrt(num / den * t_future)


def _normalization_sum(shift: float, rho_a: np.ndarray, b_shifted: np.ndarray) -> float:
    """F(lambda) = sum rho*a_m / sqrt(b_m + lambda) in shifted coordinates.

    ``shift`` is lambda + min(b); ``b_shifted`` is b - min(b), so the smallest
    entry is exactly zero and no cancellation occurs near the left edge.
    """
    return float(np.sum(rho_a / np.sqrt(b_shifted + shift)))


def _solve_multiplier(rho_a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Find lambda* with sum_m p_m(lambda) = 1; returns (lambda*, p)."""
    b_min = float(b.min())
    b_shifted = b - b_min

    # F is strictly decreasing with F -> inf at the left edge and -> 0 at inf,
    # so a root exists and is unique. Start the left end small enough that
    # F(lo) > 1 regardless of how tiny the gradient weights are.
    j = int(np.argmin(b))
    lo = min(1e-12, 0.25 * (rho_a[j]) ** 2)
    if lo <= 0:
        raise BisectionError("device at the latency minimum has zero weight")
    hi = max(1.0, float(rho_a.sum()) ** 2)
    for _ in range(200):
        if _normalization_sum(hi, rho_a, b_shifted) < 1.0:
            break
        hi *= 2.0
    else:
        raise BisectionError("no upper bracket after 200 doublings")
    if _normalization_sum(lo, rho_a, b_shifted) <= 1.0:
        raise BisectionError("left edge of bracket does not exceed 1")

    # The root can sit many orders of magnitude below the initial bracket
    # (vanishing rho), so terminate on precision relative to hi, not on an
    # absolute interval width.
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        f = _normalization_sum(mid, rho_a, b_shifted)
        if abs(f - 1.0) <= 1e-13:
            lo = hi = mid
            break
        if f > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    shift = 0.5 * (lo + hi)
    p = rho_a / np.sqrt(b_shifted + shift)
    if abs(p.sum() - 1.0) > _SUM_TOL:
        raise BisectionError(f"bisection left |sum p - 1| = {abs(p.sum() - 1.0)}")
    return shift + (-b_min), p


def ctm_policy(
    norms: np.ndarray,
    sizes: np.ndarray,
    channel: ChannelRealization,
    comm: CommParams,
    bound: BoundParams,
    t_future: float,
    return_diagnostics: bool = False,
):
    """Communication-time-minimizing distribution.

    p_m = rho_t * a_m / sqrt(T_{U,m} + lambda*) over eligible devices, where
    a_m = (n_m/n)*||g_m|| and lambda* normalizes the simplex constraint.
    Devices with zero gradient or with channel gain below the threshold are
    masked out before solving.
    """
    norms = np.asarray(norms, dtype=float)
    eligible = (norms > 0) & (channel.gains >= comm.gain_threshold) \
        & np.isfinite(channel.upload_s)
    if not eligible.any():
        raise StarvationError("no eligible device with a nonzero gradient")

    a = importance_weights(norms, sizes)[eligible]
    b = channel.upload_s[eligible]
    rho_t = rho(bound.t, bound, t_future)
    lam, p_eligible = _solve_multiplier(rho_t * a, b)

    probs = np.zeros(len(norms))
    probs[eligible] = p_eligible
    dist = SchedulingDistribution(probs, "ctm")
    if return_diagnostics:
        return dist, {"rho": rho_t, "lambda": lam}
    return dist


def p2_objective(
    p: np.ndarray,
    norms: np.ndarray,
    sizes: np.ndarray,
    channel: ChannelRealization,
    bound: BoundParams,
    t_future: float,
) -> float:
    """Per-round scheduling objective: expected remaining rounds term plus
    the expected current-round upload time.

    A(t)*eta^2*T_future * sum (n_m/n)^2 ||g_m||^2 / p_m  +  sum p_m T_{U,m}.
    Returns inf when some p_m = 0 carries a nonzero gradient.
    """
    p = np.asarray(p, dtype=float)
    a = importance_weights(norms, sizes)
    active = a > 0
    if np.any(p[active] == 0):
        return math.inf
    coeff = bound.a_t * bound.eta**2 * t_future
    first = coeff * float(np.sum(a[active] ** 2 / p[active]))
    second = float(np.sum(p * channel.upload_s))
    return first + second


def remaining_rounds_bound(
    norms: np.ndarray,
    sizes: np.ndarray,
    p: np.ndarray,
    bound: BoundParams,
    g_proxy: float,
    aggregate_norm: float,
) -> float:
    """Diagnostic upper bound on the expected remaining communication rounds.

    The p-dependent variance term plus a constant assembled from the maximum
    future gradient-norm proxy and the current aggregate gradient norm. Never
    used inside the policy (the constant does not depend on p).
    """
    a = importance_weights(norms, sizes)
    active = a > 0
    if np.any(p[active] == 0):
        return math.inf
    eta = bound.eta
    first = bound.a_t * eta**2 * float(np.sum(a[active] ** 2 / p[active]))
    const = (
        bound.ell * bound.chi**2 * g_proxy**2
        / (2.0 * bound.epsilon * (2.0 * bound.mu * bound.chi - 1.0))
        + (bound.t + bound.nu + 1.0) * (1.0 / (2.0 * bound.mu) - eta)
        / bound.epsilon * aggregate_norm**2
        - bound.nu - bound.t - 1.0
    )
    return first + const


def sample_device(dist: SchedulingDistribution, rng: np.random.Generator) -> int:
    """Sample one device index from the distribution (Gumbel-max draw)."""
    return sample_device_gumbel(dist, rng.gumbel(size=dist.num_devices))


def sample_device_gumbel(dist: SchedulingDistribution, gumbels: np.ndarray) -> int:
    """Gumbel-max selection: argmax over supported devices of log p + G.

    Taking one standard-Gumbel variate per device makes the draw equivariant
    under consistent permutations of devices and their noise streams.
    """
    with np.errstate(divide="ignore"):
        scores = np.where(dist.probs > 0, np.log(dist.probs) + gumbels, -np.inf)
    return int(np.argmax(scores))
