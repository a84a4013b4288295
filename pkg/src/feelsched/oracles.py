"""Independent brute-force verifications usable from the CLI.

Each oracle checks an analytical result against an implementation-independent
estimate (simplex grid search, Monte Carlo). They are also reused by the
acceptance tests.
"""

from __future__ import annotations

import math

import numpy as np

from . import scheduler
from .channel import ChannelRealization, CommParams, DeviceProfile, q_factor
from .scheduler import BoundParams


def simplex_grid(num_devices: int, resolution: int) -> np.ndarray:
    """All probability vectors with entries that are multiples of 1/resolution."""
    if num_devices == 1:
        return np.array([[1.0]])
    if num_devices == 2:
        i = np.arange(resolution + 1)
        return np.stack([i, resolution - i], axis=1) / resolution
    if num_devices == 3:
        i, j = np.meshgrid(np.arange(resolution + 1), np.arange(resolution + 1),
                           indexing="ij")
        mask = i + j <= resolution
        i, j = i[mask], j[mask]
        return np.stack([i, j, resolution - i - j], axis=1) / resolution
    raise NotImplementedError("grid search supported up to 3 devices")


def random_instance(
    rng: np.random.Generator,
    num_devices: int = 3,
    latency_spread: float = 1.0,
) -> dict:
    """Random scheduling instance (gradient norms, sizes, channel, bound)."""
    norms = rng.uniform(0.1, 2.0, size=num_devices)
    sizes = rng.integers(50, 500, size=num_devices)
    upload = 10.0 ** rng.uniform(-latency_spread, latency_spread, size=num_devices)
    channel = ChannelRealization(
        gains=np.ones(num_devices),
        snr=np.ones(num_devices),
        rate_bps_per_hz=1.0 / upload,
        upload_s=upload,
    )
    comm = CommParams(
        bandwidth_hz=1.0, bits_per_param=1, num_params=1,
        noise_power_w=1.0, gain_threshold=1e-6,
    )
    bound = BoundParams(
        ell=rng.uniform(1.0, 4.0), mu=1.0, epsilon=10.0 ** rng.uniform(-4, -1),
        chi=1.0, nu=rng.uniform(1.0, 5.0), t=int(rng.integers(0, 50)),
    )
    t_future = rng.uniform(0.1, 10.0)
    return {
        "norms": norms, "sizes": sizes, "channel": channel,
        "comm": comm, "bound": bound, "t_future": t_future,
    }


def grid_search_check(
    num_instances: int = 50, resolution: int = 1000, seed: int = 0,
    tol: float = 1e-6,
) -> dict:
    """CTM objective vs. brute-force simplex grid minimum on M=3 instances."""
    rng = np.random.default_rng(seed)
    grid = simplex_grid(3, resolution)
    interior = grid[(grid > 0).all(axis=1)]
    worst = -math.inf
    for _ in range(num_instances):
        inst = random_instance(rng)
        dist = scheduler.ctm_policy(
            inst["norms"], inst["sizes"], inst["channel"], inst["comm"],
            inst["bound"], inst["t_future"],
        )
        obj = scheduler.p2_objective(
            dist.probs, inst["norms"], inst["sizes"], inst["channel"],
            inst["bound"], inst["t_future"],
        )
        a = scheduler.importance_weights(inst["norms"], inst["sizes"])
        coeff = inst["bound"].a_t * inst["bound"].eta ** 2 * inst["t_future"]
        values = coeff * (a**2 / interior).sum(axis=1) \
            + interior @ inst["channel"].upload_s
        gap = obj - values.min()
        worst = max(worst, gap)
    return {"instances": num_instances, "worst_gap": worst, "passed": worst <= tol}


def mc_q_factor(
    profile: DeviceProfile, comm: CommParams, samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the truncated
    expected-reciprocal-rate integral."""
    z = rng.exponential(profile.channel_variance, size=samples)
    snr = profile.transmit_power_w * z / comm.noise_power_w
    vals = np.where(z >= comm.gain_threshold, 1.0 / np.log2(1.0 + snr), 0.0)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def q_factor_check(
    devices: list[DeviceProfile], comm: CommParams, samples: int = 1_000_000,
    seed: int = 0,
) -> dict:
    """Quadrature vs. Monte Carlo within 3 standard errors for each profile."""
    rng = np.random.default_rng(seed)
    rows = []
    passed = True
    for d in devices:
        quad_val = q_factor(d, comm)
        mc_mean, mc_se = mc_q_factor(d, comm, samples, rng)
        ok = abs(quad_val - mc_mean) <= 3.0 * mc_se
        passed &= ok
        rows.append({"quadrature": quad_val, "mc_mean": mc_mean, "mc_se": mc_se, "ok": ok})
    return {"profiles": rows, "passed": passed}


def unbiasedness_check(
    probs: np.ndarray, grads: np.ndarray, sizes: np.ndarray,
    draws: int = 100_000, seed: int = 0,
) -> dict:
    """Monte Carlo mean of scaled uploads vs. the full weighted gradient.

    Valid only when every zero-probability device carries a zero gradient.
    """
    rng = np.random.default_rng(seed)
    sizes = np.asarray(sizes, dtype=float)
    weights = sizes / sizes.sum()
    target = weights @ grads
    picks = rng.choice(len(probs), size=draws, p=probs)
    scaled = (weights[picks, None] / probs[picks, None]) * grads[picks]
    mean = scaled.mean(axis=0)
    se = scaled.std(axis=0, ddof=1) / math.sqrt(draws)
    # Degenerate distributions make every draw identical; the standard error
    # then collapses to rounding noise while the sample mean still carries
    # O(1e-14) of float-summation error, so floor the tolerance accordingly.
    floor = 1e-12 * (1.0 + np.abs(target))
    ok = bool(np.all(np.abs(mean - target) <= 3.0 * np.maximum(se, floor)))
    return {
        "mc_mean": mean.tolist(), "target": target.tolist(),
        "stderr": se.tolist(), "passed": ok,
    }
