"""Wireless uplink model: Rayleigh block fading, SNR, rate and upload latency.

Channel power gains are exponentially distributed (squared magnitude of a
circularly-symmetric complex Gaussian), i.i.d. across rounds and devices.
Upload latency for a d-parameter gradient quantized at q bits/parameter over
a bandwidth-B subchannel is q*d / (B * log2(1 + SNR)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


class QuadratureError(RuntimeError):
    """Raised when the expected-reciprocal-rate integral fails to converge."""


@dataclass(frozen=True)
class CommParams:
    """Static communication-side parameters shared by all devices."""

    bandwidth_hz: float
    bits_per_param: int
    num_params: int
    noise_power_w: float
    gain_threshold: float
    broadcast_time_s: float = 0.0

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        if self.bits_per_param < 1:
            raise ValueError(f"bits_per_param must be >= 1, got {self.bits_per_param}")
        if self.num_params < 1:
            raise ValueError(f"num_params must be >= 1, got {self.num_params}")
        if self.noise_power_w <= 0:
            raise ValueError(f"noise_power_w must be > 0, got {self.noise_power_w}")
        if self.gain_threshold < 0:
            raise ValueError(f"gain_threshold must be >= 0, got {self.gain_threshold}")
        if self.broadcast_time_s < 0:
            raise ValueError(f"broadcast_time_s must be >= 0, got {self.broadcast_time_s}")

    @property
    def payload_bits(self) -> float:
        return float(self.bits_per_param) * float(self.num_params)


@dataclass(frozen=True)
class DeviceProfile:
    """Static per-device parameters.

    ``channel_variance`` is the mean of the exponential power-gain
    distribution. If ``distance_km`` is given, the variance should come from
    :func:`path_loss_variance`.
    """

    dataset_size: int
    channel_variance: float
    transmit_power_w: float
    distance_km: float | None = None

    def __post_init__(self) -> None:
        if self.dataset_size < 1:
            raise ValueError(f"dataset_size must be >= 1, got {self.dataset_size}")
        if self.channel_variance <= 0:
            raise ValueError(f"channel_variance must be > 0, got {self.channel_variance}")
        if self.transmit_power_w <= 0:
            raise ValueError(f"transmit_power_w must be > 0, got {self.transmit_power_w}")


@dataclass(frozen=True)
class ChannelRealization:
    """One round of sampled channel state for all devices."""

    gains: np.ndarray        # |h_m|^2, nonnegative
    snr: np.ndarray          # P_m * |h_m|^2 / N0
    rate_bps_per_hz: np.ndarray
    upload_s: np.ndarray     # q*d / (B*R_m), inf where R_m == 0

    @property
    def num_devices(self) -> int:
        return self.gains.shape[0]


def path_loss_variance(distance_km: float) -> float:
    """Channel variance from the 128.1 + 37.6*log10(km) path-loss model."""
    if distance_km <= 0:
        raise ValueError(f"distance_km must be > 0, got {distance_km}")
    pl_db = 128.1 + 37.6 * math.log10(distance_km)
    return 10.0 ** (-pl_db / 10.0)


def upload_time(rate_bps_per_hz: float, comm: CommParams) -> float:
    """Seconds to upload one gradient at the given spectral efficiency."""
    if rate_bps_per_hz < 0:
        raise ValueError(f"rate must be >= 0, got {rate_bps_per_hz}")
    if rate_bps_per_hz == 0:
        return math.inf
    return comm.payload_bits / (comm.bandwidth_hz * rate_bps_per_hz)


def realization_from_gains(
    gains: np.ndarray, devices: list[DeviceProfile], comm: CommParams
) -> ChannelRealization:
    """Fill SNR, rate and upload time from sampled power gains."""
    gains = np.asarray(gains, dtype=float)
    powers = np.array([d.transmit_power_w for d in devices])
    snr = powers * gains / comm.noise_power_w
    rate = np.log2(1.0 + snr)
    with np.errstate(divide="ignore"):
        upload = np.where(rate > 0, comm.payload_bits / (comm.bandwidth_hz * rate), math.inf)
    return ChannelRealization(gains=gains, snr=snr, rate_bps_per_hz=rate, upload_s=upload)


def sample_channels(
    devices: list[DeviceProfile], comm: CommParams, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one block-fading realization: |h_m|^2 ~ Exp(mean = sigma_m^2)."""
    gains = np.array([rng.exponential(d.channel_variance) for d in devices])
    return realization_from_gains(gains, devices, comm)


# Width of the finite quadrature window in units of the channel variance.
# Beyond it the integrand is below e^-50 ~ 2e-22 of the remaining mass.
_QUAD_WINDOW = 50.0


def q_factor(profile: DeviceProfile, comm: CommParams) -> float:
    """Expected reciprocal rate above the gain threshold.

    Computes the truncated integral
    ``int_{g_th}^inf e^{-z/sigma^2} / (sigma^2 * log2(1 + P z / N0)) dz``
    by adaptive quadrature after substituting u = z / sigma^2. Note the
    integral is truncated but *not* renormalized by the probability of
    exceeding the threshold.
    """
    if comm.gain_threshold <= 0:
        raise ValueError("gain_threshold must be > 0 for a finite integrand")
    sigma2 = profile.channel_variance
    s = profile.transmit_power_w * sigma2 / comm.noise_power_w
    u0 = comm.gain_threshold / sigma2

    def integrand(u: float) -> float:
        return math.exp(-u) / math.log2(1.0 + s * u)

    result = quad(integrand, u0, u0 + _QUAD_WINDOW, epsabs=1e-10, epsrel=1e-10,
                  limit=200, full_output=1)
    if len(result) > 3:
        raise QuadratureError(
            f"q_factor quadrature did not converge: {result[3]} "
            f"(sigma2={sigma2}, snr_scale={s}, u0={u0})"
        )
    value, abserr = result[0], result[1]
    if abserr > 1e-8:
        raise QuadratureError(
            f"q_factor quadrature error {abserr} exceeds 1e-8 "
            f"(sigma2={sigma2}, snr_scale={s}, u0={u0})"
        )
    # Closed tail bound: integrand < e^-u / log2(1 + P*g_th/N0) for u beyond
    # the window; negligible by construction.
    return value


def expected_future_time(devices: list[DeviceProfile], comm: CommParams) -> float:
    """Expected per-round upload time of future rounds.

    Future scheduling weights are proportional to local dataset size, so the
    expectation is sum_m q*d*n_m*Q_m / (n*B).
    """
    sizes = np.array([d.dataset_size for d in devices], dtype=float)
    n = sizes.sum()
    total = 0.0
    for d, n_m in zip(devices, sizes):
        total += comm.payload_bits * n_m * q_factor(d, comm) / (n * comm.bandwidth_hz)
    return total
