"""Radio link budget: free-space loss, Shannon-capacity rates, transfer times.

All links (inter-satellite and satellite-to-server) share one model: isotropic
free-space path loss at the carrier frequency, thermal noise over the channel
bandwidth, and a rate at the Shannon bound for the resulting SNR. A message's
transfer time is its size over that rate plus one-way propagation and any
fixed processing delays.

A fixed-rate model with the same interface exists so protocol logic can be
exercised with hand-picked round numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .orbital import SPEED_OF_LIGHT_M_S

BOLTZMANN_J_PER_K = 1.380649e-23

BITS_PER_PARAMETER = 32
MODEL_HEADER_BITS = 256  # epoch, sink id, source id, flags
CONTROL_MESSAGE_BITS = 512


class LinkUnavailableError(RuntimeError):
    """Raised when a transfer is requested over a link with no line of sight."""


def db(linear: float) -> float:
    return 10.0 * math.log10(linear)


def from_db(decibels: float) -> float:
    return 10.0 ** (decibels / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def model_size_bits(dimension: int) -> int:
    """Wire size of a model or partial update: packed parameters plus header."""
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    return dimension * BITS_PER_PARAMETER + MODEL_HEADER_BITS


@dataclass(frozen=True)
class LinkParams:
    """Transmitter, receiver, and channel characteristics shared by both ends."""

    tx_power_w: float
    tx_gain: float  # linear
    rx_gain: float  # linear
    bandwidth_hz: float
    noise_temperature_k: float
    carrier_hz: float
    tx_delay_s: float = 0.0
    rx_delay_s: float = 0.0

    def __post_init__(self):
        for name in ("tx_power_w", "tx_gain", "rx_gain", "bandwidth_hz",
                     "noise_temperature_k", "carrier_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.tx_delay_s < 0 or self.rx_delay_s < 0:
            raise ValueError("processing delays must be >= 0")


def path_loss(distance_m: float, carrier_hz: float) -> float:
    """Free-space path loss (linear): (4*pi*f*d/c)^2."""
    if distance_m <= 0:
        raise ValueError(f"distance_m must be positive, got {distance_m}")
    return (4.0 * math.pi * carrier_hz * distance_m / SPEED_OF_LIGHT_M_S) ** 2


def snr(params: LinkParams, distance_m: float, visible: bool = True) -> float:
    """Received signal-to-noise ratio; zero without line of sight."""
    if not visible:
        return 0.0
    loss = path_loss(distance_m, params.carrier_hz)
    noise_w = BOLTZMANN_J_PER_K * params.noise_temperature_k * params.bandwidth_hz
    return params.tx_power_w * params.tx_gain * params.rx_gain / (noise_w * loss)


def rate(params: LinkParams, distance_m: float, visible: bool = True) -> float:
    """Achievable rate in bit/s: B * log2(1 + SNR); zero without line of sight."""
    if not visible:
        return 0.0
    return params.bandwidth_hz * math.log2(1.0 + snr(params, distance_m, visible))


def transfer_time(
    params: LinkParams, distance_m: float, payload_bits: int, visible: bool = True
) -> float:
    """Seconds to move ``payload_bits`` across the link.

    Serialization at the achievable rate, plus one-way propagation, plus the
    fixed transmit/receive processing delays.

    Raises:
        LinkUnavailableError: when ``visible`` is false.
    """
    if payload_bits < 0:
        raise ValueError(f"payload_bits must be >= 0, got {payload_bits}")
    if not visible:
        raise LinkUnavailableError(
            f"no line of sight for a {payload_bits}-bit transfer at {distance_m:.0f} m"
        )
    r = rate(params, distance_m, visible)
    propagation = distance_m / SPEED_OF_LIGHT_M_S
    return payload_bits / r + propagation + params.tx_delay_s + params.rx_delay_s


class ShannonLink:
    """Distance-dependent link model used by the simulator."""

    def __init__(self, params: LinkParams):
        self.params = params

    def transfer_time(self, distance_m: float, payload_bits: int, visible: bool = True) -> float:
        return transfer_time(self.params, distance_m, payload_bits, visible)


class FixedRateLink:
    """Constant-rate stand-in for protocol tests; ignores geometry."""

    def __init__(self, rate_bps: float, fixed_delay_s: float = 0.0):
        if rate_bps <= 0:
            raise ValueError(f"rate_bps must be positive, got {rate_bps}")
        self.rate_bps = rate_bps
        self.fixed_delay_s = fixed_delay_s

    def transfer_time(self, distance_m: float, payload_bits: int, visible: bool = True) -> float:
        if not visible:
            raise LinkUnavailableError("no line of sight")
        return payload_bits / self.rate_bps + self.fixed_delay_s
