"""Digital EMG chain: ADC conversion, on-device IIR envelope, statistics.

The analog front end already rectifies and integrates, so everything
arriving here is a non-negative envelope in ADC counts.  The device
applies one more first-order low-pass (exponential smoothing) before
transmission; the host accumulates amplitude statistics over the
received envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import InputError, InsufficientDataError

#: 12-bit ADC over a 3.3 V full scale.
ADC_MAX_COUNTS = 4095
ADC_FULL_SCALE_V = 3.3

#: Default smoothing coefficient; settles in ~20 samples (~0.3 s at 66.7 Hz).
DEFAULT_EMG_ALPHA = 0.2


class EmgChannel(Enum):
    VASTUS_LATERALIS = "vastus_lateralis"
    SEMITENDINOSUS = "semitendinosus"


@dataclass(frozen=True)
class EmgChannelState:
    """Per-channel envelope filter state and running amplitude statistics.

    ``envelope_counts`` follows ``env' = env + alpha_emg * (raw - env)``;
    peak, sum and count accumulate over the post-smoothing envelope.
    """

    channel: EmgChannel
    alpha_emg: float = DEFAULT_EMG_ALPHA
    envelope_counts: float = 0.0
    peak_counts: float = 0.0
    sum_counts: float = 0.0
    n: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha_emg <= 1.0:
            raise InputError(f"alpha_emg must be in (0, 1], got {self.alpha_emg}")

    @property
    def mean_counts(self) -> float:
        return self.sum_counts / self.n if self.n else 0.0


@dataclass(frozen=True)
class EmgSummary:
    """Peak and mean of a channel's envelope stream, in volts."""

    peak_volts: float
    mean_volts: float


def _check_counts(counts: float) -> float:
    if not math.isfinite(counts) or not 0 <= counts <= ADC_MAX_COUNTS:
        raise InputError(f"ADC counts out of range [0, {ADC_MAX_COUNTS}]: {counts}")
    return float(counts)


def emg_update(state: EmgChannelState, raw_counts: float) -> EmgChannelState:
    """Advance the envelope filter by one raw ADC sample.

    Returns a new state with the smoothed envelope and updated
    peak/sum/count accumulators.

    Raises
    ------
    InputError
        If ``raw_counts`` is outside the ADC range.
    """
    raw = _check_counts(raw_counts)
    envelope = state.envelope_counts + state.alpha_emg * (raw - state.envelope_counts)
    peak = envelope if state.n == 0 else max(state.peak_counts, envelope)
    return replace(
        state,
        envelope_counts=envelope,
        peak_counts=peak,
        sum_counts=state.sum_counts + envelope,
        n=state.n + 1,
    )


def counts_to_volts(counts: float) -> float:
    """Map ADC counts to volts over the 3.3 V / 4095-count full scale."""
    return _check_counts(counts) * ADC_FULL_SCALE_V / ADC_MAX_COUNTS


def volts_to_counts(volts: float) -> int:
    """Inverse of :func:`counts_to_volts`, rounded to the nearest count."""
    if not math.isfinite(volts) or not 0.0 <= volts <= ADC_FULL_SCALE_V:
        raise InputError(f"volts out of range [0, {ADC_FULL_SCALE_V}]: {volts}")
    return round(volts * ADC_MAX_COUNTS / ADC_FULL_SCALE_V)


def channel_summary(state: EmgChannelState) -> EmgSummary:
    """Peak and mean of the envelope stream, converted to volts.

    Raises
    ------
    InsufficientDataError
        If the channel has not seen any samples.
    """
    if state.n < 1:
        raise InsufficientDataError(f"channel {state.channel.value} has no samples")
    return EmgSummary(
        peak_volts=counts_to_volts(state.peak_counts),
        mean_volts=counts_to_volts(state.mean_counts),
    )
