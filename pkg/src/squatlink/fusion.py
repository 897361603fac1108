"""Sagittal-plane knee kinematics from thigh- and shank-mounted IMUs.

The chain per segment: accelerometer tilt via a two-argument arctangent,
a first-order complementary filter blending the integrated gyro rate with
that tilt, knee angle as the shank-thigh tilt difference, zeroing against
a standing-posture offset, and finite-difference angular velocity and
acceleration.

Conventions
-----------
* Angles are degrees, normalized to (-180, 180].
* Knee flexion is positive: squat descent increases the knee angle.
* Segment tilt is ``atan2(ax, az)`` with ``ax`` the anterior axis and
  ``az`` the longitudinal axis; the sagittal gyro rate rides on ``gy``
  and is sign-aligned with the tilt derivative.  The synthetic device
  (:mod:`squatlink.simulator`) defines and honours the same mounting
  convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateOrientationError,
    InputError,
    InsufficientDataError,
    TimingError,
)

#: Nominal device loop period (15 ms, ~66.7 Hz).
NOMINAL_DT_S = 0.015

#: Default gyro weight of the complementary filter.
DEFAULT_FILTER_ALPHA = 0.98

#: Default standing-calibration window.
DEFAULT_CALIBRATION_WINDOW_S = 2.0


class Segment(Enum):
    """Which limb segment an IMU (or a tilt estimate) belongs to."""

    THIGH = "thigh"
    SHANK = "shank"


@dataclass(frozen=True)
class ImuSample:
    """One 6-axis IMU reading.

    Attributes
    ----------
    ax, ay, az : float
        Acceleration along the sensor's local axes, m/s².
    gx, gy, gz : float
        Angular rate about the local axes, deg/s.  ``gy`` is the
        sagittal-plane rate used by the fusion chain.
    t : float
        Seconds since stream start; non-negative, strictly increasing
        within a stream.
    """

    ax: float
    ay: float
    az: float
    gx: float
    gy: float
    gz: float
    t: float


@dataclass(frozen=True)
class SegmentTilt:
    """Sagittal tilt of one segment, degrees in (-180, 180]."""

    angle_deg: float
    segment: Segment


@dataclass(frozen=True)
class ComplementaryFilterState:
    """State of one segment's complementary filter.

    ``alpha`` is the gyro weight: 1.0 means pure gyro integration,
    0.0 means pure accelerometer tilt.
    """

    fused_angle_deg: float = 0.0
    alpha: float = DEFAULT_FILTER_ALPHA
    last_update_t: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must be in [0, 1], got {self.alpha}")
        if not math.isfinite(self.fused_angle_deg):
            raise InputError("fused_angle_deg must be finite")


@dataclass(frozen=True)
class KneeState:
    """Knee flexion angle and its derivatives at one instant."""

    angle_deg: float
    velocity_dps: float
    accel_dps2: float
    t: float


@dataclass(frozen=True)
class CalibrationOffset:
    """Standing-posture zero offset, frozen after the calibration window."""

    offset_deg: float
    n_samples: int
    window_s: float

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise InputError("calibration needs at least one sample")
        if not math.isfinite(self.offset_deg):
            raise InputError("offset_deg must be finite")


def wrap_angle_deg(angle_deg: float) -> float:
    """Normalize an angle to (-180, 180].

    Values already inside the interval are returned unchanged (no
    floating-point round-trip through the modulo).
    """
    if -180.0 < angle_deg <= 180.0:
        return angle_deg
    wrapped = (angle_deg + 180.0) % 360.0 - 180.0
    if wrapped == -180.0:
        wrapped = 180.0
    return wrapped


def tilt_from_accel(ax: float, az: float) -> float:
    """Sagittal tilt in degrees from the gravity projection.

    Parameters
    ----------
    ax, az : float
        Acceleration along the anterior and longitudinal axes, m/s².

    Returns
    -------
    float
        ``atan2(ax, az)`` in degrees, in (-180, 180].

    Raises
    ------
    DegenerateOrientationError
        If both inputs are zero: the gravity vector is unobservable in
        the sagittal plane.
    """
    if not (math.isfinite(ax) and math.isfinite(az)):
        raise InputError(f"non-finite accelerometer reading ({ax}, {az})")
    if ax == 0.0 and az == 0.0:
        raise DegenerateOrientationError(
            "ax and az are both zero; sagittal tilt is undefined"
        )
    return wrap_angle_deg(math.degrees(math.atan2(ax, az)))


def segment_tilt(sample: ImuSample, segment: Segment) -> SegmentTilt:
    """Accelerometer tilt of ``sample`` tagged with its segment role."""
    return SegmentTilt(tilt_from_accel(sample.ax, sample.az), segment)


def complementary_update(
    state: ComplementaryFilterState,
    gyro_rate_dps: float,
    accel_tilt_deg: float,
    dt_s: float,
) -> ComplementaryFilterState:
    """Advance a complementary filter by one sample.

    ``fused' = alpha * (fused + gyro_rate * dt) + (1 - alpha) * accel_tilt``

    Returns a new state; the input state is not modified.

    Raises
    ------
    TimingError
        If ``dt_s`` is not strictly positive.
    InputError
        If the gyro rate or accelerometer tilt is non-finite.
    """
    if not (math.isfinite(dt_s) and dt_s > 0.0):
        raise TimingError(f"dt_s must be positive, got {dt_s}")
    if not (math.isfinite(gyro_rate_dps) and math.isfinite(accel_tilt_deg)):
        raise InputError("gyro rate and accel tilt must be finite")
    fused = (
        state.alpha * (state.fused_angle_deg + gyro_rate_dps * dt_s)
        + (1.0 - state.alpha) * accel_tilt_deg
    )
    return replace(
        state,
        fused_angle_deg=wrap_angle_deg(fused),
        last_update_t=state.last_update_t + dt_s,
    )


def knee_angle(
    shank: SegmentTilt,
    thigh: SegmentTilt,
    offset: CalibrationOffset | None = None,
) -> float:
    """Knee flexion angle: shank tilt minus thigh tilt minus the zero offset.

    Raises
    ------
    InputError
        If the tilt arguments do not carry the expected segment roles.
    """
    if shank.segment is not Segment.SHANK or thigh.segment is not Segment.THIGH:
        raise InputError(
            f"segment roles mismatched: got ({shank.segment.value}, "
            f"{thigh.segment.value}), expected (shank, thigh)"
        )
    offset_deg = offset.offset_deg if offset is not None else 0.0
    return shank.angle_deg - thigh.angle_deg - offset_deg


def calibrate_offset(
    raw_knee_angles: Sequence[float],
    window_s: float = DEFAULT_CALIBRATION_WINDOW_S,
    dt_s: float = NOMINAL_DT_S,
) -> CalibrationOffset:
    """Mean raw knee angle over the first ``window_s`` seconds of standing.

    Parameters
    ----------
    raw_knee_angles : sequence of float
        Un-zeroed knee angles at the nominal rate, degrees.
    window_s : float
        Length of the averaging window, seconds.
    dt_s : float
        Nominal sampling interval used to convert the window to a count.

    Raises
    ------
    InsufficientDataError
        If the series does not cover the window.
    """
    if not (dt_s > 0.0 and window_s > 0.0):
        raise TimingError("window_s and dt_s must be positive")
    n = int(round(window_s / dt_s))
    n = max(n, 1)
    if len(raw_knee_angles) < n:
        raise InsufficientDataError(
            f"need {n} samples ({window_s} s at dt={dt_s} s), "
            f"got {len(raw_knee_angles)}"
        )
    window = np.asarray(raw_knee_angles[:n], dtype=float)
    if not np.all(np.isfinite(window)):
        raise InputError("calibration window contains non-finite angles")
    return CalibrationOffset(
        offset_deg=float(window.mean()), n_samples=n, window_s=window_s
    )


def _moving_average(values: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with edge replication; width forced odd."""
    if width <= 1:
        return values
    if width % 2 == 0:
        width += 1
    half = width // 2
    padded = np.pad(values, half, mode="edge")
    kernel = np.full(width, 1.0 / width)
    return np.convolve(padded, kernel, mode="valid")


def derive_kinematics(
    angles_deg: Sequence[float],
    dt_s: float = NOMINAL_DT_S,
    smooth_window: int = 1,
) -> list[KneeState]:
    """Angular velocity and acceleration by central finite differences.

    Velocity is the central difference of the angle series (one-sided at
    the endpoints); acceleration is the central difference of velocity.
    Output length equals input length.

    Parameters
    ----------
    angles_deg : sequence of float
        Knee angle series, degrees.
    dt_s : float
        Sampling interval, seconds.
    smooth_window : int
        Optional centered moving-average width (samples) applied to the
        derivative inputs; 1 disables smoothing.

    Raises
    ------
    InsufficientDataError
        If fewer than 3 samples are given.
    """
    if not (math.isfinite(dt_s) and dt_s > 0.0):
        raise TimingError(f"dt_s must be positive, got {dt_s}")
    angles = np.asarray(angles_deg, dtype=float)
    if angles.size < 3:
        raise InsufficientDataError(
            f"need at least 3 samples to differentiate, got {angles.size}"
        )
    smoothed = _moving_average(angles, smooth_window)
    velocity = np.gradient(smoothed, dt_s)
    accel = np.gradient(_moving_average(velocity, smooth_window), dt_s)
    t = np.arange(angles.size) * dt_s
    return [
        KneeState(float(a), float(v), float(c), float(ti))
        for a, v, c, ti in zip(angles, velocity, accel, t)
    ]
