"""Synthetic wearable: squat kinematics, sensor synthesis, device loop.

Replaces the strap-on hardware end to end.  A trial is built in four
stages: ground-truth segment angles (raised-cosine squat pulses), IMU
streams inverted from those angles (gravity components plus gyro rates,
optionally corrupted), EMG count streams driven by knee angular
velocity, and finally the device loop itself, which fuses, smooths,
zeroes, packs, and transmits one frame every 15 ms of simulated time.
Everything is seeded, so a given profile reproduces the exact byte
stream every run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emg import DEFAULT_EMG_ALPHA
from .errors import ConfigurationError, TransportClosedError
from .fusion import (
    DEFAULT_FILTER_ALPHA,
    NOMINAL_DT_S,
    ComplementaryFilterState,
    calibrate_offset,
    complementary_update,
    tilt_from_accel,
)
from .protocol import LinkStats, TelemetryPacket, encode_frame

GRAVITY_MPS2 = 9.81

#: EMG drive model: counts per degree/second of knee velocity, and the
#: front-end rail.  The channel-1 gain deliberately overdrives the rail so
#: activation bursts sit on a flat ceiling just under 1.6 V, as a real
#: amplifier pushed near its supply would.
EMG1_GAIN_COUNTS_PER_DPS = 12.0
EMG2_GAIN_COUNTS_PER_DPS = 5.0
EMG_RAIL_COUNTS = 1986  # counts_to_volts(1986) = 1.6004 V

#: Phase weighting (descent, ascent) per channel.  Knee velocity is
#: positive while flexion increases, so descent means v > 0.
EMG1_PHASE_WEIGHTS = (0.85, 1.0)
EMG2_PHASE_WEIGHTS = (1.0, 0.6)


@dataclass(frozen=True)
class SquatProfile:
    """Trial shape: rep count, duration, depth, and segment split.

    Repetitions evenly fill the time left after the standing lead-in;
    each is a raised-cosine descent and ascent around a brief hold at
    peak depth.  ``thigh_share`` sets how much of the knee angle the
    thigh segment absorbs (the shank takes the rest, so the difference
    of the two tilts is always exactly the knee angle).  The mount
    angles model imperfect sensor placement; they cancel in the standing
    calibration.
    """

    n_reps: int = 5
    trial_s: float = 10.0
    peak_flexion_deg: float = 120.0
    thigh_share: float = 0.6
    standing_s: float = 2.0
    hold_s: float = 0.2
    thigh_mount_deg: float = 0.0
    shank_mount_deg: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_reps < 0:
            raise ConfigurationError(f"n_reps must be >= 0, got {self.n_reps}")
        if self.trial_s <= 0:
            raise ConfigurationError(f"trial_s must be positive, got {self.trial_s}")
        if not 0.0 < self.peak_flexion_deg < 180.0:
            raise ConfigurationError(
                f"peak_flexion_deg must lie in (0, 180), got {self.peak_flexion_deg}"
            )
        if not 0.0 < self.thigh_share < 1.0:
            raise ConfigurationError(
                f"thigh_share must lie in (0, 1), got {self.thigh_share}"
            )
        if self.standing_s < 0 or self.hold_s < 0:
            raise ConfigurationError("standing_s and hold_s must be non-negative")
        if self.n_reps > 0:
            if self.standing_s >= self.trial_s:
                raise ConfigurationError(
                    "standing lead-in leaves no time for repetitions"
                )
            if self.cycle_s <= self.hold_s:
                raise ConfigurationError(
                    f"rep cycle ({self.cycle_s:.3f} s) must exceed the "
                    f"hold ({self.hold_s} s)"
                )

    @property
    def cycle_s(self) -> float:
        """Duration of one full repetition cycle."""
        if self.n_reps == 0:
            return 0.0
        return (self.trial_s - self.standing_s) / self.n_reps


@dataclass(frozen=True)
class NoiseModel:
    """Sensor corruption: Gaussian noise, gyro bias, EMG floor, and an
    optional lever-arm term adding tangential acceleration to the shank
    accelerometer (stresses the quasi-static tilt assumption).

    The gyro bias is applied with opposite polarity on the two segments
    so it cannot silently cancel in the knee-angle difference.
    """

    accel_sigma: float = 0.2  # m/s^2
    gyro_sigma: float = 0.5  # deg/s
    gyro_bias: float = 0.5  # deg/s
    emg_baseline_counts: float = 60.0
    emg_noise_sigma_counts: float = 8.0
    lever_arm_m: float = 0.0

    def __post_init__(self) -> None:
        if min(self.accel_sigma, self.gyro_sigma, self.emg_noise_sigma_counts) < 0:
            raise ConfigurationError("noise sigmas must be non-negative")
        if not 0 <= self.emg_baseline_counts <= 4095:
            raise ConfigurationError("EMG baseline must fit the ADC range")
        if self.lever_arm_m < 0:
            raise ConfigurationError("lever_arm_m must be non-negative")

    @classmethod
    def zero(cls) -> "NoiseModel":
        """Ideal sensors: every corruption term off."""
        return cls(
            accel_sigma=0.0,
            gyro_sigma=0.0,
            gyro_bias=0.0,
            emg_baseline_counts=0.0,
            emg_noise_sigma_counts=0.0,
            lever_arm_m=0.0,
        )


@dataclass(frozen=True)
class TruthSeries:
    """Ground-truth angles on the simulation grid, degrees."""

    t_s: np.ndarray
    knee_deg: np.ndarray
    thigh_deg: np.ndarray
    shank_deg: np.ndarray

    def __len__(self) -> int:
        return self.t_s.size


@dataclass(frozen=True)
class ImuSeries:
    """One segment's synthesized IMU stream (device axes)."""

    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    gz: np.ndarray


@dataclass(frozen=True)
class DeviceSeries:
    """Everything the device loop computes, one entry per tick."""

    truth: TruthSeries
    knee_deg: np.ndarray  # transmitted, offset-corrected
    emg1_counts: np.ndarray  # transmitted envelopes, uint16
    emg2_counts: np.ndarray
    thigh_fused_deg: np.ndarray
    shank_fused_deg: np.ndarray
    offset_deg: float


def generate_truth(profile: SquatProfile, dt_s: float = NOMINAL_DT_S) -> TruthSeries:
    """Raised-cosine squat pulses on a uniform grid.

    The knee stays at zero through the standing lead-in, then performs
    ``n_reps`` identical cycles: half-cosine descent to the peak, a hold
    at depth, and a mirrored ascent.  The waveform is C1-continuous
    (velocity is zero at every phase boundary).
    """
    if dt_s <= 0:
        raise ConfigurationError(f"dt_s must be positive, got {dt_s}")
    n = int(round(profile.trial_s / dt_s))
    t = np.arange(n) * dt_s
    knee = np.zeros(n)
    if profile.n_reps > 0:
        half_s = (profile.cycle_s - profile.hold_s) / 2.0
        local = (t - profile.standing_s) % profile.cycle_s
        in_reps = t >= profile.standing_s
        descent = in_reps & (local < half_s)
        hold = in_reps & (local >= half_s) & (local < half_s + profile.hold_s)
        ascent = in_reps & (local >= half_s + profile.hold_s)
        peak = profile.peak_flexion_deg
        knee[descent] = peak * 0.5 * (1.0 - np.cos(np.pi * local[descent] / half_s))
        knee[hold] = peak
        tau = local[ascent] - half_s - profile.hold_s
        knee[ascent] = peak * 0.5 * (1.0 + np.cos(np.pi * tau / half_s))
    thigh = profile.thigh_mount_deg - profile.thigh_share * knee
    shank = profile.shank_mount_deg + (1.0 - profile.thigh_share) * knee
    return TruthSeries(t_s=t, knee_deg=knee, thigh_deg=thigh, shank_deg=shank)


def _backward_rate(angles_deg: np.ndarray, dt_s: float) -> np.ndarray:
    """What a gyro on the segment reports: the rate that carried the
    angle from the previous sample to this one (zero at the first)."""
    rate = np.empty_like(angles_deg)
    rate[0] = 0.0
    rate[1:] = np.diff(angles_deg) / dt_s
    return rate


def synthesize_imu(
    truth_deg: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator,
    dt_s: float = NOMINAL_DT_S,
    bias_sign: float = 1.0,
    lever_arm_m: float = 0.0,
) -> ImuSeries:
    """Invert the tilt model for one segment.

    Accelerometer axes see gravity rotated by the segment angle
    (ax = g sin, az = g cos); the gyro pitch axis reports the
    finite-difference angle rate plus ``bias_sign`` times the bias.
    A non-zero lever arm adds the tangential acceleration of a point
    that far from the joint onto ax, violating the quasi-static
    assumption on purpose.
    """
    theta = np.radians(truth_deg)
    n = truth_deg.size
    ax = GRAVITY_MPS2 * np.sin(theta)
    az = GRAVITY_MPS2 * np.cos(theta)
    if lever_arm_m > 0.0:
        alpha_rad = _backward_rate(_backward_rate(np.unwrap(theta), dt_s), dt_s)
        ax = ax + lever_arm_m * alpha_rad
    gy = _backward_rate(truth_deg, dt_s) + bias_sign * noise.gyro_bias
    if noise.accel_sigma > 0:
        ax = ax + rng.normal(0.0, noise.accel_sigma, n)
        az = az + rng.normal(0.0, noise.accel_sigma, n)
        ay = rng.normal(0.0, noise.accel_sigma, n)
    else:
        ay = np.zeros(n)
    if noise.gyro_sigma > 0:
        gy = gy + rng.normal(0.0, noise.gyro_sigma, n)
        gx = rng.normal(0.0, noise.gyro_sigma, n)
        gz = rng.normal(0.0, noise.gyro_sigma, n)
    else:
        gx = np.zeros(n)
        gz = np.zeros(n)
    return ImuSeries(ax=ax, ay=ay, az=az, gx=gx, gy=gy, gz=gz)


def synthesize_emg(
    knee_deg: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator,
    dt_s: float = NOMINAL_DT_S,
) -> tuple[np.ndarray, np.ndarray]:
    """Two raw ADC count streams driven by knee angular velocity.

    Each channel is baseline plus a burst proportional to |velocity|,
    phase-weighted (channel 1 favors the ascent, channel 2 the descent),
    hard-limited at the front-end rail, then noised and clamped to the
    12-bit range.  Returns uint16 arrays.
    """
    velocity = np.gradient(knee_deg, dt_s) if knee_deg.size >= 2 else np.zeros(1)
    speed = np.abs(velocity)
    descending = velocity > 0
    out = []
    for gain, (w_down, w_up) in (
        (EMG1_GAIN_COUNTS_PER_DPS, EMG1_PHASE_WEIGHTS),
        (EMG2_GAIN_COUNTS_PER_DPS, EMG2_PHASE_WEIGHTS),
    ):
        weight = np.where(descending, w_down, w_up)
        clean = np.minimum(
            noise.emg_baseline_counts + gain * weight * speed, EMG_RAIL_COUNTS
        )
        if noise.emg_noise_sigma_counts > 0:
            clean = clean + rng.normal(0.0, noise.emg_noise_sigma_counts, clean.size)
        counts = np.clip(np.rint(clean), 0, 4095).astype(np.uint16)
        out.append(counts)
    return out[0], out[1]


def device_series(
    profile: SquatProfile,
    noise: NoiseModel | None = None,
    alpha: float = DEFAULT_FILTER_ALPHA,
    emg_alpha: float = DEFAULT_EMG_ALPHA,
    dt_s: float = NOMINAL_DT_S,
) -> DeviceSeries:
    """Run the device-side processing chain over a whole trial.

    Per tick: accelerometer tilt per segment, complementary filter
    update, knee angle as the fused tilt difference, zero-offset
    correction (a running mean through the standing lead-in, frozen
    after it), and the EMG smoothing filters.  Matches what the firmware
    loop would do sample by sample.
    """
    noise = NoiseModel() if noise is None else noise
    truth = generate_truth(profile, dt_s)
    rng = np.random.default_rng(profile.rng_seed)
    thigh_imu = synthesize_imu(truth.thigh_deg, noise, rng, dt_s, bias_sign=+1.0)
    shank_imu = synthesize_imu(
        truth.shank_deg, noise, rng, dt_s, bias_sign=-1.0,
        lever_arm_m=noise.lever_arm_m,
    )
    emg1_raw, emg2_raw = synthesize_emg(truth.knee_deg, noise, rng, dt_s)

    n = len(truth)
    n_cal = int(round(profile.standing_s / dt_s)) if profile.standing_s > 0 else 0
    thigh_state = shank_state = None
    thigh_fused = np.empty(n)
    shank_fused = np.empty(n)
    knee_out = np.empty(n)
    emg1_env = np.empty(n, dtype=np.uint16)
    emg2_env = np.empty(n, dtype=np.uint16)
    env1 = env2 = 0.0
    raw_knee: list[float] = []
    running_sum = 0.0
    offset = 0.0
    for i in range(n):
        thigh_tilt = tilt_from_accel(thigh_imu.ax[i], thigh_imu.az[i])
        shank_tilt = tilt_from_accel(shank_imu.ax[i], shank_imu.az[i])
        if thigh_state is None:
            # First tick: trust the accelerometer outright.
            thigh_state = ComplementaryFilterState(thigh_tilt, alpha, 0.0)
            shank_state = ComplementaryFilterState(shank_tilt, alpha, 0.0)
        else:
            thigh_state = complementary_update(
                thigh_state, float(thigh_imu.gy[i]), thigh_tilt, dt_s
            )
            shank_state = complementary_update(
                shank_state, float(shank_imu.gy[i]), shank_tilt, dt_s
            )
        thigh_fused[i] = thigh_state.fused_angle_deg
        shank_fused[i] = shank_state.fused_angle_deg
        raw = shank_state.fused_angle_deg - thigh_state.fused_angle_deg
        if i < n_cal:
            raw_knee.append(raw)
            running_sum += raw
            offset = running_sum / len(raw_knee)
            if i == n_cal - 1:
                offset = calibrate_offset(raw_knee, n_cal * dt_s, dt_s).offset_deg
        knee_out[i] = raw - offset
        env1 += emg_alpha * (float(emg1_raw[i]) - env1)
        env2 += emg_alpha * (float(emg2_raw[i]) - env2)
        emg1_env[i] = np.uint16(round(env1))
        emg2_env[i] = np.uint16(round(env2))
    return DeviceSeries(
        truth=truth,
        knee_deg=knee_out,
        emg1_counts=emg1_env,
        emg2_counts=emg2_env,
        thigh_fused_deg=thigh_fused,
        shank_fused_deg=shank_fused,
        offset_deg=offset,
    )


def device_frames(
    profile: SquatProfile,
    noise: NoiseModel | None = None,
    alpha: float = DEFAULT_FILTER_ALPHA,
    emg_alpha: float = DEFAULT_EMG_ALPHA,
    dt_s: float = NOMINAL_DT_S,
) -> list[bytes]:
    """The trial as a list of encoded 14-byte frames, seq = tick index."""
    series = device_series(profile, noise, alpha, emg_alpha, dt_s)
    return [
        encode_frame(
            i & 0xFFFF,
            TelemetryPacket(
                knee_angle_deg=float(series.knee_deg[i]),
                emg1_counts=int(series.emg1_counts[i]),
                emg2_counts=int(series.emg2_counts[i]),
            ),
        )
        for i in range(len(series.truth))
    ]


def run_device(
    profile: SquatProfile,
    noise: NoiseModel | None = None,
    transport=None,
    realtime: bool = False,
    dump_path: str | Path | None = None,
    alpha: float = DEFAULT_FILTER_ALPHA,
    emg_alpha: float = DEFAULT_EMG_ALPHA,
    dt_s: float = NOMINAL_DT_S,
) -> LinkStats:
    """Transmit one simulated trial over ``transport``.

    The frame stream is fully precomputed, so the fast and real-time
    paths emit identical bytes; real time just paces sends at the
    nominal interval.  ``dump_path`` saves the pre-loss stream for
    offline replay.  A transport closing mid-trial aborts the run and
    returns the partial counters.
    """
    frames = device_frames(profile, noise, alpha, emg_alpha, dt_s)
    if dump_path is not None:
        Path(dump_path).write_bytes(b"".join(frames))
    if transport is None:
        stats = LinkStats(sent=len(frames))
        return stats
    start = time.monotonic()
    for i, frame in enumerate(frames):
        if realtime:
            target = start + i * dt_s
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        try:
            transport.send(frame)
        except TransportClosedError:
            break
    if realtime:
        transport.stats.note_elapsed(time.monotonic() - start)
    return transport.stats
