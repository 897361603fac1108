"""Host-side session analytics and persistence.

A session walks the lifecycle Created -> Calibrating -> Recording ->
Stopped.  Packets fed during Calibrating accumulate the standing zero
offset; packets fed during Recording become the trial record.  Time is
reconstructed from the received sample count and the nominal interval,
so sequence gaps do not stretch the time vector.  Stopped records are
summarized (reps, range of motion, kinematic and EMG peaks) and exported
as CSV plus a JSON metadata sidecar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import fusion
from .emg import EmgChannel, EmgChannelState, channel_summary, emg_update
from .errors import (
    ConfigurationError,
    ExportError,
    InsufficientDataError,
    InputError,
    StateError,
)
from .fusion import (
    DEFAULT_CALIBRATION_WINDOW_S,
    NOMINAL_DT_S,
    CalibrationOffset,
    KneeState,
)
from .protocol import MAX_VALID_COUNTS, TelemetryPacket

#: Hysteresis thresholds for repetition counting, degrees of flexion.
DEFAULT_REP_HIGH_DEG = 60.0
DEFAULT_REP_LOW_DEG = 20.0

CSV_COLUMNS = (
    "t_s",
    "knee_angle_deg",
    "knee_vel_dps",
    "knee_acc_dps2",
    "emg1_counts",
    "emg2_counts",
    "seq",
)


class Leg(Enum):
    LEFT = "left"
    RIGHT = "right"


class SessionState(Enum):
    CREATED = "created"
    CALIBRATING = "calibrating"
    RECORDING = "recording"
    STOPPED = "stopped"


#: Legal lifecycle transitions; shared verbatim with the control API.
LIFECYCLE_TRANSITIONS: dict[str, tuple[str, ...]] = {
    SessionState.CREATED.value: (SessionState.CALIBRATING.value,),
    SessionState.CALIBRATING.value: (SessionState.RECORDING.value,),
    SessionState.RECORDING.value: (SessionState.STOPPED.value,),
    SessionState.STOPPED.value: (),
}


@dataclass(frozen=True)
class SessionMetadata:
    """Anonymized trial metadata; no free-text identity fields."""

    subject_id: str
    age_range: str
    sex: str
    dominant_leg: Leg
    created_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )

    def __post_init__(self) -> None:
        if not self.subject_id or not self.subject_id.strip():
            raise InputError("subject_id must be non-empty")

    def as_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "age_range": self.age_range,
            "sex": self.sex,
            "dominant_leg": self.dominant_leg.value,
            "created_at": self.created_at.isoformat(),
        }


@dataclass(frozen=True)
class RepSpan:
    """Index span of one repetition: first sample above the low threshold
    on the way up, through the sample that falls back below it."""

    start: int
    end: int


@dataclass(frozen=True)
class SessionSummary:
    rep_count: int
    rom_deg: float
    peak_flexion_deg: float
    peak_velocity_dps: float
    peak_accel_dps2: float
    emg1_peak_v: float
    emg1_mean_v: float
    emg2_peak_v: float
    emg2_mean_v: float

    def as_dict(self) -> dict:
        return {
            "rep_count": self.rep_count,
            "rom_deg": self.rom_deg,
            "peak_flexion_deg": self.peak_flexion_deg,
            "peak_velocity_dps": self.peak_velocity_dps,
            "peak_accel_dps2": self.peak_accel_dps2,
            "emg1_peak_v": self.emg1_peak_v,
            "emg1_mean_v": self.emg1_mean_v,
            "emg2_peak_v": self.emg2_peak_v,
            "emg2_mean_v": self.emg2_mean_v,
        }


def reconstruct_time(sample_index: int, dt_s: float = NOMINAL_DT_S) -> float:
    """Time of a received sample: index times the nominal interval."""
    if sample_index < 0:
        raise InputError(f"sample index must be non-negative, got {sample_index}")
    if dt_s <= 0:
        raise InputError(f"dt_s must be positive, got {dt_s}")
    return sample_index * dt_s


def detect_repetitions(
    angles_deg: Sequence[float],
    high_deg: float = DEFAULT_REP_HIGH_DEG,
    low_deg: float = DEFAULT_REP_LOW_DEG,
) -> tuple[int, list[RepSpan]]:
    """Hysteresis repetition counter.

    A repetition completes when the angle rises above ``high_deg`` and
    subsequently falls below ``low_deg``.  The signal is treated as
    starting below the low threshold, so a trace that opens mid-rep
    counts its first excursion.

    Returns
    -------
    (count, spans)
        Number of completed repetitions and their index spans.

    Raises
    ------
    ConfigurationError
        If ``high_deg <= low_deg``.
    InsufficientDataError
        If the series is empty.
    """
    if high_deg <= low_deg:
        raise ConfigurationError(
            f"high threshold ({high_deg}) must exceed low threshold ({low_deg})"
        )
    if len(angles_deg) == 0:
        raise InsufficientDataError("cannot detect repetitions in an empty series")
    spans: list[RepSpan] = []
    in_excursion = False
    crossed_high = False
    start = 0
    for i, angle in enumerate(angles_deg):
        if not in_excursion:
            if angle > low_deg:
                in_excursion = True
                crossed_high = angle > high_deg
                start = i
        else:
            if angle > high_deg:
                crossed_high = True
            if angle < low_deg:
                if crossed_high:
                    spans.append(RepSpan(start, i))
                in_excursion = False
    return len(spans), spans


class SessionRecord:
    """One trial: lifecycle, packet stream, derived kinematics, summary.

    Owned by a single ingestion loop while live; safe for concurrent
    reads once Stopped.
    """

    def __init__(
        self,
        metadata: SessionMetadata,
        dt_s: float = NOMINAL_DT_S,
        calibration_window_s: float = DEFAULT_CALIBRATION_WINDOW_S,
        rep_high_deg: float = DEFAULT_REP_HIGH_DEG,
        rep_low_deg: float = DEFAULT_REP_LOW_DEG,
    ) -> None:
        if dt_s <= 0:
            raise ConfigurationError(f"dt_s must be positive, got {dt_s}")
        if calibration_window_s < 0:
            raise ConfigurationError("calibration window must be non-negative")
        self.metadata = metadata
        self.dt_s = dt_s
        self.calibration_window_s = calibration_window_s
        self.rep_high_deg = rep_high_deg
        self.rep_low_deg = rep_low_deg
        self.state = SessionState.CREATED
        self.packets: list[tuple[int, TelemetryPacket]] = []
        self.angles_deg: list[float] = []  # offset-corrected, one per packet
        self.derived: list[KneeState] = []
        self.offset: CalibrationOffset | None = None
        self.summary: SessionSummary | None = None
        self.emg1 = EmgChannelState(EmgChannel.VASTUS_LATERALIS, alpha_emg=1.0)
        self.emg2 = EmgChannelState(EmgChannel.SEMITENDINOSUS, alpha_emg=1.0)
        self._cal_angles: list[float] = []

    # -- lifecycle ---------------------------------------------------------

    def _require(self, expected: SessionState) -> None:
        if self.state is not expected:
            raise StateError(
                f"operation requires state {expected.value}, "
                f"session is {self.state.value}"
            )

    def start_calibration(self) -> None:
        self._require(SessionState.CREATED)
        self.state = SessionState.CALIBRATING

    def start_recording(self) -> None:
        """Freeze the standing offset from the calibration window and start
        accepting trial packets.

        Raises
        ------
        InsufficientDataError
            If the calibration phase did not cover the configured window.
        """
        self._require(SessionState.CALIBRATING)
        if self.calibration_window_s > 0:
            self.offset = fusion.calibrate_offset(
                self._cal_angles, self.calibration_window_s, self.dt_s
            )
        self.state = SessionState.RECORDING

    def stop(self) -> None:
        """End the trial and recompute derivatives with the central stencil."""
        self._require(SessionState.RECORDING)
        self.state = SessionState.STOPPED
        if len(self.angles_deg) >= 3:
            self.derived = fusion.derive_kinematics(self.angles_deg, self.dt_s)

    # -- ingestion ---------------------------------------------------------

    @property
    def offset_deg(self) -> float:
        """Frozen offset once Recording; running estimate while Calibrating."""
        if self.offset is not None:
            return self.offset.offset_deg
        if self._cal_angles:
            return math.fsum(self._cal_angles) / len(self._cal_angles)
        return 0.0

    @property
    def calibration_sample_count(self) -> int:
        return len(self._cal_angles)

    def ingest(self, seq: int, packet: TelemetryPacket) -> float:
        """Feed one received packet; returns the offset-corrected angle.

        During Calibrating the angle accumulates into the zero offset;
        during Recording the packet joins the trial record.
        """
        if self.state is SessionState.CALIBRATING:
            self._cal_angles.append(packet.knee_angle_deg)
            return packet.knee_angle_deg - self.offset_deg
        if self.state is SessionState.RECORDING:
            corrected = packet.knee_angle_deg - self.offset_deg
            self.packets.append((seq, packet))
            self.angles_deg.append(corrected)
            # Counts beyond the ADC ceiling are stored as received but
            # clamped for the amplitude statistics.
            self.emg1 = emg_update(self.emg1, min(packet.emg1_counts, MAX_VALID_COUNTS))
            self.emg2 = emg_update(self.emg2, min(packet.emg2_counts, MAX_VALID_COUNTS))
            return corrected
        raise StateError(f"cannot ingest packets in state {self.state.value}")


def summarize(record: SessionRecord) -> SessionSummary:
    """Compute the trial summary from a Stopped record.

    Peak velocity and acceleration are reported as largest magnitudes;
    peak flexion is the maximum angle and range of motion the max-min
    spread.

    Raises
    ------
    StateError
        If the record is not Stopped.
    InsufficientDataError
        If fewer than 3 samples were recorded.
    """
    if record.state is not SessionState.STOPPED:
        raise StateError("summary requires a stopped session")
    if len(record.packets) < 3:
        raise InsufficientDataError(
            f"need at least 3 recorded samples, got {len(record.packets)}"
        )
    angles = [k.angle_deg for k in record.derived]
    velocities = [k.velocity_dps for k in record.derived]
    accels = [k.accel_dps2 for k in record.derived]
    rep_count, _ = detect_repetitions(
        angles, record.rep_high_deg, record.rep_low_deg
    )
    emg1 = channel_summary(record.emg1)
    emg2 = channel_summary(record.emg2)
    summary = SessionSummary(
        rep_count=rep_count,
        rom_deg=max(angles) - min(angles),
        peak_flexion_deg=max(angles),
        peak_velocity_dps=max(abs(v) for v in velocities),
        peak_accel_dps2=max(abs(a) for a in accels),
        emg1_peak_v=emg1.peak_volts,
        emg1_mean_v=emg1.mean_volts,
        emg2_peak_v=emg2.peak_volts,
        emg2_mean_v=emg2.mean_volts,
    )
    record.summary = summary
    return summary


def _fmt(value: float) -> str:
    """Reals are printed with 6 significant digits."""
    return format(float(value), ".6g")


def export_csv(record: SessionRecord, path: str | Path) -> tuple[Path, Path]:
    """Write the trial CSV and its JSON metadata sidecar.

    The CSV has one row per recorded packet with the columns
    ``t_s,knee_angle_deg,knee_vel_dps,knee_acc_dps2,emg1_counts,
    emg2_counts,seq`` (UTF-8, LF endings, 6 significant digits).  The
    sidecar shares the basename with a ``.meta.json`` suffix and carries
    the metadata and summary under their exact field names.

    Returns
    -------
    (csv_path, sidecar_path)

    Raises
    ------
    StateError
        If the record is not Stopped.
    ExportError
        On refused or failed writes.
    """
    if record.state is not SessionState.STOPPED:
        raise StateError("export requires a stopped session")
    if not record.metadata.subject_id.strip():
        raise ExportError("refusing to export a record without a subject id")
    if len(record.derived) != len(record.packets):
        raise InsufficientDataError(
            "record has no derived kinematics (fewer than 3 samples?)"
        )
    summary = record.summary or summarize(record)
    csv_path = Path(path)
    sidecar_path = csv_path.with_name(csv_path.stem + ".meta.json")
    try:
        with csv_path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i, ((seq, packet), knee) in enumerate(
                zip(record.packets, record.derived)
            ):
                fh.write(
                    f"{_fmt(reconstruct_time(i, record.dt_s))},"
                    f"{_fmt(knee.angle_deg)},{_fmt(knee.velocity_dps)},"
                    f"{_fmt(knee.accel_dps2)},{packet.emg1_counts},"
                    f"{packet.emg2_counts},{seq}\n"
                )
        sidecar = {
            "metadata": record.metadata.as_dict(),
            "summary": summary.as_dict(),
        }
        sidecar_path.write_text(
            json.dumps(sidecar, indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise ExportError(f"export failed: {exc}") from exc
    return csv_path, sidecar_path


class SessionStore:
    """Append-only, file-per-trial layout: one directory per subject,
    one CSV + sidecar pair per trial."""

    def __init__(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)

    def trial_paths(self, subject_id: str) -> list[Path]:
        subject_dir = self.data_dir / subject_id
        if not subject_dir.is_dir():
            return []
        return sorted(subject_dir.glob("trial_*.csv"))

    def save(self, record: SessionRecord) -> tuple[Path, Path]:
        """Export ``record`` under the next free trial number."""
        subject_dir = self.data_dir / record.metadata.subject_id
        subject_dir.mkdir(parents=True, exist_ok=True)
        index = len(self.trial_paths(record.metadata.subject_id)) + 1
        while (subject_dir / f"trial_{index:03d}.csv").exists():
            index += 1
        return export_csv(record, subject_dir / f"trial_{index:03d}.csv")
