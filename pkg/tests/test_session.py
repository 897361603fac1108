"""Session lifecycle, rep detection, summary, and export tests."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from squatlink import errors, session
from squatlink.protocol import TelemetryPacket
from squatlink.session import (
    Leg,
    SessionMetadata,
    SessionRecord,
    SessionState,
    SessionStore,
    detect_repetitions,
    export_csv,
    reconstruct_time,
    summarize,
)


def _metadata(subject="S01"):
    return SessionMetadata(
        subject_id=subject, age_range="18-25", sex="unspecified",
        dominant_leg=Leg.RIGHT,
    )


def _record_from_angles(angles, cal_angles=None, dt_s=0.015):
    """Drive a record through the full lifecycle from plain angle lists."""
    cal_angles = [0.0] * 140 if cal_angles is None else cal_angles
    record = SessionRecord(_metadata(), dt_s=dt_s)
    record.start_calibration()
    for i, angle in enumerate(cal_angles):
        record.ingest(i, TelemetryPacket(float(angle), 100, 100))
    record.start_recording()
    for j, angle in enumerate(angles):
        record.ingest(len(cal_angles) + j, TelemetryPacket(float(angle), 100, 100))
    record.stop()
    return record


def brute_force_reps(angles, high, low):
    """Independent oracle: classify every sample into a zone (below the
    low threshold, between, above the high threshold), enumerate the
    zone-transition events, and count one rep per arrival in 'below'
    that was preceded by an 'above' since the previous 'below' phase.
    The pre-trace state counts as 'below'."""
    zones = []
    for a in angles:
        if a < low:
            zones.append("below")
        elif a > high:
            zones.append("above")
        else:
            zones.append("between")
    events = []
    state = "below"
    for zone in zones:
        if zone != state:
            events.append(zone)
            state = zone
    count = 0
    primed = False
    for event in events:
        if event == "above":
            primed = True
        elif event == "below" and primed:
            count += 1
            primed = False
    return count


def test_reconstruct_time_examples():
    assert reconstruct_time(0, 0.015) == 0.0
    assert reconstruct_time(666, 0.015) == pytest.approx(9.99)
    assert reconstruct_time(100, 0.015) == pytest.approx(1.5)


def test_reconstruct_time_is_definitionally_arithmetic():
    dt = 0.015
    for i in range(0, 5000, 37):
        assert reconstruct_time(i, dt) == i * dt
        # The exact identity is t = i * dt; consecutive spacing only
        # matches dt up to ulp-scale wobble that grows with t.
        diff = reconstruct_time(i + 1, dt) - reconstruct_time(i, dt)
        assert diff == pytest.approx(dt, abs=1e-12)


def test_reconstruct_time_validation():
    with pytest.raises(errors.InputError):
        reconstruct_time(-1, 0.015)
    with pytest.raises(errors.InputError):
        reconstruct_time(0, 0.0)


def test_detect_reps_constant_zero():
    count, spans = detect_repetitions([0.0] * 100)
    assert count == 0
    assert spans == []


def test_detect_reps_triangle_waves():
    one_rep = list(np.linspace(0, 120, 30)) + list(np.linspace(120, 0, 30))
    angles = one_rep * 5
    count, spans = detect_repetitions(angles)
    assert count == 5
    assert count == brute_force_reps(angles, 60.0, 20.0)
    assert len(spans) == 5
    for span in spans:
        chunk = angles[span.start : span.end + 1]
        assert max(chunk) > 60.0


def test_detect_reps_shallow_excursion_ignored():
    angles = list(np.linspace(0, 50, 20)) + list(np.linspace(50, 0, 20))
    count, _ = detect_repetitions(angles, high_deg=60.0, low_deg=20.0)
    assert count == 0


def test_detect_reps_trace_opening_mid_rep():
    # Starts above both thresholds; the first descent still counts.
    angles = [100.0, 90.0, 70.0, 30.0, 10.0, 5.0]
    count, _ = detect_repetitions(angles)
    assert count == 1


def test_detect_reps_validation():
    with pytest.raises(errors.ConfigurationError):
        detect_repetitions([0.0], high_deg=20.0, low_deg=60.0)
    with pytest.raises(errors.InsufficientDataError):
        detect_repetitions([])


@given(
    st.lists(st.floats(-20.0, 150.0), min_size=1, max_size=300),
    st.floats(30.0, 100.0),
    st.floats(5.0, 25.0),
)
def test_detect_reps_agrees_with_brute_force(angles, high, low):
    count, _ = detect_repetitions(angles, high, low)
    assert count == brute_force_reps(angles, high, low)


def test_lifecycle_strict_chain():
    record = SessionRecord(_metadata())
    assert record.state is SessionState.CREATED
    with pytest.raises(errors.StateError):
        record.start_recording()
    with pytest.raises(errors.StateError):
        record.stop()
    with pytest.raises(errors.StateError):
        record.ingest(0, TelemetryPacket(0.0, 0, 0))
    record.start_calibration()
    with pytest.raises(errors.StateError):
        record.start_calibration()
    for i in range(140):
        record.ingest(i, TelemetryPacket(5.0, 0, 0))
    record.start_recording()
    with pytest.raises(errors.StateError):
        record.start_calibration()
    record.ingest(140, TelemetryPacket(5.0, 0, 0))
    record.stop()
    with pytest.raises(errors.StateError):
        record.ingest(141, TelemetryPacket(5.0, 0, 0))
    with pytest.raises(errors.StateError):
        record.stop()


def test_recording_before_window_filled_is_refused():
    record = SessionRecord(_metadata())
    record.start_calibration()
    for i in range(10):
        record.ingest(i, TelemetryPacket(1.0, 0, 0))
    with pytest.raises(errors.InsufficientDataError):
        record.start_recording()


def test_calibration_zeroes_standing_offset():
    record = _record_from_angles([5.0, 90.0, 5.0], cal_angles=[5.0] * 140)
    assert record.offset is not None
    assert record.offset.offset_deg == pytest.approx(5.0)
    assert record.angles_deg == pytest.approx([0.0, 85.0, 0.0])


def test_summary_sinusoid_velocity_oracle():
    amplitude, freq, dt = 60.0, 0.25, 0.015
    t = np.arange(0, 12.0, dt)
    # Shift up so the wave lives in flexion-positive territory.
    angles = amplitude + amplitude * np.sin(2 * np.pi * freq * t)
    record = _record_from_angles(angles)
    summary = summarize(record)
    assert summary.peak_velocity_dps == pytest.approx(
        2 * np.pi * freq * amplitude, rel=0.02
    )
    assert summary.rom_deg == pytest.approx(2 * amplitude, rel=0.01)
    assert summary.peak_flexion_deg == pytest.approx(2 * amplitude, rel=0.01)


def test_summary_constant_record():
    record = _record_from_angles([7.0] * 50, cal_angles=[7.0] * 140)
    summary = summarize(record)
    assert summary.rep_count == 0
    assert summary.rom_deg == pytest.approx(0.0, abs=1e-9)
    assert summary.peak_velocity_dps == pytest.approx(0.0, abs=1e-9)


def test_summary_emg_peak_dominates_mean():
    record = _record_from_angles([0.0] * 60)
    summary = summarize(record)
    assert summary.emg1_peak_v >= summary.emg1_mean_v
    assert summary.emg2_peak_v >= summary.emg2_mean_v


def test_summary_requires_stopped_and_samples():
    record = SessionRecord(_metadata())
    with pytest.raises(errors.StateError):
        summarize(record)
    short = _record_from_angles([1.0, 2.0])
    with pytest.raises(errors.InsufficientDataError):
        summarize(short)


def test_metadata_requires_subject_id():
    with pytest.raises(errors.InputError):
        SessionMetadata(
            subject_id="  ", age_range="18-25", sex="f", dominant_leg=Leg.LEFT
        )


def test_export_csv_layout(tmp_path):
    angles = list(np.linspace(0, 100, 80))
    record = _record_from_angles(angles)
    csv_path, meta_path = export_csv(record, tmp_path / "trial.csv")
    raw = csv_path.read_bytes()
    assert b"\r" not in raw
    text = raw.decode("utf-8")
    lines = text.splitlines()
    assert lines[0] == "t_s,knee_angle_deg,knee_vel_dps,knee_acc_dps2,emg1_counts,emg2_counts,seq"
    assert len(lines) == 1 + len(record.packets)
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[-1] == "140"  # seq continues from the calibration stream

    meta = json.loads(meta_path.read_text())
    assert set(meta) == {"metadata", "summary"}
    assert meta["metadata"]["subject_id"] == "S01"
    assert meta["metadata"]["dominant_leg"] == "right"
    assert set(meta["summary"]) == {
        "rep_count", "rom_deg", "peak_flexion_deg", "peak_velocity_dps",
        "peak_accel_dps2", "emg1_peak_v", "emg1_mean_v", "emg2_peak_v",
        "emg2_mean_v",
    }


def test_export_round_trips_at_printed_precision(tmp_path):
    rng = np.random.default_rng(5)
    angles = rng.uniform(-10, 130, 120)
    record = _record_from_angles(angles)
    csv_path, _ = export_csv(record, tmp_path / "trial.csv")
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    for stored, parsed in zip(record.angles_deg, data["knee_angle_deg"]):
        assert format(stored, ".6g") == format(parsed, ".6g")


def test_export_requires_stopped(tmp_path):
    record = SessionRecord(_metadata())
    with pytest.raises(errors.StateError):
        export_csv(record, tmp_path / "x.csv")


def test_export_failure_is_reported(tmp_path):
    record = _record_from_angles([0.0, 10.0, 0.0, 5.0])
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(errors.ExportError):
        export_csv(record, target)


def test_store_appends_independent_trials(tmp_path):
    store = SessionStore(tmp_path)
    paths = []
    for _ in range(5):
        record = _record_from_angles(list(np.linspace(0, 120, 60)))
        csv_path, meta_path = store.save(record)
        assert meta_path.exists()
        paths.append(csv_path)
    names = [p.name for p in paths]
    assert names == [f"trial_{i:03d}.csv" for i in range(1, 6)]
    assert store.trial_paths("S01") == paths
    assert store.trial_paths("nobody") == []


def test_rom_covers_every_rep_span():
    rng = np.random.default_rng(9)
    angles = np.concatenate(
        [amp * np.sin(np.linspace(0, np.pi, 40)) for amp in rng.uniform(70, 130, 4)]
    )
    record = _record_from_angles(angles)
    summary = summarize(record)
    _, spans = detect_repetitions(record.angles_deg)
    for span in spans:
        chunk = record.angles_deg[span.start : span.end + 1]
        assert summary.rom_deg >= max(chunk) - min(chunk) - 1e-9
