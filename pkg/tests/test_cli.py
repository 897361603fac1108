"""Command-line round trips: dump/replay, demo chain, report rendering."""

import pytest

from squatlink.cli import build_parser, main
from squatlink.protocol import UdpTransport


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_simulate_then_replay_round_trip(tmp_path, capsys):
    dump = tmp_path / "frames.bin"
    receiver = UdpTransport.receiver("127.0.0.1", port=0)
    try:
        rc = main([
            "simulate", "--fast", "--trial-s", "5.0", "--no-noise",
            "--dump", str(dump),
            "--dest", f"127.0.0.1:{receiver.bound_port}",
        ])
    finally:
        receiver.close()
    assert rc == 0
    assert "sent 333 frames" in capsys.readouterr().out
    assert dump.stat().st_size == 333 * 14

    data_dir = tmp_path / "data"
    rc = main([
        "replay", str(dump), "--data-dir", str(data_dir),
        "--subject", "S10", "--report",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert '"rep_count": 5' in out
    assert (data_dir / "S10" / "trial_001.csv").exists()
    assert (data_dir / "S10" / "trial_001.meta.json").exists()
    assert (data_dir / "S10" / "trial_001_kinematics.png").exists()
    assert (data_dir / "S10" / "trial_001_emg.png").exists()


def test_demo_full_chain(tmp_path, capsys):
    rc = main([
        "demo", "--trial-s", "5.0", "--no-noise",
        "--data-dir", str(tmp_path), "--subject", "D01",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "link: sent 333, dropped 0, parsed 333" in out
    assert '"rep_count": 5' in out
    assert (tmp_path / "D01" / "trial_001.csv").exists()
    assert (tmp_path / "D01" / "trial_001_kinematics.png").exists()
    assert (tmp_path / "D01" / "trial_001_emg.png").exists()


def test_demo_with_loss_still_exports(tmp_path, capsys):
    rc = main([
        "demo", "--trial-s", "6.0", "--drop-prob", "0.2", "--seed", "4",
        "--data-dir", str(tmp_path), "--subject", "D02",
    ])
    assert rc == 0
    assert (tmp_path / "D02" / "trial_001.csv").exists()


def test_report_to_custom_directory(tmp_path, capsys):
    # Short lead-in: demo must pass the matching zeroing window through.
    rc = main([
        "demo", "--trial-s", "4.0", "--standing-s", "1.0", "--no-noise",
        "--data-dir", str(tmp_path), "--subject", "D03",
    ])
    assert rc == 0
    assert '"rep_count": 5' in capsys.readouterr().out
    figs = tmp_path / "figs"
    rc = main([
        "report", str(tmp_path / "D03" / "trial_001.csv"),
        "--out-dir", str(figs), "--dpi", "72",
    ])
    assert rc == 0
    assert (figs / "trial_001_kinematics.png").exists()
    assert (figs / "trial_001_emg.png").exists()


def test_replay_missing_dump_fails_cleanly(tmp_path, capsys):
    rc = main(["replay", str(tmp_path / "missing.bin")])
    assert rc == 1
    assert "error" in capsys.readouterr().err
