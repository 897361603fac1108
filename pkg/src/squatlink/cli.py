"""Command-line front end.

Subcommands:
  simulate   stream a synthetic trial over UDP (the device side)
  serve      run the ingestion service + HTTP control/live API
  replay     push a captured frame dump through a full session offline
  report     render figures for an exported trial CSV
  demo       simulate, ingest, export, and report in one process
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import protocol
from .errors import SquatLinkError
from .fusion import DEFAULT_FILTER_ALPHA
from .emg import DEFAULT_EMG_ALPHA
from .session import Leg, SessionMetadata, SessionStore
from .simulator import NoiseModel, SquatProfile, device_frames, run_device

LISTEN_ENV_VAR = "SQUATLINK_LISTEN"
HTTP_PORT_ENV_VAR = "SQUATLINK_HTTP_PORT"
DATA_DIR_ENV_VAR = "SQUATLINK_DATA_DIR"
DEFAULT_DATA_DIR = "squatlink-data"


def _host_port(text: str) -> tuple[str, int]:
    """Parse 'host:port' or 'host' (default port)."""
    host, _, port = text.partition(":")
    if not host:
        raise argparse.ArgumentTypeError(f"bad endpoint: {text!r}")
    if not port:
        return host, protocol.default_port()
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None


def _metadata_from_args(args) -> SessionMetadata:
    return SessionMetadata(
        subject_id=args.subject,
        age_range=args.age_range,
        sex=args.sex,
        dominant_leg=Leg(args.leg),
    )


def _profile_from_args(args) -> SquatProfile:
    return SquatProfile(
        n_reps=args.reps,
        trial_s=args.trial_s,
        peak_flexion_deg=args.peak_deg,
        standing_s=args.standing_s,
        hold_s=args.hold_s,
        rng_seed=args.seed,
    )


def _noise_from_args(args) -> NoiseModel:
    return NoiseModel.zero() if args.no_noise else NoiseModel()


def _add_profile_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reps", type=int, default=5, help="repetitions (default 5)")
    p.add_argument("--trial-s", type=float, default=10.0, help="trial length, s")
    p.add_argument("--peak-deg", type=float, default=120.0,
                   help="target peak flexion, degrees")
    p.add_argument("--standing-s", type=float, default=2.0,
                   help="standing lead-in used for calibration, s")
    p.add_argument("--hold-s", type=float, default=0.2,
                   help="hold at peak depth, s")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--no-noise", action="store_true",
                   help="ideal sensors (no noise, bias, or EMG floor)")
    p.add_argument("--alpha", type=float, default=DEFAULT_FILTER_ALPHA,
                   help="complementary filter gyro weight")
    p.add_argument("--emg-alpha", type=float, default=DEFAULT_EMG_ALPHA,
                   help="EMG envelope smoothing factor")


def _add_metadata_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subject", default="S01", help="anonymized subject id")
    p.add_argument("--age-range", default="18-25")
    p.add_argument("--sex", default="unspecified")
    p.add_argument("--leg", choices=[leg.value for leg in Leg], default="right",
                   help="dominant leg")


def _cmd_simulate(args) -> int:
    config = protocol.LinkConfig(
        drop_prob=args.drop_prob, jitter_s=args.jitter_s, seed=args.seed
    )
    host, port = args.dest
    transport = protocol.UdpTransport.sender(host, port, config)
    try:
        stats = run_device(
            _profile_from_args(args),
            _noise_from_args(args),
            transport,
            realtime=not args.fast,
            dump_path=args.dump,
            alpha=args.alpha,
            emg_alpha=args.emg_alpha,
        )
    finally:
        transport.close()
    print(
        f"sent {stats.sent} frames to {host}:{port} "
        f"(dropped {stats.dropped} at the link)"
    )
    if args.dump:
        print(f"pre-loss frame dump: {args.dump}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import IngestServer, TelemetryIngest, build_app

    host, port = args.listen
    if args.ui_dir is not None and not Path(args.ui_dir).is_dir():
        print(f"error: ui directory not found: {args.ui_dir}", file=sys.stderr)
        return 1
    store = SessionStore(args.data_dir)
    core = TelemetryIngest(store=store)
    transport = protocol.UdpTransport.receiver(host, port)
    server = IngestServer(core, transport)
    server.start()
    app = build_app(server, ui_dir=args.ui_dir)
    print(
        f"listening for frames on udp://{host}:{transport.bound_port}, "
        f"control api on http://{args.http_host}:{args.http_port}, "
        f"data in {args.data_dir}"
    )
    try:
        uvicorn.run(app, host=args.http_host, port=args.http_port,
                    log_level="warning")
    finally:
        server.stop()
        transport.close()
    return 0


def _cmd_replay(args) -> int:
    from .report import render_report
    from .service import TelemetryIngest

    data = Path(args.dump).read_bytes()
    store = SessionStore(args.data_dir)
    core = TelemetryIngest(store=store)
    session_id = core.replay(
        data, _metadata_from_args(args), calibration_window_s=args.cal_s
    )
    summary = core.summary(session_id)
    csv_path, meta_path = core.export(session_id)
    print(json.dumps(summary.as_dict(), indent=2))
    print(f"exported {csv_path} and {meta_path}")
    if args.report:
        for figure in render_report(csv_path):
            print(f"wrote {figure}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_report

    for figure in render_report(args.csv, args.out_dir, dpi=args.dpi):
        print(f"wrote {figure}")
    return 0


def _cmd_demo(args) -> int:
    from .report import render_report
    from .service import TelemetryIngest

    frames = device_frames(_profile_from_args(args), _noise_from_args(args),
                           alpha=args.alpha, emg_alpha=args.emg_alpha)
    transport = protocol.LoopbackTransport(
        protocol.LinkConfig(drop_prob=args.drop_prob, seed=args.seed)
    )
    received = []
    for frame in frames:
        if transport.send(frame):
            received.append(transport.recv(timeout=0.0))
    transport.close()
    store = SessionStore(args.data_dir)
    core = TelemetryIngest(store=store)
    # The zeroing window must match the simulated standing lead-in, or
    # the host would average early flexion into its offset.
    session_id = core.replay(
        b"".join(received), _metadata_from_args(args),
        calibration_window_s=args.standing_s,
    )
    summary = core.summary(session_id)
    csv_path, _ = core.export(session_id)
    print(f"link: sent {transport.stats.sent}, "
          f"dropped {transport.stats.dropped}, "
          f"parsed {core.parser.stats.received}")
    print(json.dumps(summary.as_dict(), indent=2))
    print(f"exported {csv_path}")
    for figure in render_report(csv_path):
        print(f"wrote {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squatlink",
        description="wireless EMG + IMU squat analysis chain (simulated)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="stream a synthetic trial over UDP")
    _add_profile_flags(p)
    p.add_argument("--drop-prob", type=float, default=0.0,
                   help="link loss probability")
    p.add_argument("--jitter-s", type=float, default=0.0,
                   help="max per-frame send jitter, s")
    p.add_argument("--dest", type=_host_port,
                   default=("127.0.0.1", protocol.default_port()),
                   help="receiver endpoint host:port")
    pacing = p.add_mutually_exclusive_group()
    pacing.add_argument("--realtime", action="store_true", default=True,
                        help="pace frames at the 15 ms loop (default)")
    pacing.add_argument("--fast", action="store_true",
                        help="send as fast as possible")
    p.add_argument("--dump", metavar="FILE",
                   help="also write the pre-loss frame stream to FILE")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("serve", help="run the ingestion + API service")
    p.add_argument("--listen", type=_host_port,
                   default=_host_port(os.environ.get(
                       LISTEN_ENV_VAR, f"127.0.0.1:{protocol.default_port()}")),
                   help=f"datagram endpoint (env {LISTEN_ENV_VAR})")
    p.add_argument("--http-port", type=int,
                   default=int(os.environ.get(HTTP_PORT_ENV_VAR, "8000")),
                   help=f"control API port (env {HTTP_PORT_ENV_VAR})")
    p.add_argument("--http-host", default="127.0.0.1")
    p.add_argument("--data-dir",
                   default=os.environ.get(DATA_DIR_ENV_VAR, DEFAULT_DATA_DIR),
                   help=f"trial export directory (env {DATA_DIR_ENV_VAR})")
    p.add_argument("--ui-dir", default=None,
                   help="serve a built dashboard from this directory at /")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("replay", help="ingest a frame dump offline")
    p.add_argument("dump", help="frame dump written by simulate --dump")
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    p.add_argument("--cal-s", type=float, default=2.0,
                   help="zeroing window; match the dump's standing lead-in")
    p.add_argument("--report", action="store_true",
                   help="also render figures next to the export")
    _add_metadata_flags(p)
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("report", help="render figures for a trial CSV")
    p.add_argument("csv", help="exported trial CSV")
    p.add_argument("--out-dir", default=None,
                   help="figure directory (default: beside the CSV)")
    p.add_argument("--dpi", type=int, default=130)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("demo", help="full chain in one process, no sockets")
    _add_profile_flags(p)
    p.add_argument("--drop-prob", type=float, default=0.0)
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    _add_metadata_flags(p)
    p.set_defaults(fn=_cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SquatLinkError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
