"""Static trial report: render figures next to an exported CSV.

Reads a trial export (plus its metadata sidecar when present) and draws
two PNGs into the same directory: stacked knee kinematics with detected
repetitions shaded, and the two EMG envelopes in volts.  Used by the
`report` and `demo` CLI paths; headless by construction.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .emg import counts_to_volts
from .errors import InputError
from .session import detect_repetitions

plt.rcParams.update(
    {
        "figure.figsize": (8.0, 6.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "axes.labelsize": 10,
        "xtick.labelsize": 9,
        "ytick.labelsize": 9,
        "legend.fontsize": 9,
    }
)

KINEMATICS_SUFFIX = "_kinematics.png"
EMG_SUFFIX = "_emg.png"


def load_trial(csv_path: str | Path) -> tuple[np.ndarray, dict]:
    """Exported trial as a named record array, plus sidecar contents."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise InputError(f"no such trial file: {csv_path}")
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    if data.size == 0 or data.dtype.names is None:
        raise InputError(f"trial file has no data rows: {csv_path}")
    sidecar = csv_path.with_name(csv_path.stem + ".meta.json")
    meta = {}
    if sidecar.is_file():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return np.atleast_1d(data), meta


def _shade_reps(ax, t: np.ndarray, angles: np.ndarray) -> int:
    try:
        count, spans = detect_repetitions(angles.tolist())
    except Exception:
        return 0
    for span in spans:
        ax.axvspan(t[span.start], t[span.end], color="tab:orange", alpha=0.12)
    return count


def render_report(
    csv_path: str | Path,
    out_dir: str | Path | None = None,
    dpi: int = 130,
) -> list[Path]:
    """Draw the report figures; returns the written paths."""
    csv_path = Path(csv_path)
    data, meta = load_trial(csv_path)
    out_dir = csv_path.parent if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = csv_path.stem
    t = data["t_s"]
    written = []

    fig, axes = plt.subplots(3, 1, sharex=True)
    axes[0].plot(t, data["knee_angle_deg"], color="tab:blue", lw=1.2)
    axes[0].set_ylabel("knee angle (deg)")
    rep_count = _shade_reps(axes[0], t, data["knee_angle_deg"])
    axes[1].plot(t, data["knee_vel_dps"], color="tab:green", lw=1.0)
    axes[1].set_ylabel("velocity (deg/s)")
    axes[2].plot(t, data["knee_acc_dps2"], color="tab:red", lw=0.9)
    axes[2].set_ylabel("accel (deg/s$^2$)")
    axes[2].set_xlabel("time (s)")
    title = f"{stem}: {rep_count} repetitions"
    summary = meta.get("summary") or {}
    if summary:
        title += (
            f", peak {summary.get('peak_flexion_deg', float('nan')):.1f} deg"
            f", ROM {summary.get('rom_deg', float('nan')):.1f} deg"
        )
    fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    kin_path = out_dir / (stem + KINEMATICS_SUFFIX)
    fig.savefig(kin_path, dpi=dpi)
    plt.close(fig)
    written.append(kin_path)

    fig, ax = plt.subplots(figsize=(8.0, 3.4))
    emg1_v = [counts_to_volts(min(int(c), 4095)) for c in data["emg1_counts"]]
    emg2_v = [counts_to_volts(min(int(c), 4095)) for c in data["emg2_counts"]]
    ax.plot(t, emg1_v, color="tab:purple", lw=1.0, label="ch1 vastus lateralis")
    ax.plot(t, emg2_v, color="tab:brown", lw=1.0, label="ch2 semitendinosus")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("EMG envelope (V)")
    ax.set_ylim(bottom=0.0)
    ax.legend(loc="upper right")
    fig.tight_layout()
    emg_path = out_dir / (stem + EMG_SUFFIX)
    fig.savefig(emg_path, dpi=dpi)
    plt.close(fig)
    written.append(emg_path)
    return written
