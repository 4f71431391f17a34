"""Static SVG charts of run outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv_columns  # noqa: E402

plt.rcParams["svg.hashsalt"] = "platoonsim"

_SVG_META = {"Date": None}


class EmptyInputError(ValueError):
    """An input CSV is missing or holds no data rows."""


def _floats(cells) -> np.ndarray:
    return np.array([float(c) if c != "" else np.nan for c in cells], dtype=float)


def _load(path: Path) -> dict[str, list[str]]:
    if not path.is_file():
        raise EmptyInputError(f"{path} not found")
    cols = read_csv_columns(path)
    if not cols or not next(iter(cols.values())):
        raise EmptyInputError(f"{path} has no data rows")
    return cols


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_trace(trace_csv, out_dir) -> list[Path]:
    """velocity.svg (speed over time per vehicle) and trajectory.svg (x-y paths)."""
    cols = _load(Path(trace_csv))
    out_dir = Path(out_dir)
    t = _floats(cols["t"])
    vid = np.array([int(c) for c in cols["vehicle_id"]])
    x, y, v = _floats(cols["x"]), _floats(cols["y"]), _floats(cols["v"])

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for i in np.unique(vid):
        m = vid == i
        ax.plot(t[m], v[m], lw=1.0, label=f"vehicle {i}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("velocity [m/s]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    paths = [_save(fig, out_dir / "velocity.svg")]

    fig, ax = plt.subplots(figsize=(6, 6))
    for i in np.unique(vid):
        m = vid == i
        ax.plot(x[m], y[m], lw=1.0, label=f"vehicle {i}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "trajectory.svg"))
    return paths


def plot_received(received_csv, out_dir) -> Path:
    """received_signal.svg: true leader speed against what vehicle 2 received."""
    cols = _load(Path(received_csv))
    t, true_v, recv = _floats(cols["t"]), _floats(cols["true_v"]), _floats(cols["received_v"])
    labels = np.array(cols["channel"])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    first = labels[0]
    m = labels == first
    ax.plot(t[m], true_v[m], color="k", lw=1.0, label="true leader velocity")
    for label in dict.fromkeys(labels):
        m = labels == label
        ax.step(t[m], recv[m], where="post", lw=1.0, label=f"received ({label})")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("velocity [m/s]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "received_signal.svg")
