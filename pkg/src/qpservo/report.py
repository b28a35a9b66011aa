"""Figure rendering for recorded traces.

Given a trace CSV at PATH, the companion figures land next to it as
PATH with the suffixes `.distances.png`, `.manipulability.png` and
`.velocities.png`. Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_report(traces, out_csv_path) -> list[Path]:
    """Render the standard figure set alongside a trace CSV; returns the
    figure paths."""
    stem = Path(out_csv_path)
    t = np.array([tr.t for tr in traces])
    produced = []

    fig, ax = plt.subplots(figsize=(7, 4))
    n_obs = traces[0].clearances.size
    for j in range(n_obs):
        ax.plot(t, [tr.clearances[j] for tr in traces], label=f"obstacle {j} clearance")
    ax.plot(t, [tr.pos_err for tr in traces], "k--", label="goal distance")
    if n_obs:
        ax.axhline(0.05, color="r", lw=0.8, ls=":", label="stopping distance")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("distance [m]")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    path = stem.with_suffix(stem.suffix + ".distances.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    produced.append(path)

    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(t, [tr.manipulability for tr in traces])
    ax.set_xlabel("time [s]")
    ax.set_ylabel("manipulability")
    ax.grid(alpha=0.3)
    path = stem.with_suffix(stem.suffix + ".manipulability.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    produced.append(path)

    fig, ax = plt.subplots(figsize=(7, 3))
    qd = np.array([tr.qd for tr in traces])
    for j in range(qd.shape[1]):
        ax.plot(t, qd[:, j], lw=0.9, label=f"qd{j}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("joint velocity [rad/s]")
    ax.legend(fontsize=7, ncol=4)
    ax.grid(alpha=0.3)
    path = stem.with_suffix(stem.suffix + ".velocities.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    produced.append(path)

    return produced
