"""Figure rendering for the report paths. Everything draws to files via
the Agg backend; no interactive windows."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .optim import Trajectory
from .rates import RateSeries


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_trajectory(traj: Trajectory, outdir, prefix: str) -> list[str]:
    """Loss and iterate-norm curves against iteration (log-x)."""
    keep = traj.times >= 1
    ts = traj.times[keep].astype(float)
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(ts, np.maximum(traj.losses[keep], 1e-320))
    ax.set_xlabel("t")
    ax.set_ylabel("training loss")
    written.append(_finish(fig, os.path.join(outdir, f"{prefix}_loss.png")))

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(ts, np.linalg.norm(traj.iterates[keep], axis=1))
    ax.set_xlabel("t")
    ax.set_ylabel("||w(t)||")
    written.append(_finish(fig, os.path.join(outdir, f"{prefix}_norm.png")))
    return written


def render_rates(series: RateSeries, outdir, prefix: str) -> list[str]:
    """One panel per diagnostic, in the transform used for its verdict."""
    ts = series.times
    logts = np.log(ts)
    panels = [
        ("scaled_loss", series.scaled_loss, "t * L(w(t))"),
        ("margin_gap", series.margin_gap * logts, "margin gap * log t"),
        ("angle_gap", series.angle_gap * logts**2, "angle gap * log^2 t"),
        ("norm_minus_log", series.norm_minus_log, "||w(t)|| - ||w_hat|| log t"),
    ]
    if series.residual_norm is not None:
        panels.append(("residual_norm", series.residual_norm, "||w(t) - w_hat log t - w_tilde||"))
    if series.chain_residual_norm is not None:
        panels.append(("chain_residual_norm", series.chain_residual_norm, "chain residual"))

    written = []
    for name, vals, label in panels:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        mask = np.isfinite(vals)
        ax.semilogx(ts[mask], vals[mask])
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        written.append(_finish(fig, os.path.join(outdir, f"{prefix}_{name}.png")))
    return written


def render_comparison(rows: list[dict], outdir, prefix: str) -> list[str]:
    """Bar chart of final direction gaps per optimizer variant."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = [r["variant"] for r in rows]
    gaps = [r["final_direction_gap"] for r in rows]
    ax.bar(names, gaps)
    ax.set_yscale("log")
    ax.set_ylabel("final direction gap")
    return [_finish(fig, os.path.join(outdir, f"{prefix}_direction_gap.png"))]
