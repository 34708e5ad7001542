"""Figures for run and sweep outputs (rendered off-screen to PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from irvd.codec import DecodeResult, FlickSchedule
from irvd.panel import PanelGeometry
from irvd.steering import ControlTrace

_SAVE = {"dpi": 120, "metadata": {"Software": None}}


def plot_panel(counts: np.ndarray, bound: np.ndarray, geom: PanelGeometry, distance: float, path):
    """Side-by-side impact heatmap and bound-receptor map."""
    y0, y1, z0, z1 = geom.bounds
    fig, axes = plt.subplots(1, 2, figsize=(11, 3.4), constrained_layout=True)
    for ax, grid, title, cmap in ((axes[0], counts, "droplet impacts", "viridis"),
                                  (axes[1], bound, "bound receptors", "magma")):
        im = ax.imshow(grid, origin="lower", extent=(y0, y1, z0, z1), cmap=cmap, aspect="equal")
        ax.set_title(f"{title}, wall at {distance:g} m")
        ax.set_xlabel("y [m]")
        ax.set_ylabel("z [m]")
        fig.colorbar(im, ax=ax, shrink=0.85, label="count per tile")
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_trace(trace: ControlTrace, schedule: FlickSchedule, decoded: DecodeResult, theta_rx: float, path):
    """Reflected angle and received power over time, flick windows shaded."""
    fig, (ax_th, ax_p) = plt.subplots(2, 1, figsize=(9, 5), sharex=True, constrained_layout=True)
    ax_th.plot(trace.t, trace.theta_reflected, lw=0.6, color="tab:blue")
    ax_th.axhline(theta_rx, ls="--", lw=0.8, color="k", label="receiver")
    ax_th.set_ylabel("reflected angle [deg]")
    ax_th.legend(loc="lower right")
    ax_p.plot(trace.t, trace.power, lw=0.6, color="tab:red")
    ax_p.set_ylabel("normalized power")
    ax_p.set_xlabel("t [s]")
    for ev in schedule.events:
        for ax in (ax_th, ax_p):
            ax.axvspan(ev.start, ev.start + ev.width, color="0.8", zorder=0)
    for dip, bit in zip(decoded.dip_events, decoded.bits):
        ax_p.annotate(str(bit), (dip.start + dip.width / 2, 1.0), ha="center", va="bottom", fontsize=9)
    ax_p.set_title(f"decode: {decoded.status}", fontsize=9, loc="right")
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_distance_sweep(rows: list[dict], path):
    d = [r["distance_m"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(d, [r["hit_fraction"] for r in rows], "o-", label="panel hit fraction")
    ax.plot(d, [r["load_fraction"] for r in rows], "s-", label="receptor load fraction")
    ax.set_xlabel("wall distance [m]")
    ax.set_ylabel("fraction")
    ax.legend()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_noise_sweep(rows: list[dict], path):
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot([r["sigma"] for r in rows], [r["message_error_rate"] for r in rows], "o-")
    ax.set_xlabel("measurement noise sigma")
    ax.set_ylabel("message error rate")
    ax.set_ylim(-0.03, 1.03)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
