"""Figure rendering for the report path: coverage curves, top-down map
views, and benchmark comparisons.  All functions write PNG files; nothing
is ever shown interactively."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid_map import FREE, OCCUPIED, UNKNOWN, VoxelMap, WorldModel
from .roadmap import Roadmap

_SAVE_KW = dict(dpi=130, bbox_inches="tight", metadata={"Software": None})


def save_coverage_figure(series, path, title="coverage", target=None) -> None:
    """Coverage fraction against total mission time for one run."""
    ts = [p[0] for p in series]
    cov = [p[1] for p in series]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, cov, marker="o", ms=3, lw=1.5, color="tab:blue")
    if target is not None:
        ax.axhline(target, color="tab:red", lw=0.8, ls="--",
                   label=f"target {target:.0%}")
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("total mission time [s]")
    ax.set_ylabel("coverage fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.set_title(title, fontsize=10)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_topdown_figure(world: WorldModel, vmap: VoxelMap, G: Roadmap | None,
                        path, title="map") -> None:
    """Top-down view: truth obstacles, column-wise map knowledge, and the
    roadmap layers (aerial nodes/edges over ground ones)."""
    r = world.resolution
    ext = world.extent()
    known = (vmap.state != UNKNOWN).mean(axis=2)  # fraction of column mapped
    occ = (world.truth == OCCUPIED).any(axis=2)

    fig, ax = plt.subplots(figsize=(6.5, 6))
    ax.imshow(known.T, origin="lower", extent=(0, ext[0], 0, ext[1]),
              cmap="Blues", vmin=0, vmax=1, alpha=0.75)
    oy, ox = np.nonzero(occ.T)
    ax.scatter((ox + 0.5) * r, (oy + 0.5) * r, s=2.5, c="k", marker="s",
               label="obstacle")

    if G is not None and G.nodes:
        for kind, color in (("ugv", "tab:green"), ("uav", "tab:purple")):
            for e in G.edges:
                if e.kind != kind:
                    continue
                pa = G.nodes[e.a].position()
                pb = G.nodes[e.b].position()
                ax.plot([pa[0], pb[0]], [pa[1], pb[1]], color=color, lw=0.5,
                        alpha=0.5, zorder=2)
            pos = G.positions(kind)
            if len(pos):
                ax.scatter(pos[:, 0], pos[:, 1], s=6, color=color, zorder=3,
                           label=f"{kind} nodes")
    ax.set_xlim(0, ext[0])
    ax.set_ylim(0, ext[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title, fontsize=10)
    ax.legend(loc="upper right", fontsize=7, framealpha=0.9)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_benchmark_figure(series_by_strategy: dict, path, title="benchmark"
                          ) -> None:
    """Mean coverage curve per strategy with a +-1 std band over seeds.

    ``series_by_strategy`` maps strategy name to a list (one entry per
    seed) of (time, coverage) step curves; curves are resampled onto a
    common time axis with zero-order hold.
    """
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    colors = {"proposed": "tab:blue", "terra_seq": "tab:orange",
              "uav_only": "tab:green"}
    t_end = max((run[-1][0] for runs in series_by_strategy.values()
                 for run in runs if run), default=1.0)
    grid = np.linspace(0.0, t_end, 220)
    for strategy, runs in series_by_strategy.items():
        curves = []
        for run in runs:
            ts = np.array([p[0] for p in run])
            cov = np.array([p[1] for p in run])
            idx = np.searchsorted(ts, grid, side="right") - 1
            idx = np.clip(idx, 0, len(cov) - 1)
            curves.append(cov[idx])
        mat = np.vstack(curves)
        mean = mat.mean(axis=0)
        std = mat.std(axis=0)
        color = colors.get(strategy)
        ax.plot(grid, mean, lw=1.8, label=strategy, color=color)
        ax.fill_between(grid, mean - std, mean + std, alpha=0.2, color=color)
    ax.set_xlabel("total mission time [s]")
    ax.set_ylabel("coverage fraction")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    ax.set_title(title, fontsize=10)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
