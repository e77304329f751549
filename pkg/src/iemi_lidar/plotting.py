"""Figures written next to the CLI's CSV outputs.  Rendering is headless (Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import REMOVED_ALL  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cloud(cloud, path, title="point cloud", reference=None):
    """Top-down view of the valid points, coloured by height; ``reference`` is drawn faintly underneath."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if reference is not None and np.any(reference.valid):
        ref = reference.xyz()
        ax.scatter(ref[:, 0], ref[:, 1], s=0.5, c="0.8", label="benign")
    if np.any(cloud.valid):
        xyz = cloud.xyz()
        sc = ax.scatter(xyz[:, 0], xyz[:, 1], s=0.8, c=xyz[:, 2], cmap="viridis")
        fig.colorbar(sc, ax=ax, label="z [m]")
    else:
        ax.text(0.5, 0.5, "no valid points", transform=ax.transAxes, ha="center")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    _save(fig, path)


def plot_sweep(rows, path):
    """Hausdorff distance against carrier frequency; removed-all frequencies marked at the top."""
    fig, ax = plt.subplots(figsize=(8, 4))
    freqs = np.array([r.frequency for r in rows]) / 1e6
    finite = np.array([not isinstance(r.hausdorff, str) for r in rows], dtype=bool)
    dist = np.array([r.hausdorff if f else np.nan for r, f in zip(rows, finite)], dtype=float)
    ax.plot(freqs[finite], dist[finite], ".-", lw=0.8, label="Hausdorff")
    if np.any(~finite):
        top = np.nanmax(dist) if np.any(finite) and np.isfinite(np.nanmax(dist)) else 1.0
        ax.scatter(freqs[~finite], np.full(np.count_nonzero(~finite), top * 1.05 + 1e-3), marker="v",
                   color="tab:red", label=REMOVED_ALL)
    power_off = [r.frequency / 1e6 for r in rows if r.label.value == "PowerOff"]
    for f in power_off:
        ax.axvline(f, color="k", alpha=0.2, lw=0.6)
    ax.set_xlabel("carrier [MHz]")
    ax.set_ylabel("Hausdorff distance [m]")
    ax.legend(loc="best")
    _save(fig, path)


def plot_injection(targets, achieved, hits, path):
    """Intended vs achieved spoof ranges per target."""
    fig, ax = plt.subplots(figsize=(7, 4))
    idx = np.arange(len(targets))
    ax.plot(idx, [t.range for t in targets], "o", mfc="none", label="intended")
    achieved = np.asarray(achieved, dtype=float)
    hits = np.asarray(hits, dtype=bool)
    ax.plot(idx[hits], achieved[hits], "g.", label="hit")
    ax.plot(idx[~hits], achieved[~hits], "rx", label="miss")
    ax.set_xlabel("target")
    ax.set_ylabel("range [m]")
    ax.legend(loc="best")
    _save(fig, path)
