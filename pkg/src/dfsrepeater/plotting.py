"""Figures rendered next to the CSV output of the sweep experiments."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CHSH_LINE = 0.78


def _finish(fig, ax, path):
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _group(rows, *keys):
    groups = defaultdict(list)
    for row in rows:
        groups[tuple(row[k] for k in keys)].append(row)
    return groups


def plot_fidelity_vs_distance(rows, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    for (n,), pts in sorted(_group(rows, "num_links").items()):
        ax.plot([r["distance_km"] for r in pts], [r["fidelity"] for r in pts],
                label=f"{n} links")
    ax.axhline(CHSH_LINE, color="k", ls="--", lw=1)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("fidelity")
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path)


def plot_distribution_times(rows, path, title=None, budget_s=1.0):
    fig, ax = plt.subplots(figsize=(6, 4))
    styles = {"v1": "-", "v2": ":", "direct": "--"}
    for (curve, n), pts in sorted(_group(rows, "curve", "num_links").items()):
        label = "direct" if curve == "direct" else f"{curve}, {n} links"
        ax.semilogy([r["distance_km"] for r in pts], [r["time_s"] for r in pts],
                    styles.get(curve, "-"), label=label)
    ax.axhline(budget_s, color="grey", lw=0.8)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("distribution time (s)")
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path)


def plot_direct(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy([r["distance_km"] for r in rows], [r["expected_time_s"] for r in rows],
                label="direct transmission")
    ax.axhline(1.0, color="grey", lw=0.8)
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("expected time (s)")
    return _finish(fig, ax, path)
