"""Matplotlib figure rendering for pipeline reports.

Figures are written as SVG with a fixed hash salt and no embedded creation
date, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .batch import PipelineResult
from .tlsfit import qi_at

_SAVEFIG_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _new_figure(figsize=(6.0, 4.2)):
    plt.rcParams["svg.hashsalt"] = "resq"
    return plt.subplots(figsize=figsize, dpi=100)


def save_qi_vs_photon_figure(result: PipelineResult, path) -> Path:
    """Qi vs mean photon number per resonator, with the fitted model curve."""
    fig, ax = _new_figure()
    cmap = matplotlib.colormaps["tab10"]
    idx = 0
    for sample in result.samples:
        for r in sample.resonators:
            color = cmap(idx % 10)
            n = np.array([p.n_mean for p in r.points])
            qi = np.array([p.qi for p in r.points])
            sig = np.array([p.qi_sigma for p in r.points])
            label = f"{sample.sample_id}/{r.resonator_id}"
            ax.errorbar(n, qi, yerr=np.where(sig > 0, sig, np.nan), fmt="o", ms=4, lw=1, color=color, label=label)
            n_grid = np.geomspace(n.min(), n.max(), 200)
            ax.plot(n_grid, [qi_at(v, r.fit) for v in n_grid], "-", lw=1.2, color=color)
            idx += 1
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("internal quality factor")
    if idx <= 12:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KWARGS)
    plt.close(fig)
    return Path(path)


def save_loss_box_figure(result: PipelineResult, path) -> Path:
    """Box plot of the fitted TLS loss scale, one box per sample.

    Whiskers span the full min-max range so the box geometry matches the
    five-number summary reported in the tables.
    """
    fig, ax = _new_figure()
    data = []
    labels = []
    for sample in result.samples:
        data.append([r.fit.params.f_delta_tls0 for r in sample.resonators])
        labels.append(sample.sample_id)
    if data:
        ax.boxplot(data, tick_labels=labels, whis=(0, 100), showfliers=False)
        for i, values in enumerate(data, start=1):
            ax.plot(np.full(len(values), i), values, "o", ms=3, alpha=0.7, color="C0")
    ax.set_ylabel("TLS loss scale")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KWARGS)
    plt.close(fig)
    return Path(path)
