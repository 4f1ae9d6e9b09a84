"""Render precision/success figures next to the delimited report output."""

import os
from typing import Sequence as Seq

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluate import (
    OVERALL_SCOPE,
    PRECISION_THRESHOLDS,
    SUCCESS_THRESHOLDS,
    EvalReport,
)


def render_ope_plots(reports: Seq[EvalReport], out_dir: str,
                     scope: str = OVERALL_SCOPE) -> list:
    """Write precision_plot.png and success_plot.png for one scope; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    for r in sorted(reports, key=lambda r: -r.scopes[scope].prc20):
        sr = r.scopes[scope]
        ax.plot(PRECISION_THRESHOLDS, sr.precision,
                label=f"{r.tracker} [{sr.prc20:.3f}]")
    ax.set_xlabel("Location error threshold (px)")
    ax.set_ylabel("Precision")
    ax.set_title(f"Precision plot ({scope})")
    ax.set_xlim(0, 50)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    path = os.path.join(out_dir, "precision_plot.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    for r in sorted(reports, key=lambda r: -r.scopes[scope].auc):
        sr = r.scopes[scope]
        ax.plot(SUCCESS_THRESHOLDS, sr.success,
                label=f"{r.tracker} [{sr.auc:.3f}]")
    ax.set_xlabel("Overlap threshold")
    ax.set_ylabel("Success rate")
    ax.set_title(f"Success plot ({scope})")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    path = os.path.join(out_dir, "success_plot.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    return written
