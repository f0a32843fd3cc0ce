"""Matplotlib rendering of run traces and suite results to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import BoundRun, MetricsTrace, accuracy_curve


def _loss_ceilings(trace: MetricsTrace) -> np.ndarray:
    out = np.empty(trace.n)
    c = 0.0
    for i in range(trace.n):
        c = trace.gamma * c + 1.0
        out[i] = c
    return out


def save_accuracy_figure(trace: MetricsTrace, path: str, window: int | None = None) -> None:
    """Accuracy over time: cumulative, plus a rolling curve when asked."""
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(1, trace.n + 1)
    ax.plot(steps, accuracy_curve(trace), label="cumulative")
    if window is not None:
        ax.plot(steps, accuracy_curve(trace, window), alpha=0.7, label=f"rolling ({window})")
    ax.set_xlabel("step")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_loss_bound_figure(trace: MetricsTrace, path: str) -> None:
    """Normalized discounted loss against its running guaranteed ceiling."""
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(1, trace.n + 1)
    ceilings = _loss_ceilings(trace)
    ax.plot(steps, trace.discounted_loss / ceilings, label="normalized loss")
    ax.plot(steps, np.minimum(trace.bound / ceilings, 1.0), "--", label="normalized bound (capped at 1)")
    ax.set_xlabel("step")
    ax.set_ylabel("fraction of maximum loss")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_suite_figure(rows: list[BoundRun], path: str) -> None:
    """Per-cell mean normalized loss vs. normalized bound for a whole suite."""
    cells = sorted({(r.gamma, r.max_order) for r in rows})
    labels = [f"g={g:g}\nK={m}" for g, m in cells]
    mean_loss, mean_bound = [], []
    for g, m in cells:
        cell = [r for r in rows if r.gamma == g and r.max_order == m]
        mean_loss.append(np.mean([r.normalized_loss for r in cell]))
        mean_bound.append(np.mean([min(r.normalized_bound, 1.0) for r in cell]))
    x = np.arange(len(cells))
    fig, ax = plt.subplots(figsize=(max(7, 0.7 * len(cells)), 4))
    ax.plot(x, mean_bound, "s--", color="tab:red", label="normalized bound (capped at 1)")
    ax.plot(x, mean_loss, "o", color="tab:blue", label="normalized loss")
    ax.set_xticks(x, labels, fontsize=8)
    ax.set_ylabel("fraction of maximum loss")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
