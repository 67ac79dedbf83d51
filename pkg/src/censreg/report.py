"""Figure rendering for the report-producing commands.

Every figure is written next to the delimited file carrying the same data,
so the CSVs remain the authoritative output and the PNGs are a convenience.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_density_figure(
    curves: dict[str, tuple[np.ndarray, np.ndarray]],
    path: str | Path,
    title: str = "Predictive density",
    vline: float | None = None,
) -> Path:
    """One axes with a labeled density curve per method; optional truth marker."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (pts, dens) in curves.items():
        ax.plot(pts, dens, label=label)
    if vline is not None:
        ax.axvline(vline, color="k", linestyle=":", linewidth=1, label="observed")
    ax.set_title(title)
    ax.set_xlabel("y")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_ess_ratio_figure(ratios: np.ndarray, path: str | Path) -> Path:
    """Histogram of per-entry ESS ratios (joint over univariate), log2 x axis."""
    ratios = np.asarray(ratios, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if ratios.size:
        ax.hist(np.log2(ratios), bins=min(40, max(10, ratios.size // 5)),
                color="tab:blue", alpha=0.8)
        ax.axvline(0.0, color="k", linestyle=":", linewidth=1)
    ax.set_xlabel("log2 ESS ratio (joint / univariate)")
    ax.set_ylabel("censored entries")
    ax.set_title("Joint vs univariate imputation efficiency")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_scan_efficiency_figure(rows, path: str | Path) -> Path:
    """ESS-per-second ratios against scan probability, one line per quantity."""
    probs = [r.scan_prob for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for attr, label in (
        ("beta_ess_per_sec_ratio", "coefficients"),
        ("imputation_ess_per_sec_ratio", "imputations"),
        ("predictive_ess_per_sec_ratio", "prediction"),
    ):
        vals = [getattr(r, attr) for r in rows]
        ax.plot(probs, vals, marker="o", label=label)
    ax.axhline(1.0, color="k", linestyle=":", linewidth=1)
    ax.set_xlabel("scan probability")
    ax.set_ylabel("ESS per second, relative to full scan")
    ax.set_title("Random scan efficiency")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_score_figure(totals: dict[str, float], path: str | Path) -> Path:
    """Bar chart of total log predictive score per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = list(totals)
    vals = [totals[k] for k in labels]
    ax.bar(labels, vals, color="tab:blue", alpha=0.8)
    ax.set_ylabel("total log predictive score")
    ax.set_title("Predictive scores by method")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
