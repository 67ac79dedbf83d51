"""Scoring and diagnostics: log predictive scores, effective sample size,
joint-vs-univariate updating comparison, random-scan efficiency, densities."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import gaussian_kde

from .gibbs import RunConfig, run_chain
from .model import CensoredDataset, PriorHyper
from .predict import PredictiveDraws, predict_approximate


@dataclass
class ScoreReport:
    """Per-row log predictive scores for one imputation method."""

    per_row_log_scores: np.ndarray
    total: float
    method_label: str


def log_predictive_score(
    preds: list[PredictiveDraws], y_true: np.ndarray, method_label: str = "bayesian"
) -> ScoreReport:
    """Sum of Rao-Blackwellized log predictive densities over test rows."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    if len(preds) != y_true.size:
        raise ValueError("need one PredictiveDraws per test response")
    scores = np.array([pr.log_density(y) for pr, y in zip(preds, y_true)])
    return ScoreReport(per_row_log_scores=scores, total=float(scores.sum()),
                       method_label=method_label)


def ess(chain: np.ndarray) -> float:
    """Effective sample size via Geyer's initial monotone positive sequence.

    Constant chains return the chain length by convention (with a warning).
    """
    chain = np.asarray(chain, dtype=float).ravel()
    n = chain.size
    if n < 10:
        raise ValueError("chain too short for ESS estimation")
    centered = chain - chain.mean()
    var0 = centered @ centered / n
    if var0 == 0:
        warnings.warn("zero-variance chain; ESS set to chain length", RuntimeWarning)
        return float(n)
    # autocovariances via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    # Geyer: sum adjacent autocorrelation pairs, keep while positive,
    # enforce a monotone nonincreasing sequence
    n_pairs = n // 2
    pair_sums = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    running_min = np.inf
    acc = 0.0
    for ps in pair_sums:
        if ps <= 0:
            break
        running_min = min(running_min, ps)
        acc += running_min
    tau = max(-1.0 + 2.0 * acc, 1.0 / n)
    return float(n / tau)


def naive_impute(d: CensoredDataset) -> np.ndarray:
    """Censored entries set to their detection limits; observed untouched."""
    return np.where(d.mask, d.limits, d.x)


def as_complete(d: CensoredDataset, x: np.ndarray | None = None) -> CensoredDataset:
    """Dataset viewed as fully observed (mask cleared), optionally with new x."""
    values = d.x if x is None else x
    return CensoredDataset(
        y=d.y, x=values, mask=np.zeros_like(d.mask), limits=d.limits, w=d.w
    )


@dataclass
class EssComparison:
    """Quantiles of per-censored-entry ESS ratios (joint over univariate)."""

    ratio_quantiles: dict[str, float]
    ratios: np.ndarray
    wall_time_ratio: float  # joint seconds / univariate seconds


def compare_joint_vs_univariate(
    d: CensoredDataset, prior: PriorHyper, cfg: RunConfig
) -> EssComparison:
    """Run twin chains differing only in the missing-update style and compare
    per-censored-entry effective sample sizes."""
    cfg = replace(cfg, store_imputations=True)
    store_joint = run_chain(d, prior, cfg, update_style="joint")
    store_uni = run_chain(d, prior, cfg, update_style="univariate")
    if not d.mask.any():
        return EssComparison(ratio_quantiles={}, ratios=np.empty(0), wall_time_ratio=1.0)
    imp_joint = store_joint.imputation_matrix()
    imp_uni = store_uni.imputation_matrix()
    if len(store_joint) < 100:
        raise ValueError("chains too short for ESS ratios; increase n_iter")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ess_joint = np.array([ess(imp_joint[:, k]) for k in range(imp_joint.shape[1])])
        ess_uni = np.array([ess(imp_uni[:, k]) for k in range(imp_uni.shape[1])])
    ratios = ess_joint / ess_uni
    qs = {f"{q}%": float(np.percentile(ratios, q)) for q in (0, 25, 50, 75, 100)}
    wall = store_joint.sampling_seconds / max(store_uni.sampling_seconds, 1e-12)
    return EssComparison(ratio_quantiles=qs, ratios=ratios, wall_time_ratio=wall)


@dataclass
class ScanEfficiencyRow:
    """Efficiency of one scan probability relative to scan probability one."""

    scan_prob: float
    seconds_per_iteration: float
    beta_ess_per_sec_ratio: float
    imputation_ess_per_sec_ratio: float
    predictive_ess_per_sec_ratio: float


def random_scan_efficiency(
    d: CensoredDataset,
    prior: PriorHyper,
    probs: list[float],
    cfg: RunConfig,
    test_row: CensoredDataset | None = None,
) -> list[ScanEfficiencyRow]:
    """ESS-per-second at each scan probability, relative to scan probability 1.

    The predictive column uses one response draw per stored iteration for a
    held-out row (the first training row reinterpreted without its response
    when no test row is given).
    """
    if test_row is None:
        rows = d.censored_rows()
        take = int(rows[0]) if rows.size else 0
        test_row = d.subset(np.array([take]))
    results = {}
    for prob in list(probs) + ([1.0] if 1.0 not in probs else []):
        run_cfg = replace(cfg, scan_prob=prob, store_imputations=True)
        store = run_chain(d, prior, run_cfg)
        secs = store.sampling_seconds
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            beta_mat = store.beta_matrix()
            beta_ess = np.mean([ess(beta_mat[:, j]) for j in range(beta_mat.shape[1])])
            if store.imputations and store.imputation_matrix().shape[1]:
                imp = store.imputation_matrix()
                imp_ess = np.mean([ess(imp[:, j]) for j in range(imp.shape[1])])
            else:
                imp_ess = float("nan")
            pred = predict_approximate(store, test_row, row=0)
            pred_ess = ess(pred.y_draws)
        results[prob] = {
            "secs": secs,
            "iters": run_cfg.n_iter,
            "beta": beta_ess / secs,
            "imp": imp_ess / secs,
            "pred": pred_ess / secs,
        }
    ref = results[1.0]
    out = []
    for prob in probs:
        r = results[prob]
        out.append(
            ScanEfficiencyRow(
                scan_prob=prob,
                seconds_per_iteration=r["secs"] / r["iters"],
                beta_ess_per_sec_ratio=r["beta"] / ref["beta"],
                imputation_ess_per_sec_ratio=r["imp"] / ref["imp"],
                predictive_ess_per_sec_ratio=r["pred"] / ref["pred"],
            )
        )
    return out


def emit_density_data(
    samples: np.ndarray, grid: np.ndarray | int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density estimate (Silverman bandwidth) on a grid."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    if samples.std() == 0:
        # degenerate sample: spike at the repeated value
        center = samples[0]
        pts = np.asarray(grid, dtype=float) if not np.isscalar(grid) else (
            np.linspace(center - 1.0, center + 1.0, int(grid))
        )
        dens = np.zeros_like(pts)
        dens[np.argmin(np.abs(pts - center))] = np.inf
        return pts, dens
    kde = gaussian_kde(samples, bw_method="silverman")
    if np.isscalar(grid):
        lo, hi = samples.min(), samples.max()
        pad = 0.1 * (hi - lo + 1e-12)
        pts = np.linspace(lo - pad, hi + pad, int(grid))
    else:
        pts = np.asarray(grid, dtype=float)
    return pts, kde(pts)
