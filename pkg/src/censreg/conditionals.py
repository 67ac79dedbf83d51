"""Closed-form full conditionals for all Gibbs blocks.

Covers the regression coefficients, the error variance, the joint
covariate-model block (inverse Wishart + matrix normal), the truncated
normal for a row's censored entries, and the posterior-correlation
diagnostic for those entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import tmvn
from .model import (
    CensoredDataset,
    ChainState,
    ConfigError,
    FactorizationError,
    ModelParams,
    PriorHyper,
    chol_spd,
)


@dataclass
class MissingConditional:
    """Truncated normal parameters for one row's censored entries (native order)."""

    mean: np.ndarray
    cov: np.ndarray
    upper: np.ndarray
    indices: np.ndarray  # censored column indices of the row


def beta_full_conditional(
    d: CensoredDataset, state: ChainState, prior: PriorHyper
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of (beta0, beta) given everything else.

    Uses the intercept-augmented design and the diagonal prior covariance
    diag(tau_beta0^2, tau_beta^2 I_p).
    """
    x = np.column_stack([np.ones(d.n), state.imputed])
    d_inv = np.concatenate(
        ([1.0 / prior.tau_beta0**2], np.full(d.p, 1.0 / prior.tau_beta**2))
    )
    prec = x.T @ x / state.params.sigma2 + np.diag(d_inv)
    lo = chol_spd(prec, "beta_precision")
    cov = cho_solve((lo, True), np.eye(d.p + 1), check_finite=False)
    mean = cho_solve((lo, True), x.T @ d.y / state.params.sigma2, check_finite=False)
    return mean, 0.5 * (cov + cov.T)


def sigma2_full_conditional(
    d: CensoredDataset, state: ChainState, prior: PriorHyper
) -> tuple[float, float]:
    """Inverse-gamma (shape, rate) for the error variance."""
    if d.n == 0:
        return prior.a, prior.b
    resid = d.y - state.params.beta0 - state.imputed @ state.params.beta
    return d.n / 2.0 + prior.a, float(resid @ resid) / 2.0 + prior.b


def gamma_omega_full_conditional(
    d: CensoredDataset, state: ChainState, prior: PriorHyper
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """Joint conditional for the covariate model: (A_post, dof, Gamma_post, row_precision).

    Omega | . ~ IW(A_post, dof); vec(Gamma) | Omega is normal with mean
    vec(Gamma_post) and covariance Omega kron row_precision^{-1}.
    """
    return gamma_omega_from_matrices(state.imputed, d.w_or_intercept(), prior)


def gamma_omega_from_matrices(
    x: np.ndarray, w: np.ndarray, prior: PriorHyper
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    n, p = x.shape
    r = w.shape[1]
    dof = n + prior.kappa
    if dof <= p - 1:
        raise ConfigError(f"posterior degrees of freedom {dof} <= p - 1")
    tau2_inv = 1.0 / prior.tau_gamma**2
    row_prec = tau2_inv * np.eye(r) + w.T @ w
    lo = chol_spd(row_prec, "gamma_row_precision")
    gamma_post = cho_solve((lo, True), w.T @ x, check_finite=False)
    resid = x - w @ gamma_post
    a_post = prior.A + tau2_inv * gamma_post.T @ gamma_post + resid.T @ resid
    return 0.5 * (a_post + a_post.T), float(dof), gamma_post, row_prec


def sample_inverse_wishart(rng: np.random.Generator, scale: np.ndarray, dof: float) -> np.ndarray:
    """Inverse Wishart draw via Bartlett decomposition."""
    p = scale.shape[0]
    t = np.zeros((p, p))
    for i in range(p):
        t[i, i] = np.sqrt(rng.chisquare(dof - i))
    t[np.tril_indices(p, -1)] = rng.standard_normal(p * (p - 1) // 2)
    c = chol_spd(scale, "iw_scale")  # scale = c c^T
    v = solve_triangular(t, c.T, lower=True)
    out = v.T @ v
    return 0.5 * (out + out.T)


def sample_gamma_omega(
    rng: np.random.Generator,
    a_post: np.ndarray,
    dof: float,
    gamma_post: np.ndarray,
    row_prec: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (Gamma, Omega) from the joint conditional."""
    omega = sample_inverse_wishart(rng, a_post, dof)
    r, p = gamma_post.shape
    lo_u = chol_spd(np.linalg.inv(row_prec), "gamma_row_cov")
    lo_o = chol_spd(omega, "omega")
    gamma = gamma_post + lo_u @ rng.standard_normal((r, p)) @ lo_o.T
    return gamma, omega


def conditional_prior_moments(
    row: int, d: CensoredDataset, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mu_bar, sigma_bar, missing_idx): the covariate-model conditional of a
    row's censored entries given its observed entries (no response term)."""
    mask_row = d.mask[row]
    missing_idx = np.flatnonzero(mask_row)
    observed_idx = np.flatnonzero(~mask_row)
    w_row = d.w[row] if d.w is not None else np.ones(1)
    xhat = params.gamma.T @ w_row
    if observed_idx.size == 0:
        return xhat, params.omega.copy(), missing_idx
    # inline Gaussian conditioning (same math as partition_gaussian) to keep
    # this per-row hot path free of redundant validation
    omega = params.omega
    omega_oo = omega[observed_idx[:, None], observed_idx]
    omega_mo = omega[missing_idx[:, None], observed_idx]
    omega_mm = omega[missing_idx[:, None], missing_idx]
    try:
        lo = chol_spd(omega_oo, "omega_oo")
    except FactorizationError as exc:
        raise FactorizationError(exc.block, f"row {row}") from exc
    b = cho_solve((lo, True), omega_mo.T, check_finite=False).T
    mu_bar = xhat[missing_idx] + b @ (d.x[row, observed_idx] - xhat[observed_idx])
    sigma_bar = omega_mm - b @ omega_mo.T
    sigma_bar = 0.5 * (sigma_bar + sigma_bar.T)
    return mu_bar, sigma_bar, missing_idx


def missing_full_conditional(
    row: int, d: CensoredDataset, params: ModelParams
) -> MissingConditional:
    """Truncated normal full conditional of a row's censored covariate entries.

    When the row has no response (prediction mode) the likelihood term is
    omitted and the covariate-model conditional is returned directly.
    """
    mu_bar, sigma_bar, missing_idx = conditional_prior_moments(row, d, params)
    if missing_idx.size == 0:
        raise ValueError(f"row {row} has no censored entries")
    upper = d.limits[row, missing_idx]
    if d.y is None or not np.isfinite(d.y[row]):
        return MissingConditional(mean=mu_bar, cov=sigma_bar, upper=upper, indices=missing_idx)
    beta_m = params.beta[missing_idx]
    observed_idx = np.flatnonzero(~d.mask[row])
    y_tilde = d.y[row] - params.beta0 - params.beta[observed_idx] @ d.x[row, observed_idx]
    # conditioning on the scalar response adds beta_m beta_m^T / sigma2 to the
    # precision, which is a rank-one downdate of the covariance; avoids
    # inverting sigma_bar twice per row
    sb = sigma_bar @ beta_m
    denom = params.sigma2 + float(beta_m @ sb)
    cov = sigma_bar - np.outer(sb, sb) / denom
    mean = mu_bar + sb * ((y_tilde - float(beta_m @ mu_bar)) / denom)
    return MissingConditional(
        mean=mean, cov=0.5 * (cov + cov.T), upper=upper, indices=missing_idx
    )


def _corr_from_cov(cov: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.diag(cov))
    return cov / np.outer(sd, sd)


def posterior_correlation(row: int, d: CensoredDataset, params: ModelParams) -> np.ndarray:
    """Correlation matrix of a row's censored entries given data and response.

    Computed from the rank-one identity: the y-information enters only
    through the conditional correlations between each censored entry
    and the response.
    """
    if d.y is None:
        raise ValueError("posterior_correlation requires a response")
    mu_bar, sigma_bar, missing_idx = conditional_prior_moments(row, d, params)
    if missing_idx.size == 0:
        raise ValueError(f"row {row} has no censored entries")
    beta_m = params.beta[missing_idx]
    cov_xy = sigma_bar @ beta_m
    var_y = float(beta_m @ cov_xy) + params.sigma2
    sd_x = np.sqrt(np.diag(sigma_bar))
    rho_xy = cov_xy / (sd_x * np.sqrt(var_y))
    denom = 1.0 - rho_xy**2
    if np.any(denom <= 0):
        raise FactorizationError(
            "posterior_correlation", f"degenerate y-correlation in row {row}"
        )
    r_scale = 1.0 / np.sqrt(denom)
    rho_mm = _corr_from_cov(sigma_bar)
    out = (rho_mm - np.outer(rho_xy, rho_xy)) * np.outer(r_scale, r_scale)
    return out


def draw_beta(rng: np.random.Generator, d: CensoredDataset, state: ChainState,
              prior: PriorHyper) -> tuple[float, np.ndarray]:
    mean, cov = beta_full_conditional(d, state, prior)
    draw = mean + chol_spd(cov, "beta_cov") @ rng.standard_normal(d.p + 1)
    return float(draw[0]), draw[1:]


def draw_sigma2(rng: np.random.Generator, d: CensoredDataset, state: ChainState,
                prior: PriorHyper) -> float:
    shape, rate = sigma2_full_conditional(d, state, prior)
    return float(rate / rng.gamma(shape))


def draw_missing_row(
    rng: np.random.Generator,
    row: int,
    d: CensoredDataset,
    state: ChainState,
    exact_dim_cap: int = tmvn.DEFAULT_EXACT_DIM_CAP,
) -> None:
    """Draw the row's censored entries jointly and write them into the state."""
    cond = missing_full_conditional(row, d, state.params)
    prob = tmvn.TruncatedMvnProblem(mean=cond.mean, cov=cond.cov, upper=cond.upper)
    start = state.imputed[row, cond.indices] if cond.indices.size else None
    draw = tmvn.sample_tmvn(rng, prob, 1, exact_dim_cap=exact_dim_cap, start=start)
    state.imputed[row, cond.indices] = draw[0]


def draw_missing_row_univariate(
    rng: np.random.Generator, row: int, d: CensoredDataset, state: ChainState
) -> None:
    """One-at-a-time baseline: sweep the row's censored entries in column order,
    each from its scalar conditional truncated normal."""
    cond = missing_full_conditional(row, d, state.params)
    k = cond.indices.size
    if k == 1:
        val = tmvn.sample_truncnorm_1d(
            rng, float(cond.mean[0]), float(np.sqrt(cond.cov[0, 0])), float(cond.upper[0])
        )
        state.imputed[row, cond.indices[0]] = val
        return
    current = state.imputed[row, cond.indices].copy()
    prec = np.linalg.inv(cond.cov)
    for j in range(k):
        resid = prec[j] @ (current - cond.mean) - prec[j, j] * (current[j] - cond.mean[j])
        cmean = cond.mean[j] - resid / prec[j, j]
        csd = 1.0 / np.sqrt(prec[j, j])
        current[j] = tmvn.sample_truncnorm_1d(rng, float(cmean), float(csd), float(cond.upper[j]))
    state.imputed[row, cond.indices] = current


def draw_block(
    rng: np.random.Generator,
    which: str,
    d: CensoredDataset,
    state: ChainState,
    prior: PriorHyper,
    row: int | None = None,
    exact_dim_cap: int = tmvn.DEFAULT_EXACT_DIM_CAP,
) -> ChainState:
    """Draw one Gibbs block into a copy of the state.

    ``which`` is one of 'beta', 'sigma2', 'gamma_omega', 'missing'
    ('missing' requires ``row`` and is a no-op for rows with no censored
    entries).
    """
    out = state.copy()
    if which == "beta":
        out.params.beta0, out.params.beta = draw_beta(rng, d, out, prior)
    elif which == "sigma2":
        out.params.sigma2 = draw_sigma2(rng, d, out, prior)
    elif which == "gamma_omega":
        a_post, dof, gamma_post, row_prec = gamma_omega_full_conditional(d, out, prior)
        out.params.gamma, out.params.omega = sample_gamma_omega(
            rng, a_post, dof, gamma_post, row_prec
        )
    elif which == "missing":
        if row is None:
            raise ValueError("missing block requires a row index")
        if d.mask[row].any():
            draw_missing_row(rng, row, d, out, exact_dim_cap=exact_dim_cap)
    else:
        raise ValueError(f"unknown block '{which}'")
    return out
