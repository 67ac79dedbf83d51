"""Synthetic data with block-equicorrelated covariates and interference censoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CensoredDataset, ConfigError, ModelParams, PriorHyper, chol_spd


@dataclass
class GenSpec:
    """Settings for one synthetic train/test pair."""

    n: int
    n_test: int
    p: int
    r: int = 0  # auxiliary covariates (0 = none); intercept column added on top
    block_sizes: list[int] = field(default_factory=list)
    block_rhos: list[float] = field(default_factory=list)
    sigma2: float = 4.0
    frac_insignificant: float = 0.5
    delta: float | None = None
    target_censor_rate: float | None = None
    aux_share_range: tuple[float, float] = (0.65, 0.90)
    seed: int = 0

    def __post_init__(self):
        if not self.block_sizes:
            self.block_sizes = [self.p]
            self.block_rhos = [0.0]
        if sum(self.block_sizes) != self.p:
            raise ConfigError("block sizes must sum to p")
        if len(self.block_rhos) != len(self.block_sizes):
            raise ConfigError("need one correlation per block")
        if any(not 0 <= rho < 1 for rho in self.block_rhos):
            raise ConfigError("block correlations must lie in [0, 1)")
        if (self.delta is None) == (self.target_censor_rate is None):
            raise ConfigError("set exactly one of delta / target_censor_rate")
        if self.target_censor_rate is not None and not 0 < self.target_censor_rate < 1:
            raise ConfigError("target_censor_rate must lie in (0, 1)")


@dataclass
class GenTruth:
    """Generating parameters and the uncensored matrices."""

    params: ModelParams
    x_train: np.ndarray
    x_test: np.ndarray
    delta: float
    r2: float


def block_equicorrelation(block_sizes: list[int], block_rhos: list[float]) -> np.ndarray:
    """Correlation matrix with independent equicorrelated blocks."""
    p = sum(block_sizes)
    omega = np.zeros((p, p))
    at = 0
    for size, rho in zip(block_sizes, block_rhos):
        omega[at:at + size, at:at + size] = rho
        at += size
    np.fill_diagonal(omega, 1.0)
    return omega


def censor(x_row: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interference censoring: entries below max(row) - delta are replaced by
    that common per-row limit. The row maximum is never censored."""
    x_row = np.asarray(x_row, dtype=float).ravel()
    if x_row.size == 0:
        raise ValueError("x_row must be nonempty")
    threshold = x_row.max() - delta
    mask = x_row < threshold
    values = np.where(mask, threshold, x_row)
    limits = np.full(x_row.size, threshold)
    return values, mask, limits


def censor_matrix(x: np.ndarray, delta: float) -> CensoredDataset:
    """Apply interference censoring rowwise (response and auxiliaries unset)."""
    values = np.empty_like(x)
    mask = np.empty(x.shape, dtype=bool)
    limits = np.empty_like(x)
    for i in range(x.shape[0]):
        values[i], mask[i], limits[i] = censor(x[i], delta)
    return CensoredDataset(y=None, x=values, mask=mask, limits=limits)


def calibrate_delta(
    x: np.ndarray, target_rate: float, max_iter: int = 20, tol: float = 0.005
) -> float:
    """Bisection on delta so the empirical censoring rate hits target_rate."""
    def rate(delta: float) -> float:
        thresholds = x.max(axis=1, keepdims=True) - delta
        return float((x < thresholds).mean())

    lo = 0.0  # rate(0) is the largest achievable rate
    hi = float(x.max(axis=1, keepdims=True).max() - x.min())
    if rate(lo) < target_rate:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target_rate) <= tol:
            return mid
        if r > target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _simulate_covariates(
    rng: np.random.Generator, n: int, spec: GenSpec, gamma: np.ndarray | None,
    omega: np.ndarray,
) -> tuple[np.ndarray, np.ndarray | None]:
    lo = chol_spd(omega, "omega")
    noise = rng.standard_normal((n, spec.p)) @ lo.T
    if spec.r == 0:
        return noise, None
    w = np.column_stack([np.ones(n), rng.standard_normal((n, spec.r))])
    return w @ gamma + noise, w


def generate(spec: GenSpec) -> tuple[CensoredDataset, CensoredDataset, GenTruth]:
    """Simulate a train/test pair with interference censoring.

    Coefficients are standard normal with the trailing ceil(frac * p)
    zeroed; covariates are block-equicorrelated around the auxiliary
    regression mean (or zero without auxiliaries).
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(0,)))
    p = spec.p
    beta0 = float(rng.standard_normal())
    beta = rng.standard_normal(p)
    n_zero = int(np.ceil(spec.frac_insignificant * p))
    if n_zero:
        beta[p - n_zero:] = 0.0

    corr = block_equicorrelation(spec.block_sizes, spec.block_rhos)
    if spec.r > 0:
        gamma = rng.standard_normal((spec.r + 1, p))
        # scale the covariate noise so the auxiliaries explain the target share
        shares = rng.uniform(*spec.aux_share_range, size=p)
        signal_var = np.sum(gamma[1:] ** 2, axis=0)
        noise_sd = np.sqrt(signal_var * (1.0 - shares) / shares)
        omega = corr * np.outer(noise_sd, noise_sd)
    else:
        gamma = None
        omega = corr

    n_all = spec.n + spec.n_test
    x_all, w_all = _simulate_covariates(rng, n_all, spec, gamma, omega)
    y_all = beta0 + x_all @ beta + np.sqrt(spec.sigma2) * rng.standard_normal(n_all)

    x_train, x_test = x_all[:spec.n], x_all[spec.n:]
    if spec.delta is not None:
        delta = spec.delta
    else:
        delta = calibrate_delta(x_train, spec.target_censor_rate)

    def build(xs, ys, ws) -> CensoredDataset:
        d = censor_matrix(xs, delta)
        d.y = ys
        d.w = ws
        return d

    w_train = w_all[:spec.n] if w_all is not None else None
    w_test = w_all[spec.n:] if w_all is not None else None
    train = build(x_train, y_all[:spec.n], w_train)
    test = build(x_test, y_all[spec.n:], w_test)

    signal = x_all @ beta
    r2 = float(np.var(signal) / (np.var(signal) + spec.sigma2))
    truth_gamma = gamma if gamma is not None else np.zeros((1, p))
    truth = GenTruth(
        params=ModelParams(beta0=beta0, beta=beta, sigma2=spec.sigma2,
                           gamma=truth_gamma, omega=omega),
        x_train=x_train,
        x_test=x_test,
        delta=delta,
        r2=r2,
    )
    return train, test, truth


def simulate_from_params(
    rng: np.random.Generator,
    params: ModelParams,
    n: int,
    n_test: int,
    target_censor_rate: float,
    w_sampler=None,
) -> tuple[CensoredDataset, CensoredDataset, float]:
    """Simulate a censored train/test pair from fixed model parameters."""
    p = params.beta.size
    r = params.gamma.shape[0]
    n_all = n + n_test
    if w_sampler is not None:
        w_all = w_sampler(rng, n_all)
    elif r == 1:
        w_all = np.ones((n_all, 1))
    else:
        w_all = np.column_stack([np.ones(n_all), rng.standard_normal((n_all, r - 1))])
    lo = chol_spd(params.omega, "omega")
    x_all = w_all @ params.gamma + rng.standard_normal((n_all, p)) @ lo.T
    y_all = params.beta0 + x_all @ params.beta + np.sqrt(params.sigma2) * rng.standard_normal(n_all)
    delta = calibrate_delta(x_all[:n], target_censor_rate)

    def build(sl) -> CensoredDataset:
        d = censor_matrix(x_all[sl], delta)
        d.y = y_all[sl]
        d.w = None if r == 1 else w_all[sl]
        return d

    return build(slice(0, n)), build(slice(n, n_all)), delta


def refit_and_simulate(
    complete: CensoredDataset,
    prior: PriorHyper,
    cfg,
    n_datasets: int = 5,
    n: int | None = None,
    n_test: int | None = None,
    target_censor_rate: float = 0.25,
) -> tuple[list[tuple[CensoredDataset, CensoredDataset]], ModelParams]:
    """Fit the model on complete data, then simulate censored datasets from the
    posterior-mean parameters (the telecom-mimic workflow)."""
    from .gibbs import run_chain  # deferred to avoid an import cycle

    if complete.mask.any():
        raise ConfigError("refit_and_simulate requires uncensored input data")
    store = run_chain(complete, prior, cfg)
    beta_mat = store.beta_matrix()
    post = ModelParams(
        beta0=float(beta_mat[:, 0].mean()),
        beta=beta_mat[:, 1:].mean(axis=0),
        sigma2=float(store.sigma2_vector().mean()),
        gamma=np.mean([dr.gamma for dr in store.draws], axis=0),
        omega=np.mean([dr.omega for dr in store.draws], axis=0),
    )
    n = complete.n if n is None else n
    n_test = complete.n if n_test is None else n_test
    out = []
    for k in range(n_datasets):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1000 + k,))
        )
        train, test, _ = simulate_from_params(rng, post, n, n_test, target_censor_rate)
        out.append((train, test))
    return out, post
