"""Core data structures for regression with left-censored covariates.

Holds the dataset container (values, censoring mask, detection limits,
optional auxiliary covariates), the joint parameter state, the prior
hyperparameters, and the Gaussian conditioning primitive used by every
other module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky


class FactorizationError(RuntimeError):
    """Cholesky failure of a matrix that should be SPD; carries the block name."""

    def __init__(self, block: str, detail: str = ""):
        self.block = block
        msg = f"matrix block '{block}' is not positive definite"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConfigError(ValueError):
    """Invalid configuration or hyperparameter values."""


def chol_spd(a: np.ndarray, block: str) -> np.ndarray:
    """Lower Cholesky factor with a single jittered retry.

    On failure, 1e-10 * trace/p is added to the diagonal once; a second
    failure raises FactorizationError naming the offending block.
    """
    a = np.asarray(a, dtype=float)
    try:
        return cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    p = a.shape[0]
    jitter = 1e-10 * np.trace(a) / max(p, 1)
    try:
        return cholesky(a + jitter * np.eye(p), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(block, str(exc)) from exc


def spd_solve(a: np.ndarray, b: np.ndarray, block: str) -> np.ndarray:
    """Solve a @ x = b for SPD a via Cholesky (same jitter policy as chol_spd)."""
    lo = chol_spd(a, block)
    return cho_solve((lo, True), b, check_finite=False)


@dataclass
class CensoredDataset:
    """Regression data where covariate entries below known limits are censored.

    Censored entries of ``x`` hold their detection limit as placeholder;
    ``mask`` is the single source of truth for censoring. ``y`` may be None
    for pure-prediction batches. ``w``, when present, includes the intercept
    column and has no missing entries.
    """

    y: np.ndarray | None
    x: np.ndarray
    mask: np.ndarray
    limits: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.mask = np.atleast_2d(np.asarray(self.mask, dtype=bool))
        self.limits = np.atleast_2d(np.asarray(self.limits, dtype=float))
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float).ravel()
        if self.w is not None:
            self.w = np.atleast_2d(np.asarray(self.w, dtype=float))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return 0 if self.w is None else self.w.shape[1]

    def w_or_intercept(self) -> np.ndarray:
        """Auxiliary matrix, defaulting to a lone intercept column."""
        if self.w is not None:
            return self.w
        return np.ones((self.n, 1))

    def censored_rows(self) -> np.ndarray:
        """Indices of rows containing at least one censored entry."""
        return np.flatnonzero(self.mask.any(axis=1))

    def subset(self, rows: np.ndarray) -> "CensoredDataset":
        return CensoredDataset(
            y=None if self.y is None else self.y[rows],
            x=self.x[rows],
            mask=self.mask[rows],
            limits=self.limits[rows],
            w=None if self.w is None else self.w[rows],
        )


@dataclass
class ModelParams:
    """One joint draw of all model parameters."""

    beta0: float
    beta: np.ndarray
    sigma2: float
    gamma: np.ndarray  # (r, p) auxiliary regression coefficients
    omega: np.ndarray  # (p, p) SPD covariance of the covariate model

    def validate(self):
        if self.sigma2 <= 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        chol_spd(self.omega, "omega")


@dataclass
class PriorHyper:
    """Prior hyperparameters; all scale parameters must be positive."""

    tau_beta0: float
    tau_beta: float
    a: float
    b: float
    tau_gamma: float
    A: np.ndarray
    kappa: float

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        for name in ("tau_beta0", "tau_beta", "a", "b", "tau_gamma"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        p = self.A.shape[0]
        if self.kappa <= p - 1:
            raise ConfigError(f"kappa must exceed p - 1 = {p - 1}, got {self.kappa}")
        chol_spd(self.A, "A")


def sigma2_hyper(m: float, v: float = 2000.0**2, variant: str = "dispersion") -> tuple[float, float]:
    """Shape/scale for the error-variance prior from a target mean m and spread v.

    variant 'dispersion' uses b = m*(m^2/v + 1); variant 'moment' uses the
    mean-consistent b = m*(a - 1). Both give near-flat priors for large v.
    """
    a = m**2 / v + 2.0
    if variant == "dispersion":
        b = m * (m**2 / v + 1.0)
    elif variant == "moment":
        b = m * (a - 1.0)
    else:
        raise ConfigError(f"unknown sigma2 prior variant '{variant}'")
    return a, b


def default_prior(p: int, m: float = 1.0, variant: str = "dispersion") -> PriorHyper:
    """Weakly informative defaults; kappa is raised to p + 2 when needed."""
    a, b = sigma2_hyper(m, variant=variant)
    return PriorHyper(
        tau_beta0=1e4,
        tau_beta=1e4,
        a=a,
        b=b,
        tau_gamma=np.sqrt(0.1),
        A=np.eye(p) / 10.0,
        kappa=max(10.0, p + 2.0),
    )


@dataclass
class ChainState:
    """Current parameters plus the current imputation of every censored entry."""

    params: ModelParams
    imputed: np.ndarray  # (n, p), censored entries filled with current draws
    iteration: int = 0

    def copy(self) -> "ChainState":
        return ChainState(
            params=ModelParams(
                beta0=self.params.beta0,
                beta=self.params.beta.copy(),
                sigma2=self.params.sigma2,
                gamma=self.params.gamma.copy(),
                omega=self.params.omega.copy(),
            ),
            imputed=self.imputed.copy(),
            iteration=self.iteration,
        )


@dataclass
class DrawStore:
    """Ordered post-burn-in draws with provenance metadata."""

    draws: list[ModelParams] = field(default_factory=list)
    imputations: list[np.ndarray] = field(default_factory=list)  # censored entries only
    censored_idx: np.ndarray | None = None  # (k, 2) row/col of stored imputations
    seed: int = 0
    burn_in: int = 0
    thin: int = 1
    scan_prob: float = 1.0
    complete: bool = False
    sampling_seconds: float = 0.0
    update_counts: np.ndarray | None = None  # missing-update count per training row
    extra_imputations: list = field(default_factory=list)
    extra_censored_idx: np.ndarray | None = None
    final_state: "ChainState | None" = None

    def __len__(self) -> int:
        return len(self.draws)

    def beta_matrix(self) -> np.ndarray:
        """(S, p+1) matrix of stacked (beta0, beta) draws."""
        return np.array([np.concatenate(([d.beta0], d.beta)) for d in self.draws])

    def sigma2_vector(self) -> np.ndarray:
        return np.array([d.sigma2 for d in self.draws])

    def imputation_matrix(self) -> np.ndarray:
        """(S, k) matrix of stored censored-entry draws."""
        return np.array(self.imputations)


def partition_gaussian(
    mean: np.ndarray,
    cov: np.ndarray,
    observed_idx: np.ndarray,
    observed_vals: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Condition N(mean, cov) on a subset of coordinates.

    Returns the mean and covariance of the unobserved coordinates given the
    observed ones, in the native (ascending-index) order of the unobserved
    coordinates. Empty conditioning returns (mean, cov) unchanged.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    observed_idx = np.asarray(observed_idx, dtype=int).ravel()
    observed_vals = np.asarray(observed_vals, dtype=float).ravel()
    p = mean.size
    if observed_idx.size != observed_vals.size:
        raise ValueError("observed_idx and observed_vals must have equal length")
    if observed_idx.size == 0:
        return mean.copy(), cov.copy()
    is_missing = np.ones(p, dtype=bool)
    is_missing[observed_idx] = False
    missing_idx = np.flatnonzero(is_missing)
    omega_oo = cov[observed_idx[:, None], observed_idx]
    omega_mo = cov[missing_idx[:, None], observed_idx]
    omega_mm = cov[missing_idx[:, None], missing_idx]
    lo = chol_spd(omega_oo, "omega_oo")
    # B = omega_mo @ omega_oo^{-1}
    b = cho_solve((lo, True), omega_mo.T, check_finite=False).T
    cond_mean = mean[missing_idx] + b @ (observed_vals - mean[observed_idx])
    cond_cov = omega_mm - b @ omega_mo.T
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    return cond_mean, cond_cov


@dataclass
class DatasetReport:
    """Diagnostics from validate_dataset; callers decide whether to abort."""

    dimension_mismatches: list[str]
    placeholder_violations: list[tuple[int, int]]
    fully_censored_rows: list[int]
    censor_fraction_by_column: np.ndarray
    censor_fraction: float

    @property
    def ok(self) -> bool:
        return not self.dimension_mismatches and not self.placeholder_violations


def validate_dataset(d: CensoredDataset) -> DatasetReport:
    """Pure diagnostics report on a dataset; never raises."""
    mismatches = []
    n, p = d.x.shape
    for name, arr in (("mask", d.mask), ("limits", d.limits)):
        if arr.shape != (n, p):
            mismatches.append(f"{name} has shape {arr.shape}, expected {(n, p)}")
    if d.y is not None and d.y.shape[0] != n:
        mismatches.append(f"y has length {d.y.shape[0]}, expected {n}")
    if d.w is not None and d.w.shape[0] != n:
        mismatches.append(f"w has {d.w.shape[0]} rows, expected {n}")

    violations: list[tuple[int, int]] = []
    fully_censored: list[int] = []
    if not mismatches:
        bad = d.mask & (d.x != d.limits)
        violations = [tuple(ij) for ij in np.argwhere(bad)]
        fully_censored = list(np.flatnonzero(d.mask.all(axis=1)))
        col_frac = d.mask.mean(axis=0)
        frac = float(d.mask.mean())
    else:
        col_frac = np.full(p, np.nan)
        frac = float("nan")
    return DatasetReport(
        dimension_mismatches=mismatches,
        placeholder_violations=violations,
        fully_censored_rows=fully_censored,
        censor_fraction_by_column=col_frac,
        censor_fraction=frac,
    )
