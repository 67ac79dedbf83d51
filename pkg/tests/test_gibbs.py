import numpy as np
import pytest

from censreg.conditionals import draw_block
from censreg.gibbs import GibbsError, RunConfig, initialize_state, run_chain
from censreg.model import (
    CensoredDataset,
    ChainState,
    ConfigError,
    ModelParams,
    PriorHyper,
    chol_spd,
)


def censored_dataset(rng, n=40, p=3, censor_frac=0.3):
    x = rng.standard_normal((n, p))
    thresh = np.quantile(x, censor_frac)
    mask = x < thresh
    limits = np.where(mask, thresh, -np.inf)
    values = np.where(mask, thresh, x)
    y = 1.0 + x @ np.arange(1.0, p + 1.0) + rng.standard_normal(n)
    return CensoredDataset(y=y, x=values, mask=mask, limits=limits)


def tight_prior(p):
    return PriorHyper(tau_beta0=1.0, tau_beta=1.0, a=3.0, b=3.0, tau_gamma=1.0,
                      A=np.eye(p) * 3.0, kappa=p + 4.0)


class TestRunConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(scan_prob=0.0)
        with pytest.raises(ConfigError):
            RunConfig(n_iter=10, burn_in=10)
        with pytest.raises(ConfigError):
            RunConfig(thin=0)

    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.n_iter, cfg.burn_in, cfg.scan_prob) == (6000, 1000, 0.2)


class TestInitializeState:
    def test_all_observed_matches_ridge(self):
        rng = np.random.default_rng(0)
        d = censored_dataset(rng, censor_frac=0.0)
        d.mask[:] = False
        state = initialize_state(d, tight_prior(3))
        x = np.column_stack([np.ones(d.n), d.x])
        coef = np.linalg.solve(x.T @ x + 1e-6 * np.eye(4), x.T @ d.y)
        assert state.params.beta0 == pytest.approx(coef[0])
        assert np.allclose(state.params.beta, coef[1:])
        assert np.array_equal(state.imputed, d.x)

    def test_half_std_below_limit(self):
        x = np.array([[2.0], [1.0], [3.0], [2.0]])
        mask = np.array([[True], [False], [False], [False]])
        limits = np.where(mask, 2.0, -np.inf)
        d = CensoredDataset(y=np.zeros(4), x=x, mask=mask, limits=limits)
        state = initialize_state(d, tight_prior(1))
        col_std = np.array([1.0, 3.0, 2.0]).std()
        assert state.imputed[0, 0] == pytest.approx(2.0 - 0.5 * col_std)

    def test_degenerate_column_offset_one(self):
        x = np.array([[2.0], [5.0], [5.0]])
        mask = np.array([[True], [False], [False]])
        limits = np.where(mask, 2.0, -np.inf)
        d = CensoredDataset(y=np.zeros(3), x=x, mask=mask, limits=limits)
        state = initialize_state(d, tight_prior(1))
        assert state.imputed[0, 0] == pytest.approx(1.0)

    def test_initial_omega_spd(self):
        rng = np.random.default_rng(1)
        for k in range(100):
            d = censored_dataset(np.random.default_rng(k), n=20, p=3)
            state = initialize_state(d, tight_prior(3))
            chol_spd(state.params.omega, "omega")  # must not raise


class TestRunChain:
    def test_scan_prob_one_updates_every_row(self):
        rng = np.random.default_rng(2)
        d = censored_dataset(rng)
        cfg = RunConfig(n_iter=30, burn_in=5, scan_prob=1.0, seed=3)
        store = run_chain(d, tight_prior(3), cfg)
        cens = d.censored_rows()
        assert np.all(store.update_counts[cens] == 30)
        assert np.all(store.update_counts[np.setdiff1d(np.arange(d.n), cens)] == 0)

    def test_bitwise_determinism(self):
        rng = np.random.default_rng(4)
        d = censored_dataset(rng)
        cfg = RunConfig(n_iter=40, burn_in=10, seed=9, store_imputations=True)
        s1 = run_chain(d, tight_prior(3), cfg)
        s2 = run_chain(d, tight_prior(3), cfg)
        assert np.array_equal(s1.beta_matrix(), s2.beta_matrix())
        assert np.array_equal(s1.sigma2_vector(), s2.sigma2_vector())
        assert np.array_equal(s1.imputation_matrix(), s2.imputation_matrix())

    def test_threads_do_not_change_results(self):
        rng = np.random.default_rng(5)
        d = censored_dataset(rng, n=30)
        cfg = RunConfig(n_iter=25, burn_in=5, scan_prob=1.0, seed=1,
                        store_imputations=True)
        s1 = run_chain(d, tight_prior(3), cfg, threads=1)
        s4 = run_chain(d, tight_prior(3), cfg, threads=4)
        assert np.array_equal(s1.beta_matrix(), s4.beta_matrix())
        assert np.array_equal(s1.imputation_matrix(), s4.imputation_matrix())

    def test_store_contents(self):
        rng = np.random.default_rng(6)
        d = censored_dataset(rng)
        cfg = RunConfig(n_iter=52, burn_in=10, thin=3, seed=0, store_imputations=True)
        store = run_chain(d, tight_prior(3), cfg)
        assert len(store) == 14  # ceil((52 - 10) / 3)
        assert store.complete
        assert store.censored_idx.shape[1] == 2
        for params in store.draws:
            assert params.sigma2 > 0
            chol_spd(params.omega, "omega")
        limits = d.limits[store.censored_idx[:, 0], store.censored_idx[:, 1]]
        for imp in store.imputations:
            assert np.all(imp <= limits)

    def test_partial_scan_carries_imputations_forward(self):
        rng = np.random.default_rng(7)
        d = censored_dataset(rng, n=60)
        cfg = RunConfig(n_iter=120, burn_in=0, scan_prob=0.3, seed=2,
                        store_imputations=True)
        store = run_chain(d, tight_prior(3), cfg)
        imp = store.imputation_matrix()
        unchanged = (imp[1:] == imp[:-1]).mean()
        # per-entry carry-forward probability is 1 - scan_prob
        assert 0.55 < unchanged < 0.85

    def test_block_error_wrapped(self):
        rng = np.random.default_rng(8)
        d = censored_dataset(rng)
        d.y = None  # beta block needs a response
        cfg = RunConfig(n_iter=10, burn_in=2)
        with pytest.raises(GibbsError) as err:
            run_chain(d, tight_prior(3), cfg)
        assert err.value.iteration == 0
        assert err.value.block == "beta"

    def test_invalid_dataset_rejected(self):
        rng = np.random.default_rng(9)
        d = censored_dataset(rng)
        i, j = np.argwhere(d.mask)[0]
        d.x[i, j] = 99.0  # placeholder no longer equals the limit
        with pytest.raises(ConfigError):
            run_chain(d, tight_prior(3), RunConfig(n_iter=10, burn_in=2))

    def test_extra_batch_shapes(self):
        rng = np.random.default_rng(10)
        d = censored_dataset(rng, n=30)
        extra = censored_dataset(rng, n=8)
        extra.y = None
        cfg = RunConfig(n_iter=30, burn_in=10, seed=4, store_imputations=True)
        store = run_chain(d, tight_prior(3), cfg, extra=extra)
        assert store.complete
        assert store.extra_censored_idx is not None

    def test_warm_start_init(self):
        rng = np.random.default_rng(11)
        d = censored_dataset(rng, n=25)
        prior = tight_prior(3)
        cfg = RunConfig(n_iter=20, burn_in=5, seed=6)
        first = run_chain(d, prior, cfg)
        resumed = run_chain(d, prior, cfg, init=first.final_state)
        assert resumed.complete
        bad = ChainState(params=first.final_state.params,
                         imputed=np.zeros((2, 3)))
        with pytest.raises(ConfigError):
            run_chain(d, prior, cfg, init=bad)


class TestGewekeCoupling:
    def test_successive_conditional_marginal_matches_prior(self):
        # alternate parameter draws from the full conditionals with data
        # re-simulated from those parameters; the parameter marginal must
        # equal the prior, checked on the first two moments of beta
        n, p = 10, 2
        prior = tight_prior(p)
        rng = np.random.default_rng(12)
        w = np.ones((n, 1))
        params = ModelParams(beta0=0.0, beta=np.zeros(p), sigma2=1.0,
                             gamma=np.zeros((1, p)), omega=np.eye(p))
        x = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        sweeps = 6000
        betas = np.empty((sweeps, p))
        sigma2s = np.empty(sweeps)
        for s in range(sweeps):
            d = CensoredDataset(y=y, x=x, mask=np.zeros((n, p), dtype=bool),
                                limits=np.full((n, p), -np.inf), w=w)
            state = ChainState(params=params, imputed=x.copy())
            state = draw_block(rng, "gamma_omega", d, state, prior)
            state = draw_block(rng, "sigma2", d, state, prior)
            state = draw_block(rng, "beta", d, state, prior)
            params = state.params
            betas[s] = params.beta
            sigma2s[s] = params.sigma2
            # forward-simulate fresh data from the new parameters
            x = w @ params.gamma + rng.standard_normal((n, p)) @ np.linalg.cholesky(
                params.omega).T
            y = params.beta0 + x @ params.beta + np.sqrt(params.sigma2) * \
                rng.standard_normal(n)
        from censreg.evaluate import ess
        for j in range(p):
            chain = betas[500:, j]
            se = chain.std() / np.sqrt(ess(chain))
            assert abs(chain.mean()) < 3 * se + 0.02
            # prior variance of beta_j is tau_beta^2 = 1
            m2 = chain**2
            se2 = m2.std() / np.sqrt(ess(m2))
            assert abs(m2.mean() - 1.0) < 3 * se2 + 0.05
        s2 = sigma2s[500:]
        # inverse-gamma(3, 3) prior mean is 3 / 2
        se_s = s2.std() / np.sqrt(ess(s2))
        assert abs(s2.mean() - 1.5) < 3 * se_s + 0.1
