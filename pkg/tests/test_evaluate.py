import numpy as np
import pytest
from scipy.stats import norm

from censreg.datagen import GenSpec, generate
from censreg.evaluate import (
    as_complete,
    compare_joint_vs_univariate,
    emit_density_data,
    ess,
    log_predictive_score,
    naive_impute,
    random_scan_efficiency,
)
from censreg.gibbs import RunConfig
from censreg.model import CensoredDataset, default_prior
from censreg.predict import PredictiveDraws


def preds_from(mu, sigma2, y_draws=None):
    mu = np.asarray(mu, dtype=float)
    s2 = np.full(mu.size, sigma2, dtype=float)
    if y_draws is None:
        y_draws = mu.copy()
    return PredictiveDraws(y_draws=np.asarray(y_draws, dtype=float),
                           x_m_draws=np.empty((mu.size, 0)),
                           mu_draws=mu, sigma2_draws=s2, strategy="approximate")


class TestEss:
    def test_iid_chain(self):
        chain = np.random.default_rng(0).standard_normal(10**4)
        assert 8.5e3 <= ess(chain) <= 1.15e4

    def test_ar1_oracle(self):
        rng = np.random.default_rng(1)
        phi = 0.9
        n = 10**5
        eps = rng.standard_normal(n)
        chain = np.empty(n)
        chain[0] = eps[0]
        for t in range(1, n):
            chain[t] = phi * chain[t - 1] + eps[t]
        target = n * (1 - phi) / (1 + phi)
        assert ess(chain) == pytest.approx(target, rel=0.20)

    def test_constant_chain_convention(self):
        with pytest.warns(RuntimeWarning):
            assert ess(np.full(500, 3.0)) == 500.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            ess(np.arange(5.0))


class TestLogPredictiveScore:
    def test_peak_density(self):
        rep = log_predictive_score([preds_from([1.0], 1.0)], [1.0])
        assert rep.total == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_duplicate_invariance(self):
        one = log_predictive_score([preds_from([0.3], 2.0)], [1.1]).total
        two = log_predictive_score([preds_from([0.3, 0.3], 2.0)], [1.1]).total
        assert one == pytest.approx(two, abs=1e-12)

    def test_hand_five_draw_average(self):
        mus = [0.0, 0.5, -0.2, 1.0, 0.3]
        y = 0.4
        rep = log_predictive_score([preds_from(mus, 1.3)], [y])
        dens = [norm.pdf(y, loc=m, scale=np.sqrt(1.3)) for m in mus]
        assert rep.total == pytest.approx(np.log(np.mean(dens)), abs=1e-12)

    def test_total_is_sum(self):
        preds = [preds_from([0.1 * k], 1.0) for k in range(6)]
        y = np.linspace(-1, 1, 6)
        rep = log_predictive_score(preds, y)
        assert rep.total == pytest.approx(rep.per_row_log_scores.sum(), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            log_predictive_score([preds_from([0.0], 1.0)], [1.0, 2.0])


class TestNaiveImpute:
    def test_rule_application(self):
        d = CensoredDataset(y=None, x=np.array([[5.0, 3.0, 2.0]]),
                            mask=np.array([[False, False, True]]),
                            limits=np.array([[-np.inf, -np.inf, 2.0]]))
        assert np.array_equal(naive_impute(d), [[5.0, 3.0, 2.0]])

    def test_no_censoring_identity(self):
        x = np.random.default_rng(2).standard_normal((4, 3))
        d = CensoredDataset(y=None, x=x, mask=np.zeros((4, 3), dtype=bool),
                            limits=np.full((4, 3), -np.inf))
        assert np.array_equal(naive_impute(d), x)

    def test_fully_censored_row(self):
        d = CensoredDataset(y=None, x=np.array([[2.0, 2.0]]),
                            mask=np.array([[True, True]]),
                            limits=np.array([[2.0, 2.0]]))
        out = naive_impute(d)
        assert np.array_equal(out, [[2.0, 2.0]])
        assert np.all(out[d.mask] <= d.limits[d.mask])

    def test_as_complete_clears_mask(self):
        d = CensoredDataset(y=np.zeros(1), x=np.array([[1.0, 2.0]]),
                            mask=np.array([[True, False]]),
                            limits=np.array([[1.0, -np.inf]]))
        c = as_complete(d, naive_impute(d))
        assert not c.mask.any()
        assert np.array_equal(c.y, d.y)


class TestEmitDensityData:
    def test_standard_normal_oracle(self):
        samples = np.random.default_rng(3).standard_normal(10**5)
        pts, dens = emit_density_data(samples, 512)
        at_zero = dens[np.argmin(np.abs(pts))]
        assert at_zero == pytest.approx(0.3989, abs=0.02)

    def test_repeated_value_spike(self):
        pts, dens = emit_density_data(np.full(100, 2.5))
        assert np.isinf(dens[np.argmin(np.abs(pts - 2.5))])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            emit_density_data(np.array([]))


class TestJointVsUnivariate:
    def test_zero_censoring_empty_table(self):
        spec = GenSpec(n=40, n_test=5, p=2, delta=np.inf, seed=4)
        train, _, _ = generate(spec)
        prior = default_prior(2, m=float(np.var(train.y)))
        cfg = RunConfig(n_iter=160, burn_in=40, seed=0)
        comp = compare_joint_vs_univariate(train, prior, cfg)
        assert comp.ratio_quantiles == {}
        assert comp.ratios.size == 0

    def test_independent_covariates_ratios_near_one(self):
        spec = GenSpec(n=60, n_test=5, p=3, target_censor_rate=0.3, seed=5)
        train, _, _ = generate(spec)
        prior = default_prior(3, m=float(np.var(train.y)))
        cfg = RunConfig(n_iter=1700, burn_in=200, seed=1, scan_prob=1.0)
        comp = compare_joint_vs_univariate(train, prior, cfg)
        assert comp.ratios.size == int(train.mask.sum())
        assert 0.5 <= comp.ratio_quantiles["25%"]
        assert comp.ratio_quantiles["75%"] <= 2.0

    def test_too_short_rejected(self):
        spec = GenSpec(n=30, n_test=5, p=2, target_censor_rate=0.3, seed=6)
        train, _, _ = generate(spec)
        prior = default_prior(2, m=float(np.var(train.y)))
        cfg = RunConfig(n_iter=60, burn_in=20, seed=0)
        with pytest.raises(ValueError):
            compare_joint_vs_univariate(train, prior, cfg)


class TestRandomScanEfficiency:
    def test_self_ratio_is_one(self):
        spec = GenSpec(n=50, n_test=5, p=2, target_censor_rate=0.3, seed=7)
        train, _, _ = generate(spec)
        prior = default_prior(2, m=float(np.var(train.y)))
        cfg = RunConfig(n_iter=400, burn_in=100, seed=2)
        rows = random_scan_efficiency(train, prior, [1.0], cfg)
        assert len(rows) == 1
        assert rows[0].beta_ess_per_sec_ratio == pytest.approx(1.0)
        assert rows[0].imputation_ess_per_sec_ratio == pytest.approx(1.0)
        assert rows[0].predictive_ess_per_sec_ratio == pytest.approx(1.0)
