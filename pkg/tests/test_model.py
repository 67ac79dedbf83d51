import numpy as np
import pytest

from censreg.model import (
    CensoredDataset,
    ConfigError,
    FactorizationError,
    PriorHyper,
    chol_spd,
    default_prior,
    partition_gaussian,
    sigma2_hyper,
    validate_dataset,
)


def random_spd(rng, p):
    a = rng.standard_normal((p, p))
    return a @ a.T + p * np.eye(p)


class TestCholSpd:
    def test_plain(self):
        a = np.array([[4.0, 1.0], [1.0, 3.0]])
        lo = chol_spd(a, "a")
        assert np.allclose(lo @ lo.T, a)

    def test_jitter_rescues_semidefinite(self):
        # rank-deficient by construction; jitter makes it factorizable
        v = np.array([1.0, 2.0])
        a = np.outer(v, v)
        lo = chol_spd(a, "a")
        assert np.all(np.isfinite(lo))

    def test_hard_failure_names_block(self):
        a = np.array([[1.0, 0.0], [0.0, -5.0]])
        with pytest.raises(FactorizationError) as err:
            chol_spd(a, "omega_oo")
        assert err.value.block == "omega_oo"


class TestPartitionGaussian:
    def test_hand_schur_complement(self):
        mean = np.zeros(2)
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        m, c = partition_gaussian(mean, cov, np.array([1]), np.array([1.0]))
        assert m == pytest.approx(0.8, abs=1e-12)
        assert c[0, 0] == pytest.approx(0.36, abs=1e-12)

    def test_independence_case(self):
        mean = np.array([1.0, 2.0, 3.0])
        m, c = partition_gaussian(mean, np.eye(3), np.array([2]), np.array([9.0]))
        assert np.allclose(m, mean[:2])
        assert np.allclose(c, np.eye(2))

    def test_empty_conditioning(self):
        mean = np.array([1.0, -1.0])
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        m, c = partition_gaussian(mean, cov, np.array([], dtype=int), np.array([]))
        assert np.array_equal(m, mean)
        assert np.array_equal(c, cov)

    def test_conditional_cov_stays_spd(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.integers(2, 11)
            cov = random_spd(rng, p)
            k = rng.integers(1, p)
            obs = rng.choice(p, size=k, replace=False)
            _, c = partition_gaussian(np.zeros(p), cov, obs, rng.standard_normal(k))
            chol_spd(c, "cond_cov")  # must not raise

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        p = 6
        cov = random_spd(rng, p)
        mean = rng.standard_normal(p)
        obs = np.array([1, 4])
        vals = rng.standard_normal(2)
        m1, c1 = partition_gaussian(mean, cov, obs, vals)

        perm = rng.permutation(p)
        cov_p = cov[np.ix_(perm, perm)]
        mean_p = mean[perm]
        obs_p = np.array([int(np.flatnonzero(perm == k)[0]) for k in obs])
        order = np.argsort(obs_p)
        m2, c2 = partition_gaussian(mean_p, cov_p, obs_p[order], vals[order])
        # missing coords of the permuted problem, mapped back to native labels
        miss_p = np.setdiff1d(np.arange(p), obs_p)
        unperm = np.argsort(perm[miss_p])
        assert np.allclose(m2[unperm], m1, atol=1e-12)
        assert np.allclose(c2[np.ix_(unperm, unperm)], c1, atol=1e-12)

    def test_indefinite_observed_block_raises(self):
        cov = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, 2.0, 1.0]])
        with pytest.raises(FactorizationError):
            partition_gaussian(np.zeros(3), cov, np.array([1, 2]), np.array([0.0, 0.0]))


class TestValidateDataset:
    def make(self):
        x = np.array([[1.0, 2.0], [3.0, 0.5], [2.0, 2.0]])
        mask = np.zeros((3, 2), dtype=bool)
        mask[1, 1] = True
        limits = np.where(mask, x, -np.inf)
        return CensoredDataset(y=np.zeros(3), x=x, mask=mask, limits=limits)

    def test_censor_fraction(self):
        rep = validate_dataset(self.make())
        assert rep.ok
        assert rep.censor_fraction == pytest.approx(1 / 6)
        assert not rep.fully_censored_rows

    def test_placeholder_violation(self):
        d = self.make()
        d.x[1, 1] = 99.0  # no longer equals its limit
        rep = validate_dataset(d)
        assert not rep.ok
        assert rep.placeholder_violations == [(1, 1)]

    def test_fully_censored_row_flagged(self):
        d = self.make()
        d.mask[2] = True
        d.limits[2] = d.x[2]
        rep = validate_dataset(d)
        assert rep.fully_censored_rows == [2]

    def test_dimension_mismatch(self):
        d = self.make()
        d.y = np.zeros(5)
        rep = validate_dataset(d)
        assert not rep.ok
        assert any("y" in msg for msg in rep.dimension_mismatches)


class TestPriors:
    def test_hyper_positivity(self):
        with pytest.raises(ConfigError):
            PriorHyper(tau_beta0=0.0, tau_beta=1, a=1, b=1, tau_gamma=1,
                       A=np.eye(2), kappa=5)

    def test_kappa_bound(self):
        with pytest.raises(ConfigError):
            PriorHyper(tau_beta0=1, tau_beta=1, a=1, b=1, tau_gamma=1,
                       A=np.eye(4), kappa=3.0)

    def test_sigma2_hyper_variants(self):
        m, v = 4.0, 2000.0**2
        a, b = sigma2_hyper(m, v, "dispersion")
        assert a == pytest.approx(m**2 / v + 2)
        assert b == pytest.approx(m * (m**2 / v + 1))
        a2, b2 = sigma2_hyper(m, v, "moment")
        assert a2 == a
        assert b2 == pytest.approx(m * (a - 1))
        with pytest.raises(ConfigError):
            sigma2_hyper(m, v, "bogus")

    def test_default_prior_shapes(self):
        pr = default_prior(12, m=3.0)
        assert pr.A.shape == (12, 12)
        assert pr.kappa == 14.0  # raised above p - 1
        assert pr.tau_beta0 == pytest.approx(1e4)


class TestCensoredDataset:
    def test_subset_and_props(self):
        x = np.arange(12, dtype=float).reshape(4, 3)
        mask = np.zeros((4, 3), dtype=bool)
        d = CensoredDataset(y=np.arange(4.0), x=x, mask=mask,
                            limits=np.full((4, 3), -np.inf),
                            w=np.ones((4, 2)))
        assert (d.n, d.p, d.r) == (4, 3, 2)
        sub = d.subset(np.array([0, 2]))
        assert sub.n == 2
        assert np.array_equal(sub.y, [0.0, 2.0])

    def test_w_or_intercept_default(self):
        d = CensoredDataset(y=None, x=np.zeros((3, 2)),
                            mask=np.zeros((3, 2), dtype=bool),
                            limits=np.zeros((3, 2)))
        assert np.array_equal(d.w_or_intercept(), np.ones((3, 1)))

    def test_censored_rows(self):
        mask = np.zeros((3, 2), dtype=bool)
        mask[0, 1] = True
        d = CensoredDataset(y=None, x=np.zeros((3, 2)), mask=mask,
                            limits=np.zeros((3, 2)))
        assert np.array_equal(d.censored_rows(), [0])
