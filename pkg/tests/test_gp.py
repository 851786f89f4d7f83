import math

import numpy as np
import pytest

from gpdeconv import (ConvKernelPair, DimensionError, FilterSpec, KernelSpec,
                      NotPositiveDefiniteError, build_bundle,
                      cholesky_jittered, condition, log_marginal_likelihood,
                      mvn_sample, psd_sqrt)
from gpdeconv.covops import kernel_matrix


def random_spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


class TestCholesky:
    def test_identity(self):
        factor = cholesky_jittered(np.eye(3))
        np.testing.assert_array_equal(factor.lower, np.eye(3))
        assert factor.jitter == 0.0

    def test_rank_one_needs_jitter(self):
        factor = cholesky_jittered(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert factor.jitter > 0.0
        recon = factor.lower @ factor.lower.T
        target = np.array([[1.0, 1.0], [1.0, 1.0]]) + factor.jitter * np.eye(2)
        assert np.max(np.abs(recon - target)) <= 1e-10

    def test_well_conditioned_kernel_matrix_small_jitter(self):
        t = np.linspace(0, 10, 40)
        pair = ConvKernelPair(KernelSpec.se(1.0, rate=10.0),
                              FilterSpec.se(1.0, rate=10.0), "analytic")
        bundle = build_bundle(pair, t, t, 0.01)
        factor = cholesky_jittered(bundle.k_y)
        assert factor.jitter <= 1e-6 * np.mean(np.diag(bundle.k_y))

    def test_reconstruction_accuracy(self):
        rng = np.random.default_rng(0)
        for n in (1, 3, 8, 20):
            a = random_spd(rng, n)
            factor = cholesky_jittered(a)
            recon = factor.lower @ factor.lower.T - factor.jitter * np.eye(n)
            assert np.max(np.abs(recon - a)) <= 1e-10 * np.max(np.abs(a))

    def test_hopeless_matrix_raises(self):
        with pytest.raises(NotPositiveDefiniteError) as err:
            cholesky_jittered(np.array([[1.0, 0.0], [0.0, -5.0]]))
        assert err.value.jitter > 0

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            cholesky_jittered(np.zeros((2, 3)))


class TestCondition:
    def test_empty_observations_return_prior(self):
        prior = np.array([[2.0, 0.5], [0.5, 2.0]])
        post = condition(prior, np.zeros((2, 0)), None, np.zeros(0))
        np.testing.assert_array_equal(post.mean, np.zeros(2))
        np.testing.assert_array_equal(post.cov, prior)

    def test_noiseless_interpolation(self):
        factor = cholesky_jittered(np.array([[1.0]]))
        post = condition(np.array([[1.0]]), np.array([[1.0]]), factor, np.array([2.0]))
        assert post.mean[0] == pytest.approx(2.0, abs=1e-12)
        assert post.variance[0] == pytest.approx(0.0, abs=1e-12)

    def test_matches_explicit_two_by_two_inverse(self):
        t = np.array([0.0, 1.0])
        k = kernel_matrix(KernelSpec.se(1.0, 1.0), t)
        k_y = k + 0.01 * np.eye(2)
        cross = kernel_matrix(KernelSpec.se(1.0, 1.0), np.array([0.0]), t)
        y = np.array([1.0, -1.0])
        post = condition(np.array([[1.0]]), cross, cholesky_jittered(k_y), y)
        brute = cross @ np.linalg.inv(k_y) @ y
        assert abs(post.mean[0] - brute[0]) < 1e-12

    def test_posterior_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            t_obs = np.sort(rng.uniform(0, 10, size=8))
            t_q = rng.uniform(0, 10, size=5)
            spec = KernelSpec.se(1.0, float(rng.uniform(0.3, 2.0)))
            k_oo = kernel_matrix(spec, t_obs) + 0.05 * np.eye(8)
            k_qq = kernel_matrix(spec, t_q)
            k_qo = kernel_matrix(spec, t_q, t_obs)
            post = condition(k_qq, k_qo, cholesky_jittered(k_oo),
                             rng.normal(size=8))
            assert np.all(post.variance <= np.diag(k_qq) + 1e-9)

    def test_sequential_equals_joint_conditioning(self):
        # condition on A then on B (propagating the joint) == condition on A+B
        rng = np.random.default_rng(2)
        spec = KernelSpec.se(1.0, 1.0)
        noise = 0.1
        for _ in range(5):
            t_obs = np.sort(rng.uniform(0, 10, size=6))
            t_a, t_b = t_obs[:3], t_obs[3:]
            t_q = rng.uniform(0, 10, size=4)
            y = rng.normal(size=6)
            y_a, y_b = y[:3], y[3:]

            k = lambda a, b=None: kernel_matrix(spec, a, b)
            joint_factor = cholesky_jittered(k(t_obs) + noise * np.eye(6))
            direct = condition(k(t_q), k(t_q, t_obs), joint_factor, y)

            # stage 1: posterior over (q, b) given a
            stacked = np.concatenate([t_q, t_b])
            factor_a = cholesky_jittered(k(t_a) + noise * np.eye(3))
            stage1 = condition(k(stacked), k(stacked, t_a), factor_a, y_a)
            # stage 2: condition the stage-1 Gaussian on y_b = f_b + noise
            cov = stage1.cov
            q_part, b_part = slice(0, 4), slice(4, 7)
            factor_b = cholesky_jittered(cov[b_part, b_part] + noise * np.eye(3))
            stage2 = condition(cov[q_part, q_part], cov[q_part, b_part], factor_b,
                               y_b - stage1.mean[b_part],
                               prior_mean_q=stage1.mean[q_part])
            np.testing.assert_allclose(stage2.mean, direct.mean, atol=1e-8)

    def test_shape_mismatch(self):
        factor = cholesky_jittered(np.eye(2))
        with pytest.raises(DimensionError):
            condition(np.eye(3), np.zeros((3, 1)), factor, np.zeros(2))


class TestLogMarginalLikelihood:
    def test_unit_case(self):
        factor = cholesky_jittered(np.array([[1.0]]))
        got = log_marginal_likelihood(factor, np.array([0.0]))
        assert got == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
        assert got == pytest.approx(-0.918939, abs=1e-6)

    def test_scaled_case(self):
        factor = cholesky_jittered(np.array([[4.0]]))
        got = log_marginal_likelihood(factor, np.array([2.0]))
        want = -0.5 * math.log(2 * math.pi) - 0.5 * math.log(4.0) - 0.5
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(-2.112086, abs=1e-6)

    def test_two_independent_standard_normals(self):
        factor = cholesky_jittered(np.eye(2))
        got = log_marginal_likelihood(factor, np.array([1.0, 1.0]))
        assert got == pytest.approx(-math.log(2 * math.pi) - 1.0, abs=1e-12)

    def test_matches_brute_force_determinant(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = random_spd(rng, 5)
            y = rng.normal(size=5)
            got = log_marginal_likelihood(cholesky_jittered(a), y)
            want = (-2.5 * math.log(2 * math.pi)
                    - 0.5 * math.log(np.linalg.det(a))
                    - 0.5 * y @ np.linalg.inv(a) @ y)
            assert got == pytest.approx(want, abs=1e-10)


class TestSampling:
    def test_zero_covariance_returns_mean(self):
        mean = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(mvn_sample(mean, np.zeros((3, 3)), 0), mean)

    def test_seed_determinism(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        a = mvn_sample(np.zeros(2), cov, 42)
        b = mvn_sample(np.zeros(2), cov, 42)
        np.testing.assert_array_equal(a, b)
        c = mvn_sample(np.zeros(2), cov, 43)
        assert not np.array_equal(a, c)

    def test_empirical_covariance(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        rng = np.random.default_rng(7)
        draws = np.array([mvn_sample(np.zeros(2), cov, rng) for _ in range(10000)])
        emp = np.cov(draws.T)
        assert np.max(np.abs(emp - cov)) < 0.05

    def test_psd_sqrt_floors_numerical_zeros(self):
        root = psd_sqrt(np.array([[1e-14, 0.0], [0.0, 1.0]]), floor=1e-12)
        recon = root @ root.T
        assert recon[0, 0] == 0.0
        assert recon[1, 1] == pytest.approx(1.0)
