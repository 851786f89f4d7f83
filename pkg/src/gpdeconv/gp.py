"""Dense Gaussian linear algebra: jittered Cholesky, conditioning,
log marginal likelihood, and seeded multivariate-normal sampling.

Every inverse is realized as a triangular solve against the stored
factor; explicit matrix inverses are never formed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotPositiveDefiniteError

# Diagonal entries this negative (relative to the prior scale) indicate a
# broken covariance rather than roundoff.
_NEGATIVE_VARIANCE_TOL = 1e-10

_DEFAULT_JITTER_STEPS = (1.0, 10.0, 100.0, 1e3, 1e4)


@dataclass(frozen=True, eq=False)
class SpdFactor:
    """Lower-triangular Cholesky factor of A + jitter * I."""

    lower: np.ndarray
    jitter: float
    size: int

    def solve(self, b):
        """Solve (L L^T) x = b via two triangular solves."""
        y = scipy.linalg.solve_triangular(self.lower, b, lower=True, check_finite=False)
        return scipy.linalg.solve_triangular(self.lower.T, y, lower=False, check_finite=False)

    def half_solve(self, b):
        """Solve L y = b; useful for quadratic forms b^T A^-1 b = |y|^2."""
        return scipy.linalg.solve_triangular(self.lower, b, lower=True, check_finite=False)

    def log_det(self):
        """log det(A + jitter I) from the factor diagonal."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def _failing_pivot(exc):
    match = re.search(r"(\d+)", str(exc))
    return int(match.group(1)) if match else None


def cholesky_jittered(a, jitter_schedule=None) -> SpdFactor:
    """Factor a symmetric matrix, escalating diagonal jitter until it works.

    The matrix is symmetrized first.  Jitter 0 is always attempted; the
    default escalation is ``1e-10 * mean(diag) * {1, 10, 100, 1e3, 1e4}``.
    Raises :class:`NotPositiveDefiniteError` if every level fails.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return SpdFactor(np.zeros((0, 0)), 0.0, 0)
    a = 0.5 * (a + a.T)
    if jitter_schedule is None:
        base = 1e-10 * float(np.mean(np.diag(a)))
        if not np.isfinite(base) or base <= 0.0:
            base = 1e-10 * max(float(np.max(np.abs(a))), 1.0)
        jitter_schedule = [base * step for step in _DEFAULT_JITTER_STEPS]
    last_error, last_jitter = None, 0.0
    for jitter in [0.0, *jitter_schedule]:
        try:
            lower = scipy.linalg.cholesky(a + jitter * np.eye(n), lower=True,
                                          check_finite=False)
        except np.linalg.LinAlgError as exc:
            last_error, last_jitter = exc, jitter
            continue
        return SpdFactor(lower, float(jitter), n)
    raise NotPositiveDefiniteError(
        f"matrix not positive definite after jitter up to {last_jitter:.3e}: {last_error}",
        pivot=_failing_pivot(last_error), jitter=last_jitter)


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """Posterior mean and covariance, plus the factor that produced them."""

    mean: np.ndarray
    cov: np.ndarray
    factor: SpdFactor | None

    @property
    def variance(self):
        """Clamped diagonal of the covariance."""
        return np.maximum(np.diag(self.cov), 0.0)

    @property
    def std(self):
        return np.sqrt(self.variance)


def condition(prior_cov_qq, cross_cov_qo, obs_factor, obs_values,
              prior_mean_q=None) -> GaussianPosterior:
    """Gaussian conditioning on observations with covariance factor ``obs_factor``.

    mean = prior_mean + C K^-1 y, cov = P - C K^-1 C^T, with all inverses
    done through the triangular factor.  An empty observation set returns
    the prior unchanged.  Tiny negative posterior variances (roundoff) are
    clamped at zero; anything below ``-1e-10 * max prior variance`` raises.
    """
    prior = np.asarray(prior_cov_qq, dtype=float)
    cross = np.asarray(cross_cov_qo, dtype=float)
    y = np.asarray(obs_values, dtype=float)
    nq = prior.shape[0]
    mean0 = np.zeros(nq) if prior_mean_q is None else np.asarray(prior_mean_q, dtype=float)
    if cross.shape != (nq, y.shape[0]) or (obs_factor is not None
                                           and obs_factor.size != y.shape[0]):
        raise DimensionError(
            f"inconsistent shapes: prior {prior.shape}, cross {cross.shape}, "
            f"obs {y.shape}")
    if y.shape[0] == 0:
        return GaussianPosterior(mean0.copy(), prior.copy(), obs_factor)
    mean = mean0 + cross @ obs_factor.solve(y)
    half = obs_factor.half_solve(cross.T)
    cov = prior - half.T @ half
    cov = 0.5 * (cov + cov.T)
    scale = max(float(np.max(np.diag(prior))), 0.0) if nq else 0.0
    worst = float(np.min(np.diag(cov))) if nq else 0.0
    if worst < -_NEGATIVE_VARIANCE_TOL * max(scale, 1e-300):
        raise NotPositiveDefiniteError(
            f"posterior variance {worst:.3e} is too negative for prior scale {scale:.3e}")
    np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
    return GaussianPosterior(mean, cov, obs_factor)


def log_marginal_likelihood(factor: SpdFactor, y) -> float:
    """Gaussian log density of y under N(0, A) given A's factor.

    Uses log det = 2 sum log diag(L) and one triangular solve for the
    quadratic form.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[0] != factor.size:
        raise DimensionError(f"factor size {factor.size} != data size {y.shape[0]}")
    half = factor.half_solve(y)
    return float(-0.5 * factor.size * np.log(2.0 * np.pi)
                 - 0.5 * factor.log_det()
                 - 0.5 * np.dot(half, half))


def psd_sqrt(cov, floor=0.0):
    """Symmetric square root of a PSD matrix with eigenvalue flooring.

    Eigenvalues below ``floor`` (and all negatives) are treated as exact
    zeros, so covariances that are numerically zero produce a zero root
    rather than spurious noise.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.size == 0:
        return np.zeros_like(cov)
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    vals = np.where(vals > max(floor, 0.0), vals, 0.0)
    return vecs * np.sqrt(vals)


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def mvn_sample(mean, cov, seed):
    """One draw from N(mean, cov) using a seeded deterministic generator.

    Identical seeds give identical output on a given platform.  The
    covariance is factored with the jittered Cholesky; an all-zero
    covariance returns the mean exactly.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    rng = _as_generator(seed)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise DimensionError(f"cov shape {cov.shape} does not match mean {mean.shape}")
    if not np.any(cov):
        return mean.copy()
    factor = cholesky_jittered(cov)
    return mean + factor.lower @ rng.standard_normal(mean.shape[0])
