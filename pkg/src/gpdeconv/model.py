"""The generative side: joint finite samples of source, convolution, and
observations, and the conditional law of the convolution given the source.

Sampling is hierarchical: draw the source vector from its prior, then the
convolution vector from its Gaussian conditional, then add observation
noise.  Noise enters the observations only; the convolution itself is
noiseless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import covops, gp
from .covops import ConvKernelPair
from .errors import ParameterError
from .kernels import FilterSpec, KernelSpec

# Conditional covariances of f|x are exactly singular in degenerate cases
# (e.g. a unit point-mass filter); eigenvalues below this fraction of the
# prior scale are numerical zeros.
_CONDITIONAL_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GenerativeConfig:
    """Everything needed to draw one (source, convolution, observations) triple."""

    source: KernelSpec
    filter: FilterSpec
    t_x: np.ndarray
    t_f: np.ndarray
    noise_variance: float = 0.0
    seed: int = 0
    method: str = covops.DISCRETE_SUM
    quad_nodes: int = 801
    quad_span: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        t_x = np.asarray(self.t_x, dtype=float)
        t_f = np.asarray(self.t_f, dtype=float)
        if t_x.size == 0 or t_f.size == 0:
            raise ParameterError("location vectors must be nonempty")
        if not (np.all(np.isfinite(t_x)) and np.all(np.isfinite(t_f))):
            raise ParameterError("locations must be finite")
        if t_x.ndim != 1 or t_f.ndim != 1:
            raise ParameterError("sampling supports 1D location vectors")
        if np.any(np.diff(t_x) <= 0):
            raise ParameterError("t_x must be sorted strictly increasing")
        if self.noise_variance < 0:
            raise ParameterError("noise variance must be >= 0")
        object.__setattr__(self, "t_x", t_x)
        object.__setattr__(self, "t_f", t_f)

    def pair(self):
        return ConvKernelPair(self.source, self.filter, self.method,
                              quad_nodes=self.quad_nodes, quad_span=self.quad_span)


@dataclass(frozen=True, eq=False)
class JointSample:
    """Aligned draws: x over t_x, f over t_f, y = f + noise over t_f."""

    x: np.ndarray
    f: np.ndarray
    y: np.ndarray
    f_std_given_x: np.ndarray


def _conditional(cfg: GenerativeConfig, x, factor_x=None):
    pair = cfg.pair()
    if factor_x is None:
        factor_x = gp.cholesky_jittered(covops.kernel_matrix(cfg.source, cfg.t_x))
    k_f = covops.kf_matrix(pair, cfg.t_f)
    # K_fx over (t_f, t_x): transpose of the source-first cross block.
    k_fx = covops.kxf_matrix(pair, cfg.t_x, cfg.t_f).T
    post = gp.condition(k_f, k_fx, factor_x, x)
    return post, k_f


def conditional_f_moments(cfg: GenerativeConfig, x):
    """Mean and variance of the convolution vector given source values.

    Equivalent to interpolating the source posterior mean and pushing it
    through the filter (the discrete sums make this identity exact).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != cfg.t_x.shape[0]:
        raise ParameterError("source value count must match t_x")
    post, _ = _conditional(cfg, x)
    return post.mean, post.variance


def sample_joint(cfg: GenerativeConfig) -> JointSample:
    """Draw (x, f, y) hierarchically; deterministic under cfg.seed.

    The conditional covariance of f given x is factored with eigenvalue
    flooring relative to the prior K_f scale, so exactly-degenerate
    conditionals (point-mass filter with t_f = t_x) reproduce f = x instead
    of injecting factorization noise.
    """
    rng = np.random.default_rng(cfg.seed)
    k_x = covops.kernel_matrix(cfg.source, cfg.t_x)
    factor_x = gp.cholesky_jittered(k_x)
    x = factor_x.lower @ rng.standard_normal(cfg.t_x.shape[0])
    post, k_f = _conditional(cfg, x, factor_x)
    floor = _CONDITIONAL_FLOOR * max(float(np.max(np.diag(k_f))), 1e-300)
    root = gp.psd_sqrt(post.cov, floor=floor)
    f = post.mean + root @ rng.standard_normal(cfg.t_f.shape[0])
    y = f + np.sqrt(cfg.noise_variance) * rng.standard_normal(cfg.t_f.shape[0])
    return JointSample(x=x, f=f, y=y, f_std_given_x=post.std)
