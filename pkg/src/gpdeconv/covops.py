"""Covariances induced by convolving a stationary source with a filter.

``kf_eval`` gives the stationary covariance of the convolved process,
``kxf_eval`` the source/convolution cross-covariance (lag convention:
source time minus convolution time).  Three interchangeable evaluation
routes exist: closed forms for the SE/SE and Sinc/Sinc pairs, exact
finite sums for discrete filters, and midpoint quadrature as the single
sanctioned reduction of the continuous integrals to the discrete form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.signal import correlate2d

from . import kernels
from .errors import DimensionError, ParameterError, UnsupportedOperationError
from .kernels import DISCRETE, SE, SINC, FilterSpec, KernelSpec

ANALYTIC = "analytic"
DISCRETE_SUM = "discrete"
QUADRATURE = "quadrature"

METHODS = (ANALYTIC, DISCRETE_SUM, QUADRATURE)

_ANALYTIC_PAIRS = {(SE, SE), (SINC, SINC)}

# Above this tap count, uniformly spaced discrete filters take the grouped
# autocorrelation path (cost per lag 2m-1 instead of m^2).
_GROUPING_THRESHOLD = 12


@dataclass(frozen=True, eq=False)
class ConvKernelPair:
    """A (source kernel, filter, evaluation method) triple.

    ``quad_nodes``/``quad_span`` configure the midpoint rule and are only
    meaningful for the quadrature method; ``quad_span=None`` auto-sizes the
    span to the filter's effective support.
    """

    source: KernelSpec
    filter: FilterSpec
    method: str
    quad_nodes: int = 801
    quad_span: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.source.dim != self.filter.dim:
            raise DimensionError(
                f"source dim {self.source.dim} != filter dim {self.filter.dim}")
        if self.method == ANALYTIC:
            pair = (self.source.kind, self.filter.kind)
            if pair not in _ANALYTIC_PAIRS:
                raise UnsupportedOperationError(
                    f"no closed form for source={self.source.kind!r}, "
                    f"filter={self.filter.kind!r}; use discrete or quadrature")
            if self.source.dim != 1:
                raise DimensionError("analytic closed forms are 1D only")
        if self.method == DISCRETE_SUM and not self.filter.is_discrete:
            raise UnsupportedOperationError(
                "discrete-sum method requires a discrete filter")
        if self.method == QUADRATURE:
            if self.filter.is_discrete:
                raise UnsupportedOperationError(
                    "quadrature applies to continuous filters; "
                    "discrete filters already are finite sums")
            if self.quad_nodes < 1:
                raise ParameterError("quad_nodes must be >= 1")
        if self.source.dim == 2 and self.method != DISCRETE_SUM:
            raise DimensionError("2D covariances support the discrete-sum method only")

    def discretized(self):
        """The discrete pair realizing this pair's quadrature rule."""
        taps = kernels.discretize_filter(self.filter, self.quad_nodes, self.quad_span)
        return ConvKernelPair(self.source, taps, DISCRETE_SUM)


def se_convolved_params(sigma_x, l_x, sigma_h, l_h):
    """(magnitude, lengthscale) of the SE kernel h * h * K_x."""
    l_f2 = l_x**2 + 2.0 * l_h**2
    mag2 = (sigma_h**4 * sigma_x**2 * l_h * math.sqrt(math.pi)
            * math.sqrt(2.0 * math.pi * 2.0 * l_h**2 * l_x**2 / (2.0 * l_h**2 + l_x**2)))
    return math.sqrt(mag2), math.sqrt(l_f2)


def se_cross_params(sigma_x, l_x, sigma_h, l_h):
    """(magnitude, lengthscale) of the SE kernel h * K_x."""
    l2 = l_x**2 + l_h**2
    mag2 = (sigma_h**2 * sigma_x**2
            * math.sqrt(2.0 * math.pi * l_h**2 * l_x**2 / (l_h**2 + l_x**2)))
    return math.sqrt(mag2), math.sqrt(l2)


def sinc_convolved_params(sigma_x, w_x, sigma_h, w_h):
    """(magnitude, width) of the Sinc kernel with spectrum hhat^2 Kxhat."""
    w = min(w_x, w_h)
    mag2 = sigma_h**4 * sigma_x**2 * w / (w_h**2 * w_x)
    return math.sqrt(mag2), w


def sinc_cross_params(sigma_x, w_x, sigma_h, w_h):
    """(magnitude, width) of the Sinc kernel with spectrum hhat Kxhat."""
    w = min(w_x, w_h)
    mag2 = sigma_h**2 * sigma_x**2 * w / (w_h * w_x)
    return math.sqrt(mag2), w


def _analytic_kernels(pair):
    src, flt = pair.source, pair.filter
    if src.kind == SE:
        mf, lf = se_convolved_params(src.sigma, src.lengthscale, flt.sigma, flt.lengthscale)
        mx, lx = se_cross_params(src.sigma, src.lengthscale, flt.sigma, flt.lengthscale)
        return KernelSpec.se(mf, lf), KernelSpec.se(mx, lx)
    mf, wf = sinc_convolved_params(src.sigma, src.width, flt.sigma, flt.width)
    mx, wx = sinc_cross_params(src.sigma, src.width, flt.sigma, flt.width)
    return KernelSpec.sinc(mf, wf), KernelSpec.sinc(mx, wx)


def _uniform_spacing(locations):
    """Tap spacing if the 1D locations are uniform, else None."""
    if locations.size < 2:
        return None
    steps = np.diff(locations)
    step = steps[0]
    if step <= 0:
        return None
    if np.all(np.abs(steps - step) <= 1e-9 * abs(step)):
        return float(step)
    return None


def _weight_autocorrelation(flt):
    """Difference offsets and summed weight products c_k = sum w_i w_{i-k}.

    Valid for uniformly spaced 1D taps and rectangular 2D grids; the
    resulting pairs (offset, c) reproduce eq-style double sums exactly up
    to roundoff in the uniform-location reconstruction.
    """
    if flt.dim == 2:
        h, w = flt.grid_shape
        step = flt.grid_step
        grid = flt.weights.reshape(h, w)
        corr = correlate2d(grid, grid, mode="full")
        dr = (np.arange(2 * h - 1) - (h - 1)) * step
        dc = (np.arange(2 * w - 1) - (w - 1)) * step
        rr, cc = np.meshgrid(dr, dc, indexing="ij")
        offsets = np.column_stack([rr.ravel(), cc.ravel()])
        return offsets, corr.ravel()
    step = _uniform_spacing(flt.locations)
    if step is None:
        return None, None
    c = np.correlate(flt.weights, flt.weights, mode="full")
    k = np.arange(-(flt.weights.size - 1), flt.weights.size)
    return k * step, c


def _discrete_kf(pair, lag):
    """K_f(t) = sum_ij w_i w_j K_x(l_i - l_j + t)."""
    flt = pair.filter
    lag = np.asarray(lag, dtype=float)
    offsets, coeffs = _weight_autocorrelation(flt) \
        if (flt.dim == 2 or flt.weights.size > _GROUPING_THRESHOLD) else (None, None)
    if offsets is not None:
        out = np.zeros(lag.shape if flt.dim == 1 else lag.shape[:-1])
        for off, c in zip(offsets, coeffs):
            if c == 0.0:
                continue
            out += c * kernels.eval_kernel(pair.source, lag + off)
        return out
    w, loc = flt.weights, flt.locations
    out = np.zeros(np.shape(lag))
    for i in range(w.size):
        for j in range(w.size):
            out += w[i] * w[j] * kernels.eval_kernel(pair.source, lag + (loc[i] - loc[j]))
    return out


def _discrete_kxf(pair, lag):
    """K_xf(t) = sum_i w_i K_x(l_i - t), t = source time - convolution time."""
    flt = pair.filter
    lag = np.asarray(lag, dtype=float)
    out = np.zeros(lag.shape if flt.dim == 1 else lag.shape[:-1])
    for i in range(flt.weights.size):
        out += flt.weights[i] * kernels.eval_kernel(pair.source, flt.locations[i] - lag)
    return out


def kf_eval(pair: ConvKernelPair, lag):
    """Covariance of the convolved process at the given lag(s)."""
    scalar = np.isscalar(lag) or (np.asarray(lag).ndim == (1 if pair.source.dim == 2 else 0))
    if pair.method == ANALYTIC:
        conv, _ = _analytic_kernels(pair)
        return kernels.eval_kernel(conv, lag)
    if pair.method == QUADRATURE:
        pair = pair.discretized()
    out = _discrete_kf(pair, lag)
    return float(out) if scalar else out


def kxf_eval(pair: ConvKernelPair, lag):
    """Cross-covariance between source and convolution at the given lag(s).

    The lag is oriented source-time minus convolution-time.
    """
    scalar = np.isscalar(lag) or (np.asarray(lag).ndim == (1 if pair.source.dim == 2 else 0))
    if pair.method == ANALYTIC:
        _, cross = _analytic_kernels(pair)
        return kernels.eval_kernel(cross, lag)
    if pair.method == QUADRATURE:
        pair = pair.discretized()
    out = _discrete_kxf(pair, lag)
    return float(out) if scalar else out


def lag_table(a, b):
    """Pairwise lags a_i - b_j, shape (n, m) in 1D or (n, m, 2) in 2D."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        return a[:, None] - b[None, :]
    if a.ndim == 2 and a.shape[1] == 2:
        return a[:, None, :] - b[None, :, :]
    raise DimensionError("locations must have shape (n,) or (n, 2)")


def _shared_uniform_step(a, b):
    """Common grid step when both 1D location sets are uniform, else None."""
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        return None
    step = _uniform_spacing(a)
    if step is None:
        return None
    if b is a:
        return step
    step_b = _uniform_spacing(b)
    if step_b is None or abs(step_b - step) > 1e-9 * abs(step):
        return None
    return step


def _stationary_matrix(evaluate, a, b):
    """Dense matrix evaluate(a_i - b_j), using Toeplitz structure on grids.

    On uniform 1D grids only the first row/column lags are evaluated; the
    result is exact for stationary kernels up to lag roundoff at the 1-ulp
    level.
    """
    if _shared_uniform_step(a, b) is not None:
        col = evaluate(a - b[0])
        row = evaluate(a[0] - b)
        return scipy.linalg.toeplitz(col, row)
    return evaluate(lag_table(a, b))


def kernel_matrix(spec: KernelSpec, a, b=None):
    """Dense kernel matrix K(a_i - b_j); symmetrized when b is a."""
    a = np.asarray(a, dtype=float)
    evaluate = lambda lag: kernels.eval_kernel(spec, lag)
    if b is None:
        out = _stationary_matrix(evaluate, a, a)
        return 0.5 * (out + out.T)
    return _stationary_matrix(evaluate, a, np.asarray(b, dtype=float))


def kf_matrix(pair: ConvKernelPair, a, b=None):
    """Dense convolved-covariance matrix K_f(a_i - b_j)."""
    a = np.asarray(a, dtype=float)
    evaluate = lambda lag: kf_eval(pair, lag)
    if b is None:
        out = _stationary_matrix(evaluate, a, a)
        return 0.5 * (out + out.T)
    return _stationary_matrix(evaluate, a, np.asarray(b, dtype=float))


def kxf_matrix(pair: ConvKernelPair, queries, observations):
    """Cross matrix K_xf(q_i - o_j): rows index the source, columns the convolution."""
    return _stationary_matrix(lambda lag: kxf_eval(pair, lag),
                              np.asarray(queries, dtype=float),
                              np.asarray(observations, dtype=float))


@dataclass(frozen=True, eq=False)
class CovarianceBundle:
    """All dense blocks a deconvolution needs, plus the noisy K_y."""

    k_x_qq: np.ndarray
    k_f_oo: np.ndarray
    k_xf_qo: np.ndarray
    noise_variance: float
    k_y: np.ndarray


def build_bundle(pair: ConvKernelPair, obs_locations, query_locations, noise_variance):
    """Assemble K_x(q,q), K_f(o,o), K_xf(q,o) and K_y = K_f + noise I."""
    obs = np.asarray(obs_locations, dtype=float)
    qry = np.asarray(query_locations, dtype=float)
    if qry.shape[0] == 0:
        raise ParameterError("query location set must be nonempty")
    if noise_variance < 0:
        raise ParameterError("noise variance must be >= 0")
    _check_locations_dim(obs, pair.source.dim)
    _check_locations_dim(qry, pair.source.dim)
    k_x = kernel_matrix(pair.source, qry)
    if obs.shape[0] == 0:
        n = 0
        k_f = np.zeros((0, 0))
        k_xf = np.zeros((qry.shape[0], 0))
    else:
        n = obs.shape[0]
        k_f = kf_matrix(pair, obs)
        k_xf = kxf_matrix(pair, qry, obs)
    k_y = k_f + noise_variance * np.eye(n)
    return CovarianceBundle(k_x, k_f, k_xf, float(noise_variance), k_y)


def _check_locations_dim(loc, dim):
    if loc.shape[0] == 0:
        return
    if dim == 1 and loc.ndim != 1:
        raise DimensionError("1D locations must be a flat array")
    if dim == 2 and (loc.ndim != 2 or loc.shape[1] != 2):
        raise DimensionError("2D locations must have shape (n, 2)")


@dataclass(frozen=True)
class IntegrabilityProbe:
    """Numerical L1 estimate of K_f against the ||h||_1^2 ||K_x||_1 bound."""

    estimate: float
    bound: float
    passed: bool


def _l1_norm_filter(flt, nodes):
    half = kernels.effective_support(flt)
    t = np.linspace(-half, half, nodes)
    return float(np.trapezoid(np.abs(kernels.eval_filter(flt, t)), t))


def _l1_norm_kernel(spec, nodes):
    if spec.kind == SINC:
        raise UnsupportedOperationError("the Sinc kernel is not integrable")
    half = 12.0 * spec.lengthscale
    t = np.linspace(-half, half, nodes)
    return float(np.trapezoid(np.abs(kernels.eval_kernel(spec, t)), t))


def integrability_probe(pair: ConvKernelPair, span, nodes=20001):
    """Check that int |K_f| over ``span`` respects the product-of-L1-norms bound.

    Requires an integrable continuous filter and kernel; discrete filters
    are measures and Sinc variants are not integrable, so both are rejected.
    """
    if pair.filter.is_discrete:
        raise UnsupportedOperationError(
            "integrability probe applies to continuous (L1) filters only")
    if pair.filter.kind == SINC:
        raise UnsupportedOperationError("the Sinc filter is not integrable")
    bound = _l1_norm_filter(pair.filter, nodes) ** 2 * _l1_norm_kernel(pair.source, nodes)
    t = np.linspace(float(span[0]), float(span[1]), nodes)
    estimate = float(np.trapezoid(np.abs(kf_eval(pair, t)), t))
    return IntegrabilityProbe(estimate, bound, estimate <= bound * (1.0 + 1e-6))
