"""Stationary kernels and convolution filters.

Provides pointwise evaluation, continuous Fourier transforms (convention
``F{g}(xi) = int g(t) exp(-j 2 pi xi t) dt``), midpoint discretization of
continuous filters, and JSON (de)serialization.  All specs are immutable
and every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, UnsupportedOperationError

SE = "se"
SINC = "sinc"
SM = "sm"
TRIANGULAR = "triangular"
DISCRETE = "discrete"

KERNEL_KINDS = (SE, SINC, SM)
FILTER_KINDS = (SE, SINC, TRIANGULAR, DISCRETE)

# Series fallback for sin(z)/z once cancellation would dominate.
_SINC_SERIES_CUTOFF = 1e-6


def _require(cond, message):
    if not cond:
        raise ParameterError(message)


def _positive(value, name):
    _require(value is not None and np.isfinite(value) and value > 0.0,
             f"{name} must be finite and > 0, got {value!r}")
    return float(value)


def rate_to_lengthscale(rate):
    """Convert an inverse-lengthscale rate gamma = 1/(2 l^2) to l."""
    _positive(rate, "rate")
    return 1.0 / math.sqrt(2.0 * rate)


def lengthscale_to_rate(lengthscale):
    """Convert a lengthscale l to the rate gamma = 1/(2 l^2)."""
    _positive(lengthscale, "lengthscale")
    return 1.0 / (2.0 * lengthscale**2)


@dataclass(frozen=True)
class KernelSpec:
    """A stationary source covariance (SE, Sinc, or single-component SM).

    Parameters live in input units: ``lengthscale`` for SE/SM, ``width``
    (a bandwidth, cycles per input unit) for Sinc, ``frequency`` for SM.
    ``dim=2`` is allowed for SE only, evaluated on Euclidean distance.
    """

    kind: str
    sigma: float = 1.0
    lengthscale: float | None = None
    width: float | None = None
    frequency: float | None = None
    dim: int = 1

    def __post_init__(self):
        _require(self.kind in KERNEL_KINDS, f"unknown kernel kind {self.kind!r}")
        _positive(self.sigma, "sigma")
        if self.dim not in (1, 2):
            raise DimensionError(f"kernel dim must be 1 or 2, got {self.dim}")
        if self.dim == 2 and self.kind != SE:
            raise DimensionError("2D kernels are supported for the SE variant only")
        if self.kind in (SE, SM):
            _positive(self.lengthscale, "lengthscale")
        if self.kind == SINC:
            _positive(self.width, "width")
        if self.kind == SM:
            _require(self.frequency is not None and np.isfinite(self.frequency)
                     and self.frequency >= 0.0,
                     f"frequency must be finite and >= 0, got {self.frequency!r}")

    @classmethod
    def se(cls, sigma=1.0, lengthscale=None, rate=None, dim=1):
        return cls(SE, sigma=sigma, lengthscale=_resolve_lengthscale(lengthscale, rate), dim=dim)

    @classmethod
    def sinc(cls, sigma=1.0, width=1.0):
        return cls(SINC, sigma=sigma, width=width)

    @classmethod
    def sm(cls, sigma=1.0, lengthscale=None, rate=None, frequency=0.0):
        return cls(SM, sigma=sigma, lengthscale=_resolve_lengthscale(lengthscale, rate),
                   frequency=frequency)

    @property
    def rate(self):
        """Inverse-lengthscale rate gamma = 1/(2 l^2) (SE/SM only)."""
        if self.lengthscale is None:
            raise ParameterError(f"{self.kind!r} kernel has no lengthscale/rate")
        return lengthscale_to_rate(self.lengthscale)

    def to_dict(self):
        out = {"type": self.kind, "sigma": self.sigma, "dim": self.dim}
        if self.lengthscale is not None:
            out["lengthscale"] = self.lengthscale
        if self.width is not None:
            out["width"] = self.width
        if self.frequency is not None:
            out["frequency"] = self.frequency
        return out


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """A convolution filter: SE, Sinc, Triangular, or a discrete tap set.

    The discrete variant is a weighted sum of point masses at ``locations``
    (shape ``(m,)`` in 1D, ``(m, 2)`` in 2D, rectangular grid); weights may
    be negative.  It is a measure, not a function, so it has no pointwise
    evaluation.
    """

    kind: str
    sigma: float | None = None
    lengthscale: float | None = None
    width: float | None = None
    weights: np.ndarray | None = None
    locations: np.ndarray | None = None
    dim: int = 1
    grid_shape: tuple[int, int] | None = field(default=None)
    grid_step: float | None = field(default=None)

    def __post_init__(self):
        _require(self.kind in FILTER_KINDS, f"unknown filter kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise DimensionError(f"filter dim must be 1 or 2, got {self.dim}")
        if self.kind == DISCRETE:
            self._init_discrete()
            return
        if self.dim == 2:
            raise DimensionError("2D continuous filters are not supported; "
                                 "use a discrete grid filter")
        _positive(self.sigma, "sigma")
        if self.kind == SE:
            _positive(self.lengthscale, "lengthscale")
        else:
            _positive(self.width, "width")

    def _init_discrete(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        loc = np.asarray(self.locations, dtype=float)
        _require(w.ndim == 1 and w.size >= 1, "discrete filter needs >= 1 weight")
        _require(np.all(np.isfinite(w)), "discrete weights must be finite")
        if self.dim == 1:
            loc = np.atleast_1d(loc)
            _require(loc.shape == w.shape, "weights/locations length mismatch")
            _require(np.all(np.isfinite(loc)), "discrete locations must be finite")
            _require(loc.size == 1 or np.all(np.diff(loc) > 0),
                     "1D discrete locations must be strictly increasing")
        else:
            _require(loc.ndim == 2 and loc.shape == (w.size, 2),
                     "2D discrete locations must have shape (m, 2)")
            _require(np.all(np.isfinite(loc)), "discrete locations must be finite")
            _require(_is_rectangular_grid(loc),
                     "2D discrete locations must form a rectangular grid")
        w = w.copy()
        loc = loc.copy()
        w.flags.writeable = False
        loc.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "locations", loc)

    @classmethod
    def se(cls, sigma=1.0, lengthscale=None, rate=None):
        return cls(SE, sigma=sigma, lengthscale=_resolve_lengthscale(lengthscale, rate))

    @classmethod
    def sinc(cls, sigma=1.0, width=1.0):
        return cls(SINC, sigma=sigma, width=width)

    @classmethod
    def triangular(cls, sigma=1.0, width=1.0):
        return cls(TRIANGULAR, sigma=sigma, width=width)

    @classmethod
    def dirac(cls, weight=1.0, location=0.0):
        """Single point mass; the convolution identity when weight=1 at 0."""
        return cls(DISCRETE, weights=np.array([weight]), locations=np.array([location]))

    @classmethod
    def discrete(cls, weights, locations):
        return cls(DISCRETE, weights=np.asarray(weights), locations=np.asarray(locations))

    @classmethod
    def discrete_grid(cls, weights_2d, grid_step=1.0):
        """Discrete 2D filter from a (h, w) weight array centred at the origin."""
        w2 = np.asarray(weights_2d, dtype=float)
        _require(w2.ndim == 2, "grid weights must be a 2D array")
        h, wd = w2.shape
        rows = (np.arange(h) - (h - 1) / 2.0) * grid_step
        cols = (np.arange(wd) - (wd - 1) / 2.0) * grid_step
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        loc = np.column_stack([rr.ravel(), cc.ravel()])
        return cls(DISCRETE, weights=w2.ravel(), locations=loc, dim=2,
                   grid_shape=(h, wd), grid_step=float(grid_step))

    @property
    def is_discrete(self):
        return self.kind == DISCRETE

    def to_dict(self):
        if self.kind == DISCRETE:
            out = {"type": DISCRETE, "dim": self.dim,
                   "weights": [float(v) for v in self.weights]}
            if self.dim == 2:
                out["grid_shape"] = list(self.grid_shape) if self.grid_shape else None
                out["grid_step"] = self.grid_step
                if self.grid_shape is None:
                    out["locations"] = [[float(a), float(b)] for a, b in self.locations]
            else:
                out["locations"] = [float(v) for v in self.locations]
            return out
        out = {"type": self.kind, "sigma": self.sigma, "dim": self.dim}
        if self.lengthscale is not None:
            out["lengthscale"] = self.lengthscale
        if self.width is not None:
            out["width"] = self.width
        return out


def _resolve_lengthscale(lengthscale, rate):
    if (lengthscale is None) == (rate is None):
        raise ParameterError("exactly one of lengthscale/rate must be given")
    return float(lengthscale) if lengthscale is not None else rate_to_lengthscale(rate)


def _is_rectangular_grid(loc):
    rows = np.unique(loc[:, 0])
    cols = np.unique(loc[:, 1])
    if rows.size * cols.size != loc.shape[0]:
        return False
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    expected = np.column_stack([rr.ravel(), cc.ravel()])
    return bool(np.array_equal(_lex_sorted(loc), _lex_sorted(expected)))


def _lex_sorted(points):
    order = np.lexsort((points[:, 1], points[:, 0]))
    return points[order]


def kernel_from_dict(doc):
    """Build a KernelSpec from its JSON object representation."""
    doc = dict(doc)
    kind = doc.pop("type", None)
    dim = int(doc.pop("dim", 1))
    sigma = doc.pop("sigma", 1.0)
    if kind == SE:
        spec = KernelSpec.se(sigma=sigma, lengthscale=doc.pop("lengthscale", None),
                             rate=doc.pop("rate", None), dim=dim)
    elif kind == SINC:
        spec = KernelSpec.sinc(sigma=sigma, width=doc.pop("width", None))
    elif kind == SM:
        spec = KernelSpec.sm(sigma=sigma, lengthscale=doc.pop("lengthscale", None),
                             rate=doc.pop("rate", None),
                             frequency=doc.pop("frequency", None))
    else:
        raise ParameterError(f"unknown kernel type {kind!r}")
    _require(not doc, f"unknown kernel fields: {sorted(doc)}")
    return spec


def filter_from_dict(doc):
    """Build a FilterSpec from its JSON object representation."""
    doc = dict(doc)
    kind = doc.pop("type", None)
    dim = int(doc.pop("dim", 1))
    if kind == DISCRETE:
        weights = doc.pop("weights", None)
        if dim == 2:
            shape = doc.pop("grid_shape", None)
            step = doc.pop("grid_step", 1.0)
            _require(shape is not None and len(shape) == 2,
                     "2D discrete filter needs grid_shape")
            w2 = np.asarray(weights, dtype=float).reshape(int(shape[0]), int(shape[1]))
            spec = FilterSpec.discrete_grid(w2, grid_step=float(step))
        else:
            spec = FilterSpec.discrete(weights, doc.pop("locations", None))
    elif kind == SE:
        spec = FilterSpec.se(sigma=doc.pop("sigma", 1.0),
                             lengthscale=doc.pop("lengthscale", None),
                             rate=doc.pop("rate", None))
    elif kind == SINC:
        spec = FilterSpec.sinc(sigma=doc.pop("sigma", 1.0), width=doc.pop("width", None))
    elif kind == TRIANGULAR:
        spec = FilterSpec.triangular(sigma=doc.pop("sigma", 1.0), width=doc.pop("width", None))
    else:
        raise ParameterError(f"unknown filter type {kind!r}")
    _require(not doc, f"unknown filter fields: {sorted(doc)}")
    return spec


def _sinc_core(z):
    """sin(z)/z with a series branch near 0 to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _SINC_SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    out = np.where(small, 1.0 - z * z / 6.0, np.sin(safe) / safe)
    return out


def _lag_norm(lag, dim, what):
    lag = np.asarray(lag, dtype=float)
    if dim == 1:
        return lag
    if lag.ndim == 0 or lag.shape[-1] != 2:
        raise DimensionError(f"2D {what} expects lags with trailing dimension 2")
    return np.sqrt(np.sum(lag * lag, axis=-1))


def eval_kernel(spec: KernelSpec, lag):
    """Evaluate K(lag); scalar in, scalar out, arrays broadcast."""
    scalar = np.isscalar(lag) or (np.asarray(lag).ndim == (1 if spec.dim == 2 else 0))
    t = _lag_norm(lag, spec.dim, "kernel")
    s2 = spec.sigma**2
    if spec.kind == SE:
        out = s2 * np.exp(-(t * t) / (2.0 * spec.lengthscale**2))
    elif spec.kind == SINC:
        out = s2 * _sinc_core(np.pi * spec.width * t)
    else:  # SM
        out = (s2 * np.exp(-(t * t) / (2.0 * spec.lengthscale**2))
               * np.cos(2.0 * np.pi * spec.frequency * t))
    return float(out) if scalar else out


def eval_filter(spec: FilterSpec, lag):
    """Evaluate a continuous filter h(lag).

    The discrete variant is a measure and cannot be evaluated pointwise;
    use the discrete sums in :mod:`gpdeconv.covops` instead.
    """
    if spec.kind == DISCRETE:
        raise UnsupportedOperationError(
            "discrete filters have no pointwise value; use covops discrete sums")
    scalar = np.isscalar(lag) or np.asarray(lag).ndim == 0
    t = np.asarray(lag, dtype=float)
    s2 = spec.sigma**2
    if spec.kind == SE:
        out = s2 * np.exp(-(t * t) / (2.0 * spec.lengthscale**2))
    elif spec.kind == SINC:
        out = s2 * _sinc_core(np.pi * spec.width * t)
    else:  # TRIANGULAR
        out = s2 * np.maximum(1.0 - 2.0 * np.abs(t) / spec.width, 0.0)
    return float(out) if scalar else out


def _se_transform(sigma, lengthscale, xi):
    return (sigma**2 * math.sqrt(2.0 * math.pi * lengthscale**2)
            * np.exp(-2.0 * np.pi**2 * lengthscale**2 * xi * xi))


def kernel_psd(spec: KernelSpec, freq):
    """Power spectral density of a 1D kernel at ``freq`` (cycles/input unit).

    SE maps to a Gaussian bump, Sinc to a rectangle of width ``width``, and
    SM to the half-sum of two Gaussian bumps centred at +-frequency.
    """
    if spec.dim != 1:
        raise DimensionError("kernel_psd is defined for 1D kernels only")
    scalar = np.isscalar(freq) or np.asarray(freq).ndim == 0
    xi = np.asarray(freq, dtype=float)
    if spec.kind == SE:
        out = _se_transform(spec.sigma, spec.lengthscale, xi)
    elif spec.kind == SINC:
        out = (spec.sigma**2 / spec.width) * (np.abs(xi) <= spec.width / 2.0)
    else:  # SM
        out = 0.5 * (_se_transform(spec.sigma, spec.lengthscale, xi - spec.frequency)
                     + _se_transform(spec.sigma, spec.lengthscale, xi + spec.frequency))
    return float(out) if scalar else out


def filter_transfer(spec: FilterSpec, freq):
    """Continuous Fourier transform of the filter at ``freq``.

    Real-valued for the even continuous variants; the discrete variant is
    ``sum_i w_i exp(-j 2 pi freq l_i)`` and complex in general.  For 2D
    discrete filters ``freq`` must carry a trailing dimension of 2.
    """
    if spec.kind == DISCRETE:
        xi = np.asarray(freq, dtype=float)
        if spec.dim == 2:
            if xi.ndim == 0 or xi.shape[-1] != 2:
                raise DimensionError("2D discrete transfer expects frequency pairs")
            phase = np.tensordot(xi, spec.locations.T, axes=1)
            scalar = xi.ndim == 1
        else:
            scalar = xi.ndim == 0
            phase = np.multiply.outer(xi, spec.locations)
        out = np.sum(spec.weights * np.exp(-2j * np.pi * phase), axis=-1)
        return complex(out) if scalar else out
    scalar = np.isscalar(freq) or np.asarray(freq).ndim == 0
    xi = np.asarray(freq, dtype=float)
    if spec.kind == SE:
        out = _se_transform(spec.sigma, spec.lengthscale, xi)
    elif spec.kind == SINC:
        out = (spec.sigma**2 / spec.width) * (np.abs(xi) <= spec.width / 2.0)
    else:  # TRIANGULAR: half-width w/2 triangle -> (w/2) sinc^2(xi w/2)
        half = spec.width / 2.0
        out = spec.sigma**2 * half * _sinc_core(np.pi * xi * half) ** 2
    out = out.astype(complex)
    return complex(out) if scalar else out


def effective_support(spec: FilterSpec):
    """Half-width of a span that captures the filter's mass.

    Exact for the compact-support triangle; eight scales elsewhere.
    """
    if spec.kind == TRIANGULAR:
        return spec.width / 2.0
    if spec.kind == SE:
        return 8.0 * spec.lengthscale
    if spec.kind == SINC:
        return 8.0 / spec.width
    raise UnsupportedOperationError("discrete filters have no continuous support")


def discretize_filter(spec: FilterSpec, m, span=None):
    """Midpoint-rule reduction of a continuous filter to m point masses.

    Locations are the m cell midpoints over ``span`` (default: the filter's
    effective support), weights are ``h(l_i) * span_length / m``.  The sum
    of weights approaches the filter integral at rate O(1/m^2) for smooth h.
    """
    if spec.kind == DISCRETE:
        raise UnsupportedOperationError("filter is already discrete")
    if m < 1:
        raise ParameterError(f"node count must be >= 1, got {m}")
    if span is None:
        half = effective_support(spec)
        span = (-half, half)
    lo, hi = float(span[0]), float(span[1])
    if not hi > lo:
        raise ParameterError(f"span must have positive length, got {span!r}")
    cell = (hi - lo) / m
    locations = lo + (np.arange(m) + 0.5) * cell
    weights = eval_filter(spec, locations) * cell
    return FilterSpec.discrete(weights, locations)
