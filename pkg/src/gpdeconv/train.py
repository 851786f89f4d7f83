"""Maximum-likelihood hyperparameter estimation, including blind filter
weights.

The marginal likelihood of the observations only sees the source kernel
and filter through the convolved covariance plus the noise diagonal, so
source magnitude and filter scale are entangled: whenever filter
magnitude or weights are free, the source magnitude must stay fixed at 1.
Optimization runs in an unconstrained space (log transform for positive
parameters, identity for discrete weights) with seeded multi-restart.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import covops, gp
from .covops import ConvKernelPair
from .deconv import ObservationSet
from .errors import GPDeconvError, ParameterError, TrainingError
from .kernels import DISCRETE, SE, SINC, SM, TRIANGULAR, FilterSpec, KernelSpec

# Frequencies are optimized as log(max(nu, floor)) so nu >= 0 stays feasible.
_FREQUENCY_FLOOR = 1e-8

_OBJECTIVE_ON_FAILURE = 1e300

_KERNEL_PARAMS = {SE: ("sigma", "lengthscale"),
                  SINC: ("sigma", "width"),
                  SM: ("sigma", "lengthscale", "frequency")}
_FILTER_PARAMS = {SE: ("sigma", "lengthscale"),
                  SINC: ("sigma", "width"),
                  TRIANGULAR: ("sigma", "width"),
                  DISCRETE: ("weights",)}


@dataclass(frozen=True)
class FitConfig:
    optimizer: str = "nelder-mead"
    max_iters: int = 2000
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("nelder-mead", "gradient"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be >= 0")


@dataclass(frozen=True, eq=False)
class TrainableModel:
    """Initial specs plus the set of parameters the optimizer may move.

    ``free_source``/``free_filter`` name kernel/filter parameters
    ("sigma", "lengthscale", "width", "frequency", or "weights" for the
    discrete filter); ``free_noise`` frees the noise scale.
    """

    source: KernelSpec
    filter: FilterSpec
    noise_variance: float
    free_source: frozenset = frozenset()
    free_filter: frozenset = frozenset()
    free_noise: bool = True
    method: str = covops.DISCRETE_SUM
    quad_nodes: int = 801
    quad_span: tuple[float, float] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "free_source", frozenset(self.free_source))
        object.__setattr__(self, "free_filter", frozenset(self.free_filter))
        allowed_src = set(_KERNEL_PARAMS[self.source.kind])
        if not self.free_source <= allowed_src:
            raise ParameterError(
                f"free source params {sorted(self.free_source - allowed_src)} "
                f"not in {sorted(allowed_src)}")
        allowed_flt = set(_FILTER_PARAMS[self.filter.kind])
        if not self.free_filter <= allowed_flt:
            raise ParameterError(
                f"free filter params {sorted(self.free_filter - allowed_flt)} "
                f"not in {sorted(allowed_flt)}")
        if self.noise_variance < 0:
            raise ParameterError("noise variance must be >= 0")
        scale_free = self.free_filter & {"sigma", "weights"}
        if scale_free and ("sigma" in self.free_source or self.source.sigma != 1.0):
            raise ParameterError(
                "filter scale and source magnitude are entangled in the "
                "likelihood; fix source sigma = 1 when filter "
                f"{sorted(scale_free)} are free")
        # validate that the pair itself is constructible
        self.pair(self.source, self.filter)

    def pair(self, source, filt):
        return ConvKernelPair(source, filt, self.method,
                              quad_nodes=self.quad_nodes, quad_span=self.quad_span)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Winning restart of a maximum-likelihood fit."""

    source: KernelSpec
    filter: FilterSpec
    noise_variance: float
    log_likelihood: float
    iterations: int
    trace: np.ndarray
    restart_index: int
    evaluations: int


def _pack(model: TrainableModel):
    """Names, initial unconstrained vector, and an unpack closure."""
    names = []
    theta0 = []
    for name in _KERNEL_PARAMS[model.source.kind]:
        if name in model.free_source:
            value = getattr(model.source, name)
            if name == "frequency":
                value = max(value, _FREQUENCY_FLOOR)
            names.append(("source", name))
            theta0.append(np.log(value))
    for name in _FILTER_PARAMS[model.filter.kind]:
        if name not in model.free_filter:
            continue
        if name == "weights":
            names.extend(("weight", i) for i in range(model.filter.weights.size))
            theta0.extend(model.filter.weights)
        else:
            names.append(("filter", name))
            theta0.append(np.log(getattr(model.filter, name)))
    if model.free_noise:
        names.append(("noise", "sigma"))
        theta0.append(np.log(max(np.sqrt(model.noise_variance), 1e-12)))

    def unpack(theta):
        source_kwargs, filter_kwargs = {}, {}
        weights = None
        noise_variance = model.noise_variance
        for (group, name), value in zip(names, theta):
            if group == "source":
                source_kwargs[name] = float(np.exp(value))
            elif group == "filter":
                filter_kwargs[name] = float(np.exp(value))
            elif group == "weight":
                if weights is None:
                    weights = np.array(model.filter.weights)
                weights[name] = value
            else:
                noise_variance = float(np.exp(value)) ** 2
        source = replace(model.source, **source_kwargs) if source_kwargs else model.source
        if weights is not None:
            filt = FilterSpec(DISCRETE, weights=weights, locations=model.filter.locations,
                              dim=model.filter.dim, grid_shape=model.filter.grid_shape,
                              grid_step=model.filter.grid_step)
        elif filter_kwargs:
            filt = replace(model.filter, **filter_kwargs)
        else:
            filt = model.filter
        return source, filt, noise_variance

    return names, np.asarray(theta0, dtype=float), unpack


def log_likelihood_at(obs: ObservationSet, model: TrainableModel,
                      source=None, filt=None, noise_variance=None):
    """Marginal log likelihood of the observations at the given parameters."""
    source = model.source if source is None else source
    filt = model.filter if filt is None else filt
    noise_variance = model.noise_variance if noise_variance is None else noise_variance
    pair = model.pair(source, filt)
    k_y = covops.kf_matrix(pair, obs.locations) + noise_variance * np.eye(len(obs))
    factor = gp.cholesky_jittered(k_y)
    return gp.log_marginal_likelihood(factor, obs.values)


class _Objective:
    """Negative log likelihood with failure guarding and best-seen tracking."""

    def __init__(self, obs, model, unpack):
        self.obs = obs
        self.model = model
        self.unpack = unpack
        self.evaluations = 0
        self.best = -np.inf
        self.cache = {}

    def __call__(self, theta):
        key = theta.tobytes()
        if key in self.cache:
            return self.cache[key]
        self.evaluations += 1
        try:
            source, filt, noise_variance = self.unpack(theta)
            value = log_likelihood_at(self.obs, self.model, source, filt, noise_variance)
        except (GPDeconvError, OverflowError, FloatingPointError,
                np.linalg.LinAlgError):
            self.cache[key] = _OBJECTIVE_ON_FAILURE
            return _OBJECTIVE_ON_FAILURE
        if not np.isfinite(value):
            value = -_OBJECTIVE_ON_FAILURE
        self.best = max(self.best, value)
        self.cache[key] = -value
        return -value


def _fd_gradient(fun, theta, step=1e-5):
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        bump = np.zeros_like(theta)
        bump[i] = step
        grad[i] = (fun(theta + bump) - fun(theta - bump)) / (2.0 * step)
    return grad


def _run_single(obs, model, config, theta0, unpack):
    objective = _Objective(obs, model, unpack)
    trace = [-objective(theta0)]

    def record(xk):
        value = -objective(np.asarray(xk, dtype=float))
        if value > trace[-1]:
            trace.append(value)

    if config.optimizer == "nelder-mead":
        result = scipy.optimize.minimize(
            objective, theta0, method="Nelder-Mead", callback=record,
            options={"maxiter": config.max_iters, "xatol": 1e-8, "fatol": 1e-12,
                     "adaptive": theta0.size > 4})
    else:
        result = scipy.optimize.minimize(
            objective, theta0, method="BFGS", callback=record,
            jac=lambda th: _fd_gradient(objective, th),
            options={"maxiter": config.max_iters, "gtol": 1e-8})
    final = -objective(np.asarray(result.x, dtype=float))
    if final > trace[-1]:
        trace.append(final)
    source, filt, noise_variance = unpack(np.asarray(result.x, dtype=float))
    return {"source": source, "filter": filt, "noise_variance": noise_variance,
            "log_likelihood": final, "iterations": int(result.nit),
            "trace": np.asarray(trace), "evaluations": objective.evaluations}


def fit(obs: ObservationSet, model: TrainableModel, config: FitConfig = FitConfig()):
    """Maximize the marginal likelihood over the model's free parameters.

    Runs ``config.restarts`` seeded starts (the first from the model's own
    initial values, later ones perturbed by N(0, 0.5^2) in unconstrained
    space) and returns the best.  A model with no free parameters would be
    rejected by TrainableModel itself; a fit where every restart failed to
    produce a finite likelihood raises TrainingError.
    """
    if len(obs) == 0:
        raise ParameterError("cannot fit an empty observation set")
    names, theta0, unpack = _pack(model)
    if theta0.size == 0:
        # nothing to optimize: report the likelihood at the fixed parameters
        value = log_likelihood_at(obs, model)
        return FitResult(model.source, model.filter, model.noise_variance,
                         value, 0, np.asarray([value]), 0, 1)
    # restarts jitter the log-transformed parameters only; identity-space
    # discrete weights always start from their configured values
    log_mask = np.array([group != "weight" for group, _ in names])
    results = []
    for index in range(config.restarts):
        start = theta0.copy()
        if index > 0:
            rng = np.random.default_rng((config.seed, index))
            start = theta0 + log_mask * rng.normal(0.0, 0.5, size=theta0.shape)
        outcome = _run_single(obs, model, config, start, unpack)
        outcome["restart_index"] = index
        results.append(outcome)
    best = max(results, key=lambda r: (r["log_likelihood"], -r["restart_index"]))
    if not np.isfinite(best["log_likelihood"]) or best["log_likelihood"] <= -1e299:
        raise TrainingError(
            f"no restart reached a finite likelihood "
            f"(best {best['log_likelihood']:.3e} after {config.restarts} restarts)")
    return FitResult(**best)


def _dominant_frequency(obs: ObservationSet):
    """Peak of the data periodogram; None off uniform grids or at DC."""
    t = np.asarray(obs.locations, dtype=float)
    if t.size < 8:
        return None
    steps = np.diff(np.sort(t))
    step = float(np.median(steps))
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-6 * step:
        return None
    values = obs.values - np.mean(obs.values)
    power = np.abs(np.fft.rfft(values)) ** 2
    freqs = np.fft.rfftfreq(t.size, step)
    peak = int(np.argmax(power[1:])) + 1
    return float(freqs[peak]) if power[peak] > 0 else None


def default_blind_model(obs: ObservationSet, source_kind, m, span,
                        frequency_init=None) -> TrainableModel:
    """Blind model: free kernel shape, noise, and m weights on a fixed grid.

    Source magnitude is pinned at 1 (scale degeneracy with the weights);
    initialization follows desk heuristics: lengthscale three median
    spacings, noise a tenth of the data scale, uniform weights 1/m, and
    the spectral-mixture frequency seeded from the data periodogram.
    """
    t = np.sort(np.asarray(obs.locations, dtype=float))
    spacing = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    scale = float(np.std(obs.values)) if len(obs) else 1.0
    lengthscale = 3.0 * spacing
    if source_kind == SE:
        source = KernelSpec.se(1.0, lengthscale)
        free_source = {"lengthscale"}
    elif source_kind == SM:
        if frequency_init is None:
            frequency_init = _dominant_frequency(obs) or 1.0 / (10.0 * spacing)
        source = KernelSpec.sm(1.0, lengthscale, frequency=frequency_init)
        free_source = {"lengthscale", "frequency"}
    elif source_kind == SINC:
        source = KernelSpec.sinc(1.0, 1.0 / lengthscale)
        free_source = {"width"}
    else:
        raise ParameterError(f"unsupported blind source kind {source_kind!r}")
    lo, hi = float(span[0]), float(span[1])
    if not hi > lo:
        raise ParameterError("blind filter span must have positive length")
    cell = (hi - lo) / m
    locations = lo + (np.arange(m) + 0.5) * cell
    filt = FilterSpec.discrete(np.full(m, 1.0 / m), locations)
    return TrainableModel(source=source, filter=filt,
                          noise_variance=(0.1 * scale) ** 2 if scale > 0 else 1e-4,
                          free_source=frozenset(free_source),
                          free_filter=frozenset({"weights"}),
                          free_noise=True, method=covops.DISCRETE_SUM)


def fit_blind(obs: ObservationSet, source_kind, m, span,
              config: FitConfig = FitConfig(), frequency_init=None):
    """Jointly learn kernel shape, noise, and m discrete filter weights.

    Optimization is staged to cope with the kernel/filter entanglement:
    first the kernel (with magnitude free) is fit against the fixed uniform
    filter, then the magnitude is folded into the weights through the exact
    scale degeneracy and everything but the source magnitude is freed.  The
    returned result is from the joint final stage.
    """
    if m < 1:
        raise ParameterError("filter size m must be >= 1")
    model = default_blind_model(obs, source_kind, m, span, frequency_init)
    warm = TrainableModel(source=model.source, filter=model.filter,
                          noise_variance=model.noise_variance,
                          free_source=model.free_source | {"sigma"},
                          free_filter=frozenset(), free_noise=True,
                          method=model.method)
    stage_a = fit(obs, warm, replace(config, restarts=min(config.restarts, 2)))
    weights = model.filter.weights * stage_a.source.sigma
    filt = FilterSpec.discrete(weights, model.filter.locations)
    source = replace(stage_a.source, sigma=1.0)
    if source.kind == SM:
        source = replace(source, frequency=max(source.frequency, _FREQUENCY_FLOOR))
    staged = TrainableModel(source=source, filter=filt,
                            noise_variance=stage_a.noise_variance,
                            free_source=model.free_source,
                            free_filter=frozenset({"weights"}),
                            free_noise=True, method=model.method)
    return fit(obs, staged, config)
