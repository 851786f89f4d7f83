"""Classical FFT deconvolution baselines and evaluation metrics.

Both baselines divide in the Fourier domain and therefore require
uniformly gridded, complete signals; missing data is out of their reach
by construction.  Metrics compare a truth/estimate pair in time and via
their periodograms (squared error, KL divergence, 1-Wasserstein on the
frequency-bin index line).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DimensionError, ParameterError

# Probability floor applied to normalized PSDs before KL / Wasserstein.
_PSD_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class UniformSignal:
    """Samples on a uniform grid: values[i] sits at origin + i * step."""

    values: np.ndarray
    step: float
    origin: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ParameterError("a uniform signal needs >= 2 samples")
        if not self.step > 0:
            raise ParameterError("grid step must be > 0")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def times(self):
        return self.origin + self.step * np.arange(self.values.size)


@dataclass(frozen=True, eq=False)
class Psd:
    """One-sided periodogram powers over a uniform frequency grid."""

    frequencies: np.ndarray
    power: np.ndarray
    normalized: bool = False

    def as_probabilities(self):
        """Floored, unit-sum copy of the powers."""
        p = np.maximum(self.power, _PSD_FLOOR)
        return p / p.sum()


def _filter_spectrum(h: UniformSignal, n: int, step: float):
    """FFT of the filter placed on an n-point circular grid.

    The filter's own time axis decides where its taps land: tap k at time
    origin + k*step maps to index round(time/step) modulo n.  Grids must
    be commensurate.
    """
    if abs(h.step - step) > 1e-12 * max(abs(step), 1.0):
        raise ParameterError(f"filter step {h.step} != signal step {step}")
    if len(h) > n:
        raise ParameterError("filter is longer than the signal")
    padded = np.zeros(n)
    for k in range(len(h)):
        time = h.origin + k * h.step
        index = time / step
        nearest = round(index)
        if abs(index - nearest) > 1e-6:
            raise ParameterError("filter origin is not aligned to the grid")
        padded[int(nearest) % n] += h.values[k]
    return np.fft.fft(padded)


def inverse_ft_deconv(y: UniformSignal, h: UniformSignal, eps=None) -> UniformSignal:
    """Pointwise spectral division F^-1{ F{y} / (F{h} + eps) }.

    ``eps`` guards near-zero bins, added along each bin's phase so the
    divisor magnitude grows by exactly eps; default 1e-12 of the peak
    transfer.  With eps too small the division is numerically unstable:
    non-finite output raises.
    """
    spectrum = np.fft.fft(y.values)
    transfer = _filter_spectrum(h, len(y), y.step)
    if eps is None:
        eps = 1e-12 * float(np.max(np.abs(transfer)))
    magnitude = np.abs(transfer)
    phase = np.where(magnitude > 0, transfer / np.where(magnitude == 0, 1.0, magnitude), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        estimate = np.fft.ifft(spectrum / (transfer + eps * phase)).real
    if not np.all(np.isfinite(estimate)):
        raise ParameterError(
            "inverse-FT deconvolution produced non-finite output "
            "(zero transfer bins with no regularization)")
    return UniformSignal(estimate, y.step, y.origin)


def wiener_deconv(y: UniformSignal, h: UniformSignal, noise_to_signal=0.01) -> UniformSignal:
    """Wiener spectral division F^-1{ conj(F{h}) F{y} / (|F{h}|^2 + ratio) }.

    ``noise_to_signal`` is the flat noise-to-signal power ratio; zero
    degrades to the inverse-FT division.
    """
    if noise_to_signal < 0:
        raise ParameterError("noise_to_signal must be >= 0")
    spectrum = np.fft.fft(y.values)
    transfer = _filter_spectrum(h, len(y), y.step)
    denom = np.abs(transfer) ** 2 + noise_to_signal
    if noise_to_signal == 0.0 and np.any(denom == 0.0):
        raise ParameterError("zero transfer bins with noise_to_signal = 0")
    estimate = np.fft.ifft(np.conj(transfer) * spectrum / denom).real
    return UniformSignal(estimate, y.step, y.origin)


def wiener_deconv_image(f, weights, noise_to_signal=0.01):
    """2D Wiener division for an image observed through a tap grid.

    The forward model is cross-correlation with ``weights`` (centre tap at
    offset zero), matching the discrete-filter covariance convention, so
    the division uses the unconjugated grid spectrum.
    """
    f = np.asarray(f, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if f.ndim != 2 or weights.ndim != 2:
        raise DimensionError("image and filter must both be 2D")
    spectrum = np.fft.fft2(f)
    h, w = weights.shape
    padded = np.zeros_like(f)
    rows = (np.arange(h) - (h - 1) // 2) % f.shape[0]
    cols = (np.arange(w) - (w - 1) // 2) % f.shape[1]
    padded[np.ix_(rows, cols)] = weights
    transfer = np.fft.fft2(padded)
    # cross-correlation forward model: F{f} = F{x} conj(F{h})
    estimate = np.fft.ifft2(spectrum * transfer
                            / (np.abs(transfer) ** 2 + noise_to_signal)).real
    return estimate


def periodogram(signal: UniformSignal, normalized=False) -> Psd:
    """|FFT|^2 / n over the nonnegative frequencies."""
    n = len(signal)
    power = np.abs(np.fft.rfft(signal.values)) ** 2 / n
    freqs = np.fft.rfftfreq(n, signal.step)
    if normalized:
        total = float(np.sum(np.maximum(power, _PSD_FLOOR)))
        return Psd(freqs, np.maximum(power, _PSD_FLOOR) / total, True)
    return Psd(freqs, power, False)


def best_circular_shift(reference, estimate):
    """Shift (in samples) maximizing the circular cross-correlation."""
    ref = np.asarray(reference, dtype=float)
    est = np.asarray(estimate, dtype=float)
    corr = np.fft.ifft(np.fft.fft(ref) * np.conj(np.fft.fft(est))).real
    return int(np.argmax(corr))


def metrics(truth: UniformSignal, estimate: UniformSignal, align=False):
    """Time/frequency discrepancy metrics between truth and an estimate.

    Returns {mse_time, mse_psd, kl_psd, wasserstein_psd}.  KL is oriented
    truth-first; the Wasserstein distance is the L1 distance between PSD
    CDFs over the frequency-bin index line.  ``align=True`` removes the
    best circular shift from the estimate first (phase-free baselines).
    """
    if len(truth) != len(estimate):
        raise DataFormatError(
            f"signal lengths differ: {len(truth)} vs {len(estimate)}")
    values = estimate.values
    if align:
        values = np.roll(values, best_circular_shift(truth.values, values))
    mse_time = float(np.mean((truth.values - values) ** 2))
    psd_truth = periodogram(truth)
    psd_est = periodogram(UniformSignal(values, estimate.step, estimate.origin))
    mse_psd = float(np.mean((psd_truth.power - psd_est.power) ** 2))
    p = psd_truth.as_probabilities()
    q = psd_est.as_probabilities()
    kl = float(np.sum(p * np.log(p / q)))
    wasserstein = float(np.sum(np.abs(np.cumsum(p) - np.cumsum(q))))
    return {"mse_time": mse_time, "mse_psd": mse_psd,
            "kl_psd": kl, "wasserstein_psd": wasserstein}
