"""Shared numerical oracles for the test suite.

These stay deliberately independent of the package's own evaluation paths:
plain tensor-product midpoint sums for the convolution integrals and a
dense-sampling FFT for Fourier transforms.
"""

import numpy as np


def midpoint_nodes(span, n):
    lo, hi = span
    cell = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * cell, cell


def kf_quadrature(h, kx, lag, span, n):
    """Midpoint tensor rule for K_f(t) = int int h(a) h(b) Kx(a - b + t) da db."""
    u, cell = midpoint_nodes(span, n)
    hv = h(u)
    diffs = u[:, None] - u[None, :]
    return cell * cell * float(np.sum(hv[:, None] * hv[None, :] * kx(diffs + lag)))


def kxf_quadrature(h, kx, lag, span, n):
    """Midpoint rule for K_xf(t) = int h(s - t) Kx(s) ds."""
    u, cell = midpoint_nodes(span, n)
    return cell * float(np.sum(h(u - lag) * kx(u)))


def numeric_ft(fun, half_span, step, taper=False):
    """Transform samples of ``fun`` with an FFT; convention e^{-j 2 pi xi t}.

    Returns (frequencies, complex transform).  ``taper=True`` applies a
    Hann taper across the whole sampled span, which suppresses truncation
    ripple for slowly decaying integrands at the cost of smoothing sharp
    spectral edges over a few bins.
    """
    n = int(round(2 * half_span / step))
    t = (np.arange(n) - n // 2) * step
    values = fun(t)
    if taper:
        values = values * 0.5 * (1.0 + np.cos(np.pi * t / half_span))
    transform = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(values))) * step
    freqs = np.fft.fftshift(np.fft.fftfreq(n, step))
    return freqs, transform


def fft_compose(h_fun, kx_fun, half_span, step, filter_power):
    """Inverse FFT of hhat^power * kxhat from densely sampled h and Kx.

    Oracle for the convolved covariance (power 2) and the cross-covariance
    (power 1) when time-domain quadrature is unreliable.
    """
    n = int(round(2 * half_span / step))
    t = (np.arange(n) - n // 2) * step
    h_hat = np.fft.fft(np.fft.ifftshift(h_fun(t))) * step
    kx_hat = np.fft.fft(np.fft.ifftshift(kx_fun(t))) * step
    composed = (h_hat ** filter_power) * kx_hat
    values = np.fft.fftshift(np.fft.ifft(composed)) / step
    return t, values.real
