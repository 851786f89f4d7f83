"""Figure rendering for the CLI report paths.

Every function takes data plus a target path and writes a PNG next to the
delimited outputs.  Rendering is headless (Agg) and deterministic.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_joint_sample(t_x, x, t_f, f, y, f_std, path):
    """Source draw plus the convolution with its conditional band."""
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(t_x, x, ".", color="tab:red", ms=5, label="source x")
    ax.plot(t_f, f, color="tab:blue", lw=1.2, label="convolution f")
    band = 1.96 * f_std
    ax.fill_between(t_f, f - band, f + band, color="tab:blue", alpha=0.2,
                    label="95% band of f given x")
    if not np.array_equal(y, f):
        ax.plot(t_f, y, ".", color="0.4", ms=2, label="observations y")
    ax.set_xlabel("t")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def plot_posterior(queries, mean, std, obs_t, obs_y, path, truth=None):
    """Posterior mean with 95% band over the observations."""
    fig, ax = plt.subplots(figsize=(9, 4))
    if truth is not None:
        ax.plot(queries, truth, color="k", lw=1.0, label="truth")
    ax.plot(obs_t, obs_y, ".", color="0.5", ms=3, label="observations")
    ax.plot(queries, mean, color="tab:blue", lw=1.3, label="posterior mean")
    band = 1.96 * std
    ax.fill_between(queries, mean - band, mean + band, color="tab:blue",
                    alpha=0.25, label="95% band")
    ax.set_xlabel("t")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def plot_spectral_report(report, path):
    """Source PSD against filter transfer with the suppressed band shaded."""
    fig, ax = plt.subplots(figsize=(8, 4))
    psd = report.psd / max(report.psd.max(), 1e-300)
    transfer = report.transfer_magnitude / max(report.transfer_magnitude.max(), 1e-300)
    ax.plot(report.frequencies, psd, label="source PSD (rel.)", color="tab:blue")
    ax.plot(report.frequencies, transfer, label="|filter transfer| (rel.)",
            color="tab:orange")
    if report.suppressed.any():
        ax.fill_between(report.frequencies, 0, 1, where=report.suppressed,
                        color="tab:red", alpha=0.2, label="suppressed band")
    ax.set_xlabel("frequency")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_trace(trace, path):
    """Accepted-step log likelihood trace."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(len(trace)), trace, marker=".", color="tab:green")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("log likelihood")
    _save(fig, path)


def plot_signal_overlay(times, named_signals, path):
    """Several signals on a shared time axis."""
    fig, ax = plt.subplots(figsize=(9, 4))
    for label, values in named_signals:
        ax.plot(times, values, lw=1.0, label=label)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_psd_overlay(frequencies, named_psds, path):
    """Periodograms on a log power axis."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for label, power in named_psds:
        ax.semilogy(frequencies, np.maximum(power, 1e-12), lw=1.0, label=label)
    ax.set_xlabel("frequency")
    ax.set_ylabel("power")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_image_panels(panels, path):
    """Grayscale panels side by side: [(title, image or None), ...]."""
    panels = [(t, img) for t, img in panels if img is not None]
    fig, axes = plt.subplots(1, len(panels), figsize=(2.4 * len(panels), 2.8))
    if len(panels) == 1:
        axes = [axes]
    finite = np.concatenate([img[np.isfinite(img)].ravel() for _, img in panels])
    vmin, vmax = float(finite.min()), float(finite.max())
    for ax, (title, img) in zip(axes, panels):
        ax.imshow(img, cmap="gray", vmin=vmin, vmax=vmax, interpolation="nearest")
        ax.set_title(title, fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    _save(fig, path)


def plot_fraction_sweep(fractions, named_mses, path):
    """Reconstruction error against the observed-pixel fraction."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, mses in named_mses:
        ax.plot(fractions, mses, marker="o", label=label)
    ax.set_xlabel("observed fraction")
    ax.set_ylabel("MSE vs truth")
    ax.legend(fontsize=8)
    _save(fig, path)
