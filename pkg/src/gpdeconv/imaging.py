"""Image-domain plumbing: built-in 5x5 tap grids, the blur-and-corrupt
forward model, and seeded pixel masking.

The forward model is cross-correlation of the image with the tap grid
(centre tap at offset zero), same-size output with reflected borders,
matching the lag convention of the discrete-filter covariance sums.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage

from .deconv import ObservationSet
from .errors import ParameterError
from .kernels import FilterSpec

FILTER_SIZE = 5

BUILTIN_FILTER_NAMES = ("h0", "h1", "h2", "h3", "h4")


def builtin_filter(name, seed=0):
    """One of the named 5x5 grids, normalized to unit weight sum.

    h0 constant, h1 dominant centre, h2 radial Gaussian decay, h3 seeded
    uniform random values, h4 diagonal.
    """
    idx = np.arange(FILTER_SIZE) - (FILTER_SIZE - 1) / 2.0
    rr, cc = np.meshgrid(idx, idx, indexing="ij")
    if name == "h0":
        grid = np.ones((FILTER_SIZE, FILTER_SIZE))
    elif name == "h1":
        grid = np.full((FILTER_SIZE, FILTER_SIZE), 0.02)
        grid[2, 2] = 1.0
    elif name == "h2":
        grid = np.exp(-(rr**2 + cc**2) / 2.0)
    elif name == "h3":
        rng = np.random.default_rng((seed, 3))
        grid = rng.uniform(0.0, 1.0, size=(FILTER_SIZE, FILTER_SIZE))
    elif name == "h4":
        grid = np.eye(FILTER_SIZE)
    else:
        raise ParameterError(f"unknown built-in filter {name!r}; "
                             f"choose from {BUILTIN_FILTER_NAMES}")
    return FilterSpec.discrete_grid(grid / grid.sum(), grid_step=1.0)


def convolve_image(image, filt: FilterSpec):
    """Same-size forward blur with reflected borders."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ParameterError("expected a 2D image")
    if not (filt.is_discrete and filt.dim == 2 and filt.grid_shape is not None):
        raise ParameterError("image convolution needs a discrete 2D grid filter")
    weights = filt.weights.reshape(filt.grid_shape)
    return scipy.ndimage.correlate(image, weights, mode="reflect")


def pixel_grid(shape):
    """Row-major (row, col) coordinates of every pixel."""
    rows, cols = np.meshgrid(np.arange(shape[0], dtype=float),
                             np.arange(shape[1], dtype=float), indexing="ij")
    return np.column_stack([rows.ravel(), cols.ravel()])


def sample_mask(shape, observed_fraction, seed):
    """Boolean keep-mask with round(fraction * npixels) True entries.

    Pixels are drawn uniformly without replacement from a seeded stream.
    """
    if not 0 < observed_fraction <= 1:
        raise ParameterError("observed fraction must be in (0, 1]")
    npix = int(shape[0] * shape[1])
    count = int(round(observed_fraction * npix))
    count = max(count, 1)
    rng = np.random.default_rng((seed, 17))
    keep = rng.choice(npix, size=count, replace=False)
    mask = np.zeros(npix, dtype=bool)
    mask[keep] = True
    return mask.reshape(shape)


def corrupt_image(truth, filt, noise_sigma, observed_fraction, seed):
    """Forward pipeline: blur, add seeded noise, drop pixels.

    Returns (blurred f, noisy y grid, mask, observations) where the
    observation set holds only the retained pixels.
    """
    truth = np.asarray(truth, dtype=float)
    blurred = convolve_image(truth, filt)
    rng = np.random.default_rng((seed, 29))
    noisy = blurred + noise_sigma * rng.standard_normal(truth.shape)
    mask = sample_mask(truth.shape, observed_fraction, seed)
    coords = pixel_grid(truth.shape)
    flat_mask = mask.ravel()
    obs = ObservationSet(coords[flat_mask], noisy.ravel()[flat_mask],
                         noise_sigma**2, grid_shape=truth.shape,
                         grid_mask=flat_mask)
    return blurred, noisy, mask, obs
