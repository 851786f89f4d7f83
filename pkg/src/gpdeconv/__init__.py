"""Gaussian-process deconvolution: recover a continuous-domain latent
source from finite, noisy, possibly missing observations of its
convolution with a filter, with closed-form posteriors, maximum-likelihood
(including blind) training, spectral recoverability diagnostics, and
classical FFT baselines.
"""

from .baselines import (Psd, UniformSignal, best_circular_shift,
                        inverse_ft_deconv, metrics, periodogram,
                        wiener_deconv, wiener_deconv_image)
from .covops import (ANALYTIC, DISCRETE_SUM, QUADRATURE, ConvKernelPair,
                     CovarianceBundle, IntegrabilityProbe, build_bundle,
                     integrability_probe, kf_eval, kxf_eval)
from .deconv import (ObservationSet, PosteriorField, SpectralReport, Window,
                     deconvolve, default_freq_grid, hann_window,
                     predict_convolution, recovery_diagnostic,
                     windowed_spectrum_posterior)
from .errors import (ConfigError, DataFormatError, DimensionError,
                     GPDeconvError, NotPositiveDefiniteError, ParameterError,
                     TrainingError, UnsupportedOperationError)
from .gp import (GaussianPosterior, SpdFactor, cholesky_jittered, condition,
                 log_marginal_likelihood, mvn_sample, psd_sqrt)
from .kernels import (FilterSpec, KernelSpec, discretize_filter, eval_filter,
                      eval_kernel, filter_from_dict, filter_transfer,
                      kernel_from_dict, kernel_psd)
from .model import GenerativeConfig, JointSample, conditional_f_moments, sample_joint
from .train import (FitConfig, FitResult, TrainableModel, default_blind_model,
                    fit, fit_blind, log_likelihood_at)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
