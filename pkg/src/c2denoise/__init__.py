"""Denoising of two-time intensity correlation maps.

Builds C2 maps from per-pixel intensity series, denoises them with a fully
convolutional autoencoder trained on synthetic ground-truth pairs, scores
the reconstruction with reliability metrics, and extracts dynamical
parameters by nonlinear fitting of g2 curves.
"""

from .c2 import (C2Matrix, G2Curve, PixelSeries, StandardizationParams,
                 bootstrap_pixels, compute_c2, crop_diagonal_tiles,
                 destandardize, extract_g2, load_c2, load_pixel_series,
                 repair_diagonal, reverse_age, save_c2, save_pixel_series,
                 slice_age, standardize, subsample_frames)
from .errors import (BadMagicError, C2DenoiseError, ConfigError, FormatError,
                     NumericError, ShapeError, TruncatedError, VersionError)
from .fcdae import (FcDaeArchitecture, FcDaeModel, TrainConfig, build_model,
                    denoise, forward, load_checkpoint, loss_and_grads,
                    save_checkpoint, train, train_ensemble)
from .fitdyn import (CompositeParams, FitResult, KwwParams, SliceTraces,
                     composite_model, fit_g2, fit_slices, kww_model)
from .metrics import (EnsembleVarianceReport, ReliabilityReport,
                      build_ensemble_report, contrast_shift, ensemble_variance,
                      estimate_beta_obs, evaluate_reliability, find_tau_star,
                      residual_acf_test, snr, ssim)
from .synth import (DatasetConfig, DynamicsSpec, SpeckleSpec, SyntheticSample,
                    build_dataset, g1_matrix, g1_value, generate_truth_c2,
                    load_manifest, simulate_noisy_c2)

__version__ = "0.1.0"
