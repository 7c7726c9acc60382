"""Reliability metrics for raw/denoised correlation map pairs.

Each metric answers one question about a denoised map: did the observed
contrast survive (percentile spread), is the removed part pure noise
(residual autocorrelation test), is the large-scale structure preserved
(SSIM), and how much did the signal-to-noise along a fixed-lag diagonal
improve (SNR).  An ensemble-variance protocol quantifies the spread of
predictions across independently initialized models.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import fitdyn
from .c2 import C2Matrix, extract_g2
from .errors import NumericError, ShapeError
from typing import Optional

__all__ = [
    "ReliabilityReport",
    "EnsembleVarianceReport",
    "estimate_beta_obs",
    "contrast_shift",
    "residual_acf_test",
    "ssim",
    "snr",
    "find_tau_star",
    "ensemble_variance",
    "evaluate_reliability",
    "tau_star_from_maps",
    "build_ensemble_report",
]

DEFAULT_SSIM_THRESHOLD = 0.15
DEFAULT_Z = 1.96
DEFAULT_MAX_LAG = 20


@dataclass
class ReliabilityReport:
    """Per-sample bundle of all reliability metrics."""

    beta_obs_raw: float
    beta_obs_denoised: float
    delta_beta_rel: float
    acf_pass: bool
    acf_max_abs_beyond_lag0: float
    acf_bound: float
    ssim: float
    snr_raw: float
    snr_denoised: float
    tau_star: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class EnsembleVarianceReport:
    """Ensemble spread across models, per validation sample."""

    per_sample_variance: list
    mean_variance: float
    beta_obs: list
    ratio_per_sample: list
    median_ratio: float
    p10_ratio: float
    p90_ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def estimate_beta_obs(c2: C2Matrix) -> float:
    """Observed contrast: 99th minus 1st percentile of the off-diagonal entries.

    Percentiles use the linear-interpolation convention; the trivial
    self-correlation diagonal is excluded.
    """
    t = c2.n_frames
    if t < 2:
        raise ShapeError("estimate_beta_obs needs at least 2 frames")
    off = c2.values[~np.eye(t, dtype=bool)]
    return float(np.percentile(off, 99) - np.percentile(off, 1))


def contrast_shift(beta_raw: float, beta_denoised: float) -> float:
    """Relative contrast shift ``(beta_denoised - beta_raw) / beta_raw``."""
    if beta_raw <= 0:
        raise NumericError("degenerate raw contrast: beta_obs_raw must be positive")
    return (beta_denoised - beta_raw) / beta_raw


def residual_acf_test(raw: C2Matrix, denoised: C2Matrix,
                      max_lag: int = DEFAULT_MAX_LAG, z: float = DEFAULT_Z):
    """Row-averaged autocorrelation test of the residual (denoised - raw).

    Each row is mean-subtracted and its autocorrelation normalized by the
    lag-0 energy; rows with zero variance are skipped.  The mean ACF over
    rows must stay within +-z/sqrt(T) at every non-zero lag for the
    residual to pass as uncorrelated noise.  Returns
    (pass, mean_acf[0..max_lag], bound); with every row skipped the test
    passes vacuously with an empty ACF.
    """
    if raw.values.shape != denoised.values.shape:
        raise ShapeError("residual_acf_test: map shapes differ")
    t = raw.n_frames
    if not 0 < max_lag < t:
        raise ShapeError(f"max_lag must lie in [1, {t})")
    resid = denoised.values - raw.values
    x = resid - resid.mean(axis=1, keepdims=True)
    energy = np.sum(x * x, axis=1)
    keep = energy > 0
    bound = z / math.sqrt(t)
    if not np.any(keep):
        return True, np.empty(0), bound
    x = x[keep]
    energy = energy[keep]
    acf = np.empty((x.shape[0], max_lag + 1))
    acf[:, 0] = 1.0
    for lag in range(1, max_lag + 1):
        acf[:, lag] = np.sum(x[:, :-lag] * x[:, lag:], axis=1) / energy
    mean_acf = acf.mean(axis=0)
    passed = bool(np.all(np.abs(mean_acf[1:]) <= bound))
    return passed, mean_acf, bound


def _gaussian_window(size: int = 7, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: C2Matrix, b: C2Matrix, window_size: int = 7, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local structural similarity between two maps.

    Local statistics use a Gaussian window over valid positions only; the
    stabilizers are ``C1 = (k1*L)**2`` and ``C2 = (k2*L)**2`` with L the
    combined data range of the two maps (1 if both are constant).
    """
    if a.values.shape != b.values.shape:
        raise ShapeError("ssim: map shapes differ")
    if a.n_frames < window_size:
        raise ShapeError(f"ssim needs maps of at least {window_size} frames")
    x = a.values
    y = b.values
    data_range = max(x.max(), y.max()) - min(x.min(), y.min())
    if data_range <= 0:
        data_range = 1.0
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    w = _gaussian_window(window_size, sigma)

    def smooth(img):
        return fftconvolve(img, w, mode="valid")

    mu_x = smooth(x)
    mu_y = smooth(y)
    # weighted population moments per window
    var_x = smooth(x * x) - mu_x ** 2
    var_y = smooth(y * y) - mu_y ** 2
    cov_xy = smooth(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def snr(c2: C2Matrix, tau_star: int) -> float:
    """``log10(mean/var)`` of the map values along the diagonal at lag tau_star."""
    t = c2.n_frames
    if not 1 <= tau_star < t:
        raise ShapeError(f"tau_star must lie in [1, {t})")
    diag = np.diagonal(c2.values, offset=tau_star)
    var = float(diag.var())
    mean = float(diag.mean())
    if var == 0.0:
        raise NumericError("degenerate diagonal: zero variance at tau_star")
    if mean <= 0.0:
        raise NumericError("diagonal mean must be positive for SNR")
    return math.log10(mean / var)


def find_tau_star(params: fitdyn.KwwParams, t_max: Optional[int] = None) -> int:
    """Smallest integer lag where the fitted decay reaches 1/e of its start.

    Solves ``exp(-2 (tau/tau_c)**gamma) <= 1/e``, i.e.
    ``tau >= tau_c * 0.5**(1/gamma)``; clamped to [1, t_max-1] when a map
    size is given.
    """
    tau = math.ceil(params.tau_c * 0.5 ** (1.0 / params.gamma))
    tau = max(tau, 1)
    if t_max is not None:
        tau = min(tau, t_max - 1)
    return int(tau)


def ensemble_variance(denoised_list) -> float:
    """Mean over pixels of the per-pixel population variance across models."""
    if len(denoised_list) < 2:
        raise ShapeError("ensemble_variance needs at least 2 maps")
    shapes = {m.values.shape for m in denoised_list}
    if len(shapes) != 1:
        raise ShapeError("ensemble_variance: maps must share one shape")
    stack = np.stack([m.values for m in denoised_list])
    return float(stack.var(axis=0).mean())


def evaluate_reliability(raw: C2Matrix, denoised: C2Matrix,
                         max_lag: int = DEFAULT_MAX_LAG, z: float = DEFAULT_Z,
                         tau_star: Optional[int] = None) -> ReliabilityReport:
    """Compute the full reliability bundle for one raw/denoised pair.

    When ``tau_star`` is not given it comes from a KWW fit of the denoised
    g2 (falling back to the raw g2, then to a quarter of the map).
    """
    if raw.values.shape != denoised.values.shape:
        raise ShapeError("evaluate_reliability: map shapes differ")
    t = raw.n_frames
    beta_raw = estimate_beta_obs(raw)
    beta_den = estimate_beta_obs(denoised)
    delta = contrast_shift(beta_raw, beta_den)
    max_lag = min(max_lag, t - 1)
    passed, mean_acf, bound = residual_acf_test(raw, denoised, max_lag, z)
    max_abs = float(np.max(np.abs(mean_acf[1:]))) if mean_acf.size > 1 else 0.0
    if tau_star is None:
        tau_star = tau_star_from_maps(denoised, raw)
    return ReliabilityReport(
        beta_obs_raw=beta_raw,
        beta_obs_denoised=beta_den,
        delta_beta_rel=delta,
        acf_pass=passed,
        acf_max_abs_beyond_lag0=max_abs,
        acf_bound=bound,
        ssim=ssim(raw, denoised),
        snr_raw=snr(raw, tau_star),
        snr_denoised=snr(denoised, tau_star),
        tau_star=int(tau_star),
    )


def tau_star_from_maps(preferred: C2Matrix, fallback: C2Matrix) -> int:
    """SNR lag from a KWW fit of the preferred map's g2, with fallbacks."""
    t = preferred.n_frames
    for source in (preferred, fallback):
        try:
            fit = fitdyn.fit_g2(extract_g2(source), "kww")
            if fit.converged:
                return find_tau_star(fit.params, t)
        except (NumericError, ValueError):
            continue
    return max(1, t // 4)


def build_ensemble_report(denoised_per_sample, raw_maps) -> EnsembleVarianceReport:
    """Summarize ensemble spread over validation samples.

    ``denoised_per_sample[i]`` is the list of k model outputs for sample i;
    ``raw_maps[i]`` is that sample's raw map (source of beta_obs).
    """
    if len(denoised_per_sample) != len(raw_maps):
        raise ShapeError("ensemble report: sample count mismatch")
    variances = [ensemble_variance(maps) for maps in denoised_per_sample]
    betas = [estimate_beta_obs(raw) for raw in raw_maps]
    ratios = [v / b if b > 0 else float("inf") for v, b in zip(variances, betas)]
    return EnsembleVarianceReport(
        per_sample_variance=variances,
        mean_variance=float(np.mean(variances)),
        beta_obs=betas,
        ratio_per_sample=ratios,
        median_ratio=float(np.median(ratios)),
        p10_ratio=float(np.percentile(ratios, 10)),
        p90_ratio=float(np.percentile(ratios, 90)),
    )
