"""Synthetic ground truth and statistically faithful noisy realizations.

Truth maps follow the Siegert form ``C2 = 1 + beta0 * g1(t1, t2)**2`` for a
parametric decorrelation function g1.  Noisy realizations come from a
multi-mode circular Gaussian speckle model (contrast beta0 = 1/M for M
independent modes) with optional Poisson photon sampling, correlated in
time through the Cholesky factor of the g1 matrix.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import c2 as c2mod
from .c2 import C2Matrix, PixelSeries
from .errors import ConfigError, NumericError
from typing import Optional

__all__ = [
    "DynamicsSpec",
    "SpeckleSpec",
    "SyntheticSample",
    "g1_value",
    "g1_matrix",
    "generate_truth_c2",
    "simulate_noisy_c2",
    "build_dataset",
    "DatasetRecord",
    "load_manifest",
]

_KINDS = ("stationary_kww", "aging_kww", "oscillatory", "two_step")


@dataclass(frozen=True)
class DynamicsSpec:
    """Parametric decorrelation model g1(t1, t2).

    kind selects the functional form:

    * ``stationary_kww``  -- exp(-(tau/tau_c)**gamma)
    * ``aging_kww``       -- KWW with tau_c(t_age) = tau_c * (1+t_age)**aging_exponent
    * ``oscillatory``     -- (1-amp)*KWW + amp*exp(-damping*tau)*cos(omega*tau)
    * ``two_step``        -- weight*KWW(tau_c, gamma) + (1-weight)*KWW(tau_c2, gamma2)

    Times are in frames.  The convex oscillatory mixing keeps |g1| <= 1.
    """

    kind: str
    tau_c: float
    gamma: float = 1.0
    aging_exponent: float = 0.0
    amp: float = 0.0
    omega: float = 0.0
    damping: float = 0.0
    tau_c2: float = 1.0
    gamma2: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown dynamics kind {self.kind!r}")
        if self.tau_c <= 0:
            raise ConfigError("tau_c must be positive")
        if not 0.0 < self.gamma <= 2.0:
            raise ConfigError("gamma must lie in (0, 2]")
        if self.kind == "oscillatory":
            if not 0.0 <= self.amp <= 1.0:
                raise ConfigError("oscillatory amp must lie in [0, 1]")
            if self.damping < 0 or self.omega < 0:
                raise ConfigError("omega and damping must be >= 0")
        if self.kind == "two_step":
            if self.tau_c2 <= 0:
                raise ConfigError("tau_c2 must be positive")
            if not 0.0 < self.gamma2 <= 2.0:
                raise ConfigError("gamma2 must lie in (0, 2]")
            if not 0.0 <= self.weight <= 1.0:
                raise ConfigError("two_step weight must lie in [0, 1]")

    def summary(self) -> str:
        parts = [f"kind={self.kind}", f"tau_c={self.tau_c:g}", f"gamma={self.gamma:g}"]
        if self.kind == "aging_kww":
            parts.append(f"aging_exponent={self.aging_exponent:g}")
        if self.kind == "oscillatory":
            parts += [f"amp={self.amp:g}", f"omega={self.omega:g}",
                      f"damping={self.damping:g}"]
        if self.kind == "two_step":
            parts += [f"tau_c2={self.tau_c2:g}", f"gamma2={self.gamma2:g}",
                      f"weight={self.weight:g}"]
        return ",".join(parts)


@dataclass(frozen=True)
class SpeckleSpec:
    """Speckle statistics: pixel count, mode count and photon budget.

    The contrast is ``beta0 = 1/n_modes``.  ``mean_counts_per_pixel`` of
    None disables the Poisson photon stage.
    """

    n_pixels: int
    n_modes: int = 1
    mean_counts_per_pixel: Optional[float] = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_pixels < 2:
            raise ConfigError("n_pixels must be >= 2")
        if self.n_modes < 1:
            raise ConfigError("n_modes must be >= 1")
        if self.mean_counts_per_pixel is not None and self.mean_counts_per_pixel <= 0:
            raise ConfigError("mean_counts_per_pixel must be positive or None")

    @property
    def beta0(self) -> float:
        return 1.0 / self.n_modes


@dataclass
class SyntheticSample:
    """A matched (noisy, truth) pair with the specs that produced it."""

    c2_truth: C2Matrix
    c2_raw: C2Matrix
    dynamics: DynamicsSpec
    speckle: SpeckleSpec


def _kww(tau, tau_c, gamma):
    return np.exp(-((tau / tau_c) ** gamma))


def g1_value(spec: DynamicsSpec, t1, t2):
    """Evaluate g1 at frame times (t1, t2); symmetric, g1(t, t) = 1."""
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    tau = np.abs(t2 - t1)
    if spec.kind == "stationary_kww":
        out = _kww(tau, spec.tau_c, spec.gamma)
    elif spec.kind == "aging_kww":
        t_age = (t1 + t2) / 2.0
        tau_c = spec.tau_c * (1.0 + t_age) ** spec.aging_exponent
        out = _kww(tau, tau_c, spec.gamma)
    elif spec.kind == "oscillatory":
        out = (1.0 - spec.amp) * _kww(tau, spec.tau_c, spec.gamma) \
            + spec.amp * np.exp(-spec.damping * tau) * np.cos(spec.omega * tau)
    else:  # two_step
        out = spec.weight * _kww(tau, spec.tau_c, spec.gamma) \
            + (1.0 - spec.weight) * _kww(tau, spec.tau_c2, spec.gamma2)
    if out.ndim == 0:
        return float(out)
    return out


def g1_matrix(spec: DynamicsSpec, n_frames: int) -> np.ndarray:
    """The T x T matrix ``G[t1, t2] = g1(t1, t2)``."""
    t = np.arange(n_frames, dtype=np.float64)
    return g1_value(spec, t[:, None], t[None, :])


def generate_truth_c2(spec: DynamicsSpec, n_frames: int,
                      frame_interval_s: float = 1.0,
                      beta0: float = 1.0,
                      q_label: str = "") -> C2Matrix:
    """Noise-free map ``1 + beta0 * g1**2`` (baseline 1, diagonal 1 + beta0)."""
    if n_frames < 2:
        raise NumericError("need at least 2 frames")
    g = g1_matrix(spec, n_frames)
    values = 1.0 + beta0 * g * g
    return C2Matrix((values + values.T) / 2.0, frame_interval_s, q_label)


def _psd_factor(g: np.ndarray, delta: float = 1e-10) -> np.ndarray:
    """Cholesky factor of g + delta*I; falls back to a clipped eigenfactor."""
    t = g.shape[0]
    reg = g + delta * np.eye(t)
    try:
        return np.linalg.cholesky(reg)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(reg)
        if vals[-1] <= 0:
            raise NumericError("g1 matrix is not positive semi-definite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def simulate_noisy_c2(spec: DynamicsSpec, speckle: SpeckleSpec, n_frames: int,
                      seed: Optional[int] = None, frame_interval_s: float = 1.0,
                      q_label: str = ""):
    """Draw one noisy realization of the dynamics; returns (PixelSeries, C2Matrix).

    Per pixel and per mode a length-T complex Gaussian vector with
    covariance g1 is drawn through its Cholesky factor; intensities are the
    mode-averaged squared magnitudes, optionally Poisson-sampled into
    photon counts.  Fully deterministic for a fixed seed.
    """
    if seed is None:
        seed = speckle.seed
    factor = _psd_factor(g1_matrix(spec, n_frames))
    rng = np.random.default_rng(seed)
    p, m = speckle.n_pixels, speckle.n_modes
    intensity = np.zeros((p, n_frames))
    for _ in range(m):
        z = rng.standard_normal((p, n_frames)) + 1j * rng.standard_normal((p, n_frames))
        field_ = (z / np.sqrt(2.0)) @ factor.T
        intensity += field_.real ** 2 + field_.imag ** 2
    intensity /= m
    if speckle.mean_counts_per_pixel is not None:
        intensity = rng.poisson(speckle.mean_counts_per_pixel * intensity).astype(np.float64)
    series = PixelSeries(intensity, frame_interval_s, q_label)
    return series, c2mod.compute_c2(series)


# ---------------------------------------------------------------------------
# dataset building


@dataclass
class DatasetRecord:
    """One manifest line: a (raw, truth) file pair and its provenance."""

    sample_id: str
    split: str
    raw_path: str
    truth_path: str
    n_frames: int
    spec_summary: str
    seed: int


@dataclass
class DatasetConfig:
    """Generation plan for :func:`build_dataset`.

    ``speckle_overrides``, when given, pairs each dynamics spec with a dict
    overriding any of n_pixels / n_modes / mean_counts_per_pixel, so one
    dataset can span contrast and photon-budget regimes.
    """

    dynamics: list
    n_frames: int = 128
    frame_interval_s: float = 1.0
    n_pixels: int = 4000
    n_modes: int = 2
    mean_counts_per_pixel: Optional[float] = 5.0
    n_per_dynamics: int = 2
    splits: tuple = (0.8, 0.1, 0.1)
    reverse: bool = True
    subsample: tuple = (2,)
    crop_size: Optional[int] = 64
    crop_stride: int = 48
    repair_raw_diagonal: bool = True
    save_pixel_series: bool = False
    seed: int = 0
    speckle_overrides: tuple = ()

    def speckle_for(self, d_idx: int, seed: int) -> SpeckleSpec:
        over = {}
        if self.speckle_overrides:
            if len(self.speckle_overrides) != len(self.dynamics):
                raise ConfigError(
                    "speckle_overrides must pair one entry per dynamics spec")
            over = self.speckle_overrides[d_idx] or {}
        return SpeckleSpec(
            int(over.get("n_pixels", self.n_pixels)),
            int(over.get("n_modes", self.n_modes)),
            over.get("mean_counts_per_pixel", self.mean_counts_per_pixel),
            seed,
        )


def _split_counts(n: int, splits) -> dict:
    train_f, val_f, test_f = splits
    if abs(train_f + val_f + test_f - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    n_val = int(val_f * n)
    n_test = int(test_f * n)
    return {"train": n - n_val - n_test, "val": n_val, "test": n_test}


def build_dataset(config: DatasetConfig, out_dir: str):
    """Generate (raw, truth) C2F1 pairs with augmentation and a manifest.

    Augmentation (age reversal, frame subsampling, diagonal cropping) is
    applied identically to the raw and truth maps.  The raw map's trivial
    self-correlation diagonal is repaired before augmentation.  Returns the
    list of :class:`DatasetRecord` written to ``<out_dir>/manifest.tsv``.
    """
    os.makedirs(out_dir, exist_ok=True)
    pairs = []  # (raw C2Matrix, truth C2Matrix, dynamics, seed)
    for d_idx, dyn in enumerate(config.dynamics):
        for rep in range(config.n_per_dynamics):
            seed = config.seed + 1000 * d_idx + rep
            speckle = SpeckleSpec(config.n_pixels, config.n_modes,
                                  config.mean_counts_per_pixel, seed)
            series, raw = simulate_noisy_c2(dyn, speckle, config.n_frames,
                                            seed, config.frame_interval_s)
            truth = generate_truth_c2(dyn, config.n_frames,
                                      config.frame_interval_s, speckle.beta0)
            if config.repair_raw_diagonal:
                raw = c2mod.repair_diagonal(raw)
            if config.save_pixel_series:
                c2mod.save_pixel_series(
                    os.path.join(out_dir, f"series_{d_idx:02d}_{rep:02d}.pxs"), series)
            pairs.append((raw, truth, dyn, seed))

    # age reversal, then frame subsampling: base x (1+reverse) x (1+len(subsample))
    variants = []
    for raw, truth, dyn, seed in pairs:
        bases = [(raw, truth)]
        if config.reverse:
            bases.append((c2mod.reverse_age(raw), c2mod.reverse_age(truth)))
        for r, tr in bases:
            variants.append((r, tr, dyn, seed))
            for k in config.subsample:
                variants.append((c2mod.subsample_frames(r, k),
                                 c2mod.subsample_frames(tr, k), dyn, seed))

    samples = []
    for r, tr, dyn, seed in variants:
        if config.crop_size is not None and config.crop_size <= r.n_frames:
            raw_tiles = c2mod.crop_diagonal_tiles(r, config.crop_size, config.crop_stride)
            truth_tiles = c2mod.crop_diagonal_tiles(tr, config.crop_size, config.crop_stride)
            samples.extend((a, b, dyn, seed) for a, b in zip(raw_tiles, truth_tiles))
        else:
            samples.append((r, tr, dyn, seed))

    counts = _split_counts(len(samples), config.splits)
    order = np.random.default_rng(config.seed).permutation(len(samples))
    split_of = {}
    cursor = 0
    for name in ("train", "val", "test"):
        for i in order[cursor:cursor + counts[name]]:
            split_of[int(i)] = name
        cursor += counts[name]

    records = []
    for i, (raw, truth, dyn, seed) in enumerate(samples):
        sample_id = f"s{i:05d}"
        raw_path = f"{sample_id}_raw.c2f"
        truth_path = f"{sample_id}_truth.c2f"
        c2mod.save_c2(os.path.join(out_dir, raw_path), raw, provenance="synthetic raw")
        c2mod.save_c2(os.path.join(out_dir, truth_path), truth, provenance="synthetic truth")
        records.append(DatasetRecord(sample_id, split_of[i], raw_path, truth_path,
                                     raw.n_frames, dyn.summary(), seed))

    lines = ["\t".join([r.sample_id, r.split, r.raw_path, r.truth_path,
                        str(r.n_frames), r.spec_summary, str(r.seed)])
             for r in records]
    c2mod.atomic_write_bytes(os.path.join(out_dir, "manifest.tsv"),
                             ("\n".join(lines) + "\n").encode())
    return records


def load_manifest(path: str):
    """Parse a manifest written by :func:`build_dataset`."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise ConfigError(f"malformed manifest line: {line!r}")
            records.append(DatasetRecord(fields[0], fields[1], fields[2], fields[3],
                                         int(fields[4]), fields[5], int(fields[6])))
    return records
