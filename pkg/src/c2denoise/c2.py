"""Two-time correlation maps: construction, preprocessing and file I/O.

The central object is :class:`C2Matrix`, the T x T map of normalized
intensity products between all frame pairs.  Every constructor and
transformer in this module returns an exactly symmetric matrix.

File formats owned here:

* ``C2F1``  -- magic ``C2F1``, u32 T, then T*T little-endian float64 values
  row-major.  An optional text sidecar ``<name>.meta`` carries
  ``key: value`` lines (frame_interval_s, q_label, provenance).
* ``PXS1``  -- magic ``PXS1``, u32 P, u32 T, then P*T little-endian float64
  values row-major (pixels vary slowest).
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import BadMagicError, NumericError, ShapeError, TruncatedError

__all__ = [
    "PixelSeries",
    "C2Matrix",
    "G2Curve",
    "StandardizationParams",
    "compute_c2",
    "repair_diagonal",
    "extract_g2",
    "standardize",
    "destandardize",
    "reverse_age",
    "subsample_frames",
    "crop_diagonal_tiles",
    "bootstrap_pixels",
    "slice_age",
    "save_c2",
    "load_c2",
    "save_pixel_series",
    "load_pixel_series",
    "atomic_write_bytes",
]


@dataclass
class PixelSeries:
    """Per-pixel intensity traces: ``intensities[p, t]`` >= 0, P pixels, T frames."""

    intensities: np.ndarray
    frame_interval_s: float = 1.0
    q_label: str = ""

    def __post_init__(self):
        self.intensities = np.asarray(self.intensities, dtype=np.float64)
        if self.intensities.ndim != 2:
            raise ShapeError("PixelSeries intensities must be a P x T array")
        if np.any(self.intensities < 0):
            raise NumericError("PixelSeries intensities must be non-negative")

    @property
    def n_pixels(self) -> int:
        return self.intensities.shape[0]

    @property
    def n_frames(self) -> int:
        return self.intensities.shape[1]


@dataclass
class C2Matrix:
    """Square symmetric two-time correlation map with frame metadata."""

    values: np.ndarray
    frame_interval_s: float = 1.0
    q_label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ShapeError("C2Matrix values must be a square 2-D array")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values.T))


@dataclass
class G2Curve:
    """One-time correlation curve: value per integer frame lag."""

    lags: np.ndarray
    values: np.ndarray
    n_averaged: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.n_averaged is None:
            self.n_averaged = np.ones_like(self.lags)
        else:
            self.n_averaged = np.asarray(self.n_averaged, dtype=np.int64)
        if not (self.lags.shape == self.values.shape == self.n_averaged.shape):
            raise ShapeError("G2Curve arrays must share one length")
        if len(self.lags) > 1 and np.any(np.diff(self.lags) <= 0):
            raise ShapeError("G2Curve lags must be strictly increasing")


@dataclass(frozen=True)
class StandardizationParams:
    """Mean and (population) standard deviation of a source matrix."""

    mean: float
    std: float


def _symmetrize(values: np.ndarray) -> np.ndarray:
    # (A + A.T)/2 is bitwise symmetric; GEMM output need not be.
    return (values + values.T) / 2.0


def compute_c2(series: PixelSeries) -> C2Matrix:
    """Build the two-time correlation map from per-pixel intensity traces.

    ``C2[t1, t2] = <I(t1) I(t2)>_p / (<I(t1)>_p <I(t2)>_p)`` with the
    average taken over pixels.

    Raises
    ------
    NumericError
        If any frame has zero mean intensity over pixels.
    """
    if series.n_pixels < 2:
        raise ShapeError("compute_c2 needs at least 2 pixels")
    intens = series.intensities
    frame_mean = intens.mean(axis=0)
    bad = np.flatnonzero(frame_mean <= 0.0)
    if bad.size:
        raise NumericError(f"frame {bad[0]} has zero mean intensity")
    cross = intens.T @ intens / series.n_pixels
    values = _symmetrize(cross / np.outer(frame_mean, frame_mean))
    return C2Matrix(values, series.frame_interval_s, series.q_label)


def repair_diagonal(c2: C2Matrix) -> C2Matrix:
    """Replace the main diagonal by the mean of its nearest off-diagonal neighbors.

    Interior entries average the two same-row neighbors; the two corners use
    their single neighbor.  Off-diagonal entries are untouched.
    """
    t = c2.n_frames
    if t < 2:
        raise ShapeError("repair_diagonal needs at least 2 frames")
    values = c2.values.copy()
    upper = np.diagonal(c2.values, offset=1)
    new_diag = np.empty(t)
    new_diag[0] = upper[0]
    new_diag[-1] = upper[-1]
    if t > 2:
        new_diag[1:-1] = (upper[:-1] + upper[1:]) / 2.0
    np.fill_diagonal(values, new_diag)
    return C2Matrix(values, c2.frame_interval_s, c2.q_label)


def extract_g2(c2: C2Matrix) -> G2Curve:
    """Average the map along constant lag: ``g2(tau) = <C2[i, i+tau]>_i``."""
    t = c2.n_frames
    if t < 2:
        raise ShapeError("extract_g2 needs at least 2 frames")
    lags = np.arange(t)
    values = np.array([np.diagonal(c2.values, offset=k).mean() for k in range(t)])
    n_averaged = t - lags
    return G2Curve(lags, values, n_averaged)


def standardize(c2: C2Matrix):
    """Shift/scale to zero mean and unit population standard deviation.

    Returns (standardized C2Matrix, StandardizationParams).  Raises
    NumericError("zero variance") on a constant matrix.
    """
    mean = float(c2.values.mean())
    std = float(c2.values.std())
    if std <= 0.0:
        raise NumericError("zero variance: cannot standardize a constant matrix")
    values = (c2.values - mean) / std
    return C2Matrix(values, c2.frame_interval_s, c2.q_label), StandardizationParams(mean, std)


def destandardize(c2_std: C2Matrix, params: StandardizationParams) -> C2Matrix:
    """Invert :func:`standardize` with the recorded parameters."""
    values = c2_std.values * params.std + params.mean
    return C2Matrix(values, c2_std.frame_interval_s, c2_std.q_label)


def reverse_age(c2: C2Matrix) -> C2Matrix:
    """Reverse the age axis: ``values'[i, j] = values[T-1-i, T-1-j]``."""
    return C2Matrix(np.ascontiguousarray(c2.values[::-1, ::-1]),
                    c2.frame_interval_s, c2.q_label)


def subsample_frames(c2: C2Matrix, k: int) -> C2Matrix:
    """Keep every k-th frame (indices 0, k, 2k, ...); scales the frame interval.

    Identical to recomputing the map from a frame-subsampled series, since
    each entry depends only on its own frame pair.
    """
    if k < 1:
        raise ShapeError("subsample interval must be >= 1")
    values = c2.values[::k, ::k]
    if values.shape[0] < 2:
        raise ShapeError(
            f"subsampling by {k} leaves {values.shape[0]} frames; need >= 2")
    return C2Matrix(np.ascontiguousarray(values),
                    c2.frame_interval_s * k, c2.q_label)


def crop_diagonal_tiles(c2: C2Matrix, size: int, stride: int):
    """Cut fixed-size square tiles along the main diagonal.

    Tiles are anchored at (s*stride, s*stride) while they fit; a final tile
    anchored at (T-size, T-size) is appended when the stride walk did not
    land there, so the last frames are always covered.
    """
    t = c2.n_frames
    if size > t:
        raise ShapeError(f"tile size {size} exceeds map size {t}")
    if size < 1 or stride < 1:
        raise ShapeError("tile size and stride must be positive")
    anchors = list(range(0, t - size + 1, stride))
    if anchors[-1] != t - size:
        anchors.append(t - size)
    tiles = []
    for a in anchors:
        values = np.ascontiguousarray(c2.values[a:a + size, a:a + size])
        tiles.append(C2Matrix(values, c2.frame_interval_s, c2.q_label))
    return tiles


def bootstrap_pixels(series: PixelSeries, fraction: float, seed: int) -> PixelSeries:
    """Select round(fraction * P) distinct pixels uniformly, without replacement.

    Deterministic per seed; the selected rows are returned in index order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    n_keep = int(round(fraction * series.n_pixels))
    if n_keep < 2:
        raise NumericError(
            f"fraction {fraction} keeps {n_keep} of {series.n_pixels} pixels; need >= 2")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(series.n_pixels, size=n_keep, replace=False))
    return PixelSeries(series.intensities[chosen].copy(),
                       series.frame_interval_s, series.q_label)


def slice_age(c2: C2Matrix, age_index: int, half_window: int = 0) -> G2Curve:
    """Cut a lag profile perpendicular to the main diagonal at one age.

    For half_window 0 the slice is
    ``s(tau) = values[a - ceil(tau/2), a + floor(tau/2)]`` for
    tau = 0 .. 2*min(a, T-1-a).  For half_window w > 0 the slices at ages
    a-w .. a+w are averaged pointwise over their common lag range.
    """
    t = c2.n_frames
    a = age_index
    if not 0 <= a < t:
        raise ShapeError(f"age index {a} out of range [0, {t})")
    w = int(half_window)
    if w < 0:
        raise ValueError("half_window must be >= 0")
    if a - w < 0 or a + w >= t:
        raise ShapeError(
            f"age window [{a - w}, {a + w}] exceeds the valid age range [0, {t})")
    ages = range(a - w, a + w + 1)
    tau_max = min(2 * min(aa, t - 1 - aa) for aa in ages)
    lags = np.arange(tau_max + 1)
    values = np.zeros(tau_max + 1)
    for aa in ages:
        rows = aa - np.ceil(lags / 2).astype(np.int64)
        cols = aa + lags // 2
        values += c2.values[rows, cols]
    values /= len(ages)
    n_averaged = np.full(tau_max + 1, len(ages), dtype=np.int64)
    return G2Curve(lags, values, n_averaged)


# ---------------------------------------------------------------------------
# file I/O

_C2_MAGIC = b"C2F1"
_PXS_MAGIC = b"PXS1"


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write a file via temp-then-rename so readers never see partial data."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_c2(path: str, c2: C2Matrix, provenance: str = "") -> None:
    """Write a C2F1 file plus its ``.meta`` sidecar."""
    t = c2.n_frames
    payload = _C2_MAGIC + np.uint32(t).tobytes() + \
        np.ascontiguousarray(c2.values, dtype="<f8").tobytes()
    atomic_write_bytes(path, payload)
    meta = [f"frame_interval_s: {c2.frame_interval_s!r}",
            f"q_label: {c2.q_label}"]
    if provenance:
        meta.append(f"provenance: {provenance}")
    atomic_write_bytes(path + ".meta", ("\n".join(meta) + "\n").encode())


def load_c2(path: str) -> C2Matrix:
    """Read a C2F1 file; picks up the ``.meta`` sidecar when present."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _C2_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected C2F1")
    if len(blob) < 8:
        raise TruncatedError(f"{path}: header truncated")
    t = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    need = 8 + t * t * 8
    if len(blob) < need:
        raise TruncatedError(
            f"{path}: expected {need} bytes for a {t}x{t} map, got {len(blob)}")
    values = np.frombuffer(blob[8:need], dtype="<f8").reshape(t, t).copy()
    frame_interval_s = 1.0
    q_label = ""
    meta_path = path + ".meta"
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            for line in fh:
                if ":" not in line:
                    continue
                key, val = line.split(":", 1)
                key, val = key.strip(), val.strip()
                if key == "frame_interval_s":
                    frame_interval_s = float(val)
                elif key == "q_label":
                    q_label = val
    return C2Matrix(values, frame_interval_s, q_label)


def save_pixel_series(path: str, series: PixelSeries) -> None:
    """Write a PXS1 file."""
    payload = _PXS_MAGIC + \
        np.uint32(series.n_pixels).tobytes() + \
        np.uint32(series.n_frames).tobytes() + \
        np.ascontiguousarray(series.intensities, dtype="<f8").tobytes()
    atomic_write_bytes(path, payload)


def load_pixel_series(path: str) -> PixelSeries:
    """Read a PXS1 file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _PXS_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected PXS1")
    if len(blob) < 12:
        raise TruncatedError(f"{path}: header truncated")
    p = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    t = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    need = 12 + p * t * 8
    if len(blob) < need:
        raise TruncatedError(
            f"{path}: expected {need} bytes for a {p}x{t} series, got {len(blob)}")
    intensities = np.frombuffer(blob[12:need], dtype="<f8").reshape(p, t).copy()
    return PixelSeries(intensities)
