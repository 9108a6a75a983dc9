"""Five-dimensional handcrafted descriptor and per-artist z-scoring.

The descriptor of a 224x224 grey raster ``P`` in ``[0, 1]`` is

    [fourier_energy, shannon_entropy, contrast, glcm_homogeneity, fractal_dimension]

computed in that order by :func:`extract_features`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sketchauth.imgproc import CannyParams, canny, preprocess

FEATURE_NAMES = ("fourier_energy", "shannon_entropy", "contrast", "glcm_homogeneity", "fractal_dimension")
BOX_SIZES = (2, 4, 8, 16, 32, 64)
GLCM_ANGLES = (0, 45, 90, 135)
# (row, col) displacement per unit distance; rows grow downwards
_GLCM_STEPS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
DEFAULT_SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class GlcmParams:
    levels: int = 64
    distance: int = 1
    angles: tuple[int, ...] = GLCM_ANGLES

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.distance < 1:
            raise ValueError(f"distance must be >= 1, got {self.distance}")
        bad = [a for a in self.angles if a not in _GLCM_STEPS]
        if bad or not self.angles:
            raise ValueError(f"angles must be drawn from {GLCM_ANGLES}, got {self.angles}")


@dataclass(frozen=True)
class FeatureVector:
    fourier_energy: float
    shannon_entropy: float
    contrast: float
    glcm_homogeneity: float
    fractal_dimension: float
    edgeless: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values, edgeless: bool = False) -> FeatureVector:
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*values, edgeless=bool(edgeless))


@dataclass(frozen=True)
class BoxCountSeries:
    sizes: tuple[int, ...]
    counts: tuple[int, ...]


# -- Fourier energy -----------------------------------------------------------


def dft2(img: np.ndarray) -> np.ndarray:
    """Two-dimensional DFT ``F(u, v) = sum P(i, j) exp(-2 pi i (ui/M + vj/N))``."""
    return np.fft.fft2(np.asarray(img, dtype=np.float64))


def fourier_energy(img: np.ndarray, method: str = "dft") -> float:
    """Total spectral energy ``sum |F(u, v)|**2``.

    ``method="dft"`` sums the squared spectrum; ``method="parseval"`` uses the
    equivalent spatial form ``M * N * sum P**2``.
    """
    img = np.asarray(img, dtype=np.float64)
    if method == "dft":
        spec = dft2(img)
        return float(np.sum(spec.real**2 + spec.imag**2))
    if method == "parseval":
        return float(img.size * np.sum(img * img))
    raise ValueError(f"unknown method {method!r}")


# -- intensity statistics -----------------------------------------------------


def quantise(img: np.ndarray, levels: int) -> np.ndarray:
    """Map ``[0, 1]`` values to integer levels with ``min(floor(P * levels), levels - 1)``."""
    q = np.floor(np.asarray(img, dtype=np.float64) * levels).astype(np.int64)
    return np.clip(q, 0, levels - 1)


def histogram256(img: np.ndarray) -> np.ndarray:
    return np.bincount(quantise(img, 256).ravel(), minlength=256)


def shannon_entropy(img: np.ndarray) -> float:
    """Entropy in bits of the 256-bin intensity histogram."""
    counts = histogram256(img)
    p = counts[counts > 0] / counts.sum()
    h = -float(np.sum(p * np.log2(p)))
    return max(h, 0.0)


def contrast(img: np.ndarray) -> float:
    """Population standard deviation of the intensities."""
    img = np.asarray(img, dtype=np.float64)
    if img.min() == img.max():
        # the float mean of a constant need not equal the constant
        return 0.0
    mu = img.mean()
    return float(math.sqrt(np.mean((img - mu) ** 2)))


# -- GLCM ---------------------------------------------------------------------


def glcm(img: np.ndarray, params: GlcmParams = GlcmParams()) -> dict[int, np.ndarray]:
    """Symmetric, normalised co-occurrence matrix for each angle in ``params``."""
    q = quantise(img, params.levels)
    h, w = q.shape
    d = params.distance
    out = {}
    for angle in params.angles:
        di, dj = _GLCM_STEPS[angle]
        di, dj = di * d, dj * d
        r0, r1 = max(0, -di), min(h, h - di)
        c0, c1 = max(0, -dj), min(w, w - dj)
        if r1 <= r0 or c1 <= c0:
            raise ValueError(f"image {w}x{h} has no pixel pairs at distance {d}, angle {angle}")
        a = q[r0:r1, c0:c1].ravel()
        b = q[r0 + di : r1 + di, c0 + dj : c1 + dj].ravel()
        counts = np.bincount(a * params.levels + b, minlength=params.levels**2)
        mat = counts.reshape(params.levels, params.levels).astype(np.float64)
        mat = mat + mat.T
        out[angle] = mat / mat.sum()
    return out


def glcm_homogeneity(img: np.ndarray, params: GlcmParams = GlcmParams()) -> float:
    """Mean over angles of ``sum G(i, j) / (1 + |i - j|)``."""
    idx = np.arange(params.levels)
    weight = 1.0 / (1.0 + np.abs(idx[:, None] - idx[None, :]))
    mats = glcm(img, params)
    return float(np.mean([np.sum(m * weight) for m in mats.values()]))


# -- box counting ---------------------------------------------------------------


def box_counts(edges: np.ndarray, sizes=BOX_SIZES) -> BoxCountSeries:
    """Occupied boxes per size on a grid anchored at the origin, partial boxes included."""
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    counts = []
    for s in sizes:
        rows = np.logical_or.reduceat(edges, np.arange(0, h, s), axis=0)
        boxes = np.logical_or.reduceat(rows, np.arange(0, w, s), axis=1)
        counts.append(int(boxes.sum()))
    return BoxCountSeries(tuple(sizes), tuple(counts))


def ols_slope(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    return float(np.sum(dx * (y - y.mean())) / np.sum(dx * dx))


def fractal_dimension(edges: np.ndarray, sizes=BOX_SIZES) -> tuple[float, bool]:
    """Box-counting dimension of an edge map.

    Returns ``(slope, edgeless)``; an empty map gives ``(0.0, True)``.
    """
    series = box_counts(edges, sizes)
    if series.counts[0] == 0:
        return 0.0, True
    eps = np.asarray(series.sizes, dtype=np.float64)
    return ols_slope(np.log(1.0 / eps), np.log(series.counts)), False


# -- pipeline -------------------------------------------------------------------


def features_from_grey(
    grey: np.ndarray,
    canny_params: CannyParams = CannyParams(),
    glcm_params: GlcmParams = GlcmParams(),
) -> FeatureVector:
    edges = canny(grey, canny_params)
    dim, edgeless = fractal_dimension(edges)
    return FeatureVector(
        fourier_energy=fourier_energy(grey),
        shannon_entropy=shannon_entropy(grey),
        contrast=contrast(grey),
        glcm_homogeneity=glcm_homogeneity(grey, glcm_params),
        fractal_dimension=dim,
        edgeless=edgeless,
    )


def extract_features(
    rgb: np.ndarray,
    canny_params: CannyParams = CannyParams(),
    glcm_params: GlcmParams = GlcmParams(),
) -> FeatureVector:
    """Greyscale, resize to 224x224, then compute the five descriptors."""
    return features_from_grey(preprocess(rgb), canny_params, glcm_params)


# -- standardisation ------------------------------------------------------------


@dataclass(frozen=True)
class Standardiser:
    mean: np.ndarray
    std: np.ndarray
    sigma_floor: float = DEFAULT_SIGMA_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same shape")
        if np.any(self.std < self.sigma_floor):
            raise ValueError("std below sigma_floor")

    def __eq__(self, other):
        if not isinstance(other, Standardiser):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and self.sigma_floor == other.sigma_floor
        )

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "sigma_floor": self.sigma_floor}

    @classmethod
    def from_dict(cls, d: dict) -> Standardiser:
        return cls(np.array(d["mean"]), np.array(d["std"]), float(d["sigma_floor"]))


def _as_matrix(vectors) -> np.ndarray:
    rows = [v.as_array() if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64) for v in vectors]
    return np.vstack(rows) if rows else np.empty((0, len(FEATURE_NAMES)))


def fit_standardiser(train, sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> Standardiser:
    """Per-component population mean and std, with std floored at ``sigma_floor``."""
    x = _as_matrix(train)
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 training vectors, got {x.shape[0]}")
    mean = x.mean(axis=0)
    std = np.sqrt(np.mean((x - mean) ** 2, axis=0))
    return Standardiser(mean, np.maximum(std, sigma_floor), sigma_floor)


def standardise(f, s: Standardiser) -> np.ndarray:
    """Z-score a feature vector (or an ``(n, 5)`` stack) with ``s``."""
    x = f.as_array() if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)
    return (x - s.mean) / s.std
