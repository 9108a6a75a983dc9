"""Deterministic preprocessing: luminance, bicubic resampling and Canny edges.

Rasters are plain numpy arrays. RGB images are ``(height, width, 3)`` uint8,
grey images are ``(height, width)`` float64 in ``[0, 1]`` and edge maps are
``(height, width)`` bool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

TARGET_SIZE = 224
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CUBIC_A = -0.5


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.0
    t_low: float = 0.10
    t_high: float = 0.20

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.t_low < self.t_high:
            raise ValueError(f"need 0 < t_low < t_high, got {self.t_low}, {self.t_high}")


def to_grey_normalised(rgb: np.ndarray) -> np.ndarray:
    """Luminance of an 8-bit RGB raster scaled to ``[0, 1]``."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (height, width, 3) RGB array, got shape {rgb.shape}")
    r, g, b = (rgb[..., k].astype(np.float64) for k in range(3))
    y = (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b) / 255.0
    # weights sum to 1 but the products can round a hair outside [0, 1]
    return np.clip(y, 0.0, 1.0)


def cubic_kernel(x, a: float = CUBIC_A):
    """Keys cubic convolution kernel; ``a = -0.5`` gives Catmull-Rom."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def _taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source index of each output sample, its four clamped tap indices and weights."""
    # pixel-centre alignment, so n_in == n_out is the identity
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    offsets = np.arange(-1, 3)
    idx = np.clip(base[:, None] + offsets, 0, n_in - 1)
    weights = cubic_kernel((src - base)[:, None] - offsets)
    return np.clip(base, 0, n_in - 1), idx, weights


def _resample_axis0(img: np.ndarray, n_out: int) -> np.ndarray:
    anchor, idx, weights = _taps(img.shape[0], n_out)
    ref = img[anchor]
    # weights sum to one, so summing offsets from an in-support anchor keeps
    # constant regions exactly constant
    return ref + np.einsum("ok,okw->ow", weights, img[idx] - ref[:, None, :])


def resize_bicubic(img: np.ndarray, size: int | tuple[int, int] = TARGET_SIZE) -> np.ndarray:
    """Bicubic resize of a grey raster with clamped borders; output clipped to ``[0, 1]``.

    ``size`` is either a square side or ``(height, width)``.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grey raster, got shape {img.shape}")
    h, w = img.shape
    if h < 4 or w < 4:
        raise ValueError(f"image {w}x{h} is smaller than the 4x4 bicubic support")
    out_h, out_w = (size, size) if isinstance(size, int) else size
    out = _resample_axis0(_resample_axis0(img, out_h).T, out_w).T
    return np.clip(out, 0.0, 1.0)


def preprocess(rgb: np.ndarray, size: int = TARGET_SIZE) -> np.ndarray:
    """Greyscale, normalise and resize to ``size`` x ``size``."""
    return resize_bicubic(to_grey_normalised(rgb), size)


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _correlate_clamped(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="edge")
    n = img.shape[axis]
    out = np.zeros_like(img)
    for k, wk in enumerate(kernel):
        out += wk * np.take(padded, np.arange(k, k + n), axis=axis)
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    return _correlate_clamped(_correlate_clamped(img, k, 0), k, 1)


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(gx, gy)``: derivatives along columns and rows, clamped borders."""
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    gx = _correlate_clamped(_correlate_clamped(img, smooth, 0), diff, 1)
    gy = _correlate_clamped(_correlate_clamped(img, diff, 0), smooth, 1)
    return gx, gy


# (row, col) step towards the "next" neighbour for each quantised direction
_NMS_STEPS = {0: (0, 1), 45: (1, 1), 90: (1, 0), 135: (1, -1)}


def quantise_direction(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    q = np.zeros(angle.shape, dtype=np.int64)
    q[(angle >= 22.5) & (angle < 67.5)] = 45
    q[(angle >= 67.5) & (angle < 112.5)] = 90
    q[(angle >= 112.5) & (angle < 157.5)] = 135
    return q


def non_maximum_suppression(mag: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Thin ridges along the quantised gradient direction.

    A pixel survives when it is strictly larger than its backward neighbour and
    at least as large as its forward neighbour, so a plateau two pixels wide
    keeps exactly one pixel. Neighbours outside the raster count as zero.
    """
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")
    keep = np.zeros(mag.shape, dtype=bool)
    for d, (di, dj) in _NMS_STEPS.items():
        nxt = padded[1 + di : 1 + di + h, 1 + dj : 1 + dj + w]
        prv = padded[1 - di : 1 - di + h, 1 - dj : 1 - dj + w]
        sel = direction == d
        keep |= sel & (mag > prv) & (mag >= nxt)
    return keep & (mag > 0)


def hysteresis(weak: np.ndarray, strong: np.ndarray) -> np.ndarray:
    """Keep 8-connected components of ``weak`` that contain a ``strong`` pixel."""
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(weak.shape, dtype=bool)
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[labels[strong & weak]] = True
    seeded[0] = False
    return seeded[labels]


def gradient_magnitude(img: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Blurred Sobel magnitude normalised by its maximum, plus the quantised direction."""
    gx, gy = sobel(gaussian_blur(np.asarray(img, dtype=np.float64), sigma))
    mag = np.hypot(gx, gy)
    peak = mag.max() if mag.size else 0.0
    if peak > 0:
        mag = mag / peak
    return mag, quantise_direction(gx, gy)


def canny(img: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Canny edge map of a grey raster.

    Gradient magnitudes are divided by their image maximum so the thresholds in
    ``params`` act on a ``[0, 1]`` scale. A flat image gives an empty map.
    """
    mag, direction = gradient_magnitude(img, params.sigma)
    if not mag.any():
        return np.zeros(mag.shape, dtype=bool)
    thin = non_maximum_suppression(mag, direction)
    weak = thin & (mag >= params.t_low)
    strong = thin & (mag >= params.t_high)
    return hysteresis(weak, strong)
