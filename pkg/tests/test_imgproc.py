import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sketchauth.imgproc import (
    CannyParams,
    canny,
    gradient_magnitude,
    resize_bicubic,
    to_grey_normalised,
)


def px(r, g, b):
    return to_grey_normalised(np.array([[[r, g, b]]], dtype=np.uint8))[0, 0]


def test_luminance_examples():
    assert px(128, 128, 128) == pytest.approx(128 / 255, abs=1e-15)
    assert px(255, 0, 0) == pytest.approx(0.299, abs=1e-15)
    assert px(0, 0, 0) == 0.0


@settings(max_examples=100, deadline=None)
@given(arrays(np.uint8, (3, 4, 3)))
def test_luminance_range_and_grey_passthrough(rgb):
    y = to_grey_normalised(rgb)
    assert y.shape == (3, 4)
    assert ((y >= 0) & (y <= 1)).all()
    grey = np.repeat(rgb[..., :1], 3, axis=2)
    assert np.allclose(to_grey_normalised(grey), grey[..., 0] / 255.0, rtol=0, atol=1e-15)


# -- bicubic resampling ----------------------------------------------------------


def keys(t, a=-0.5):
    t = abs(t)
    if t <= 1:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def resample_line(values, n_out):
    """Scalar 1-D bicubic resampler, pixel-centre aligned, clamped ends."""
    n_in = len(values)
    out = []
    for i in range(n_out):
        src = (i + 0.5) * n_in / n_out - 0.5
        base = math.floor(src)
        acc = 0.0
        for tap in range(base - 1, base + 3):
            acc += values[min(max(tap, 0), n_in - 1)] * keys(src - tap)
        out.append(acc)
    return out


def test_resize_identity():
    img = np.random.default_rng(1).random((224, 224))
    assert np.array_equal(resize_bicubic(img), img)


@pytest.mark.parametrize("shape", [(4, 4), (37, 91), (300, 200), (224, 224), (500, 17)])
def test_resize_preserves_constant(shape):
    out = resize_bicubic(np.full(shape, 0.7))
    assert out.shape == (224, 224)
    assert (out == 0.7).all()


def test_resize_ramp_matches_scalar_oracle():
    ramp = np.tile(np.arange(448) / 447.0, (448, 1))
    out = resize_bicubic(ramp)
    line = resample_line(list(ramp[0]), 224)
    expected = np.clip(np.array(line), 0, 1)
    assert np.allclose(out, expected[None, :], rtol=0, atol=1e-12)


def test_resize_general_matches_separable_oracle():
    img = np.random.default_rng(5).random((13, 9))
    rows = np.array([resample_line(list(r), 7) for r in img])
    full = np.array([resample_line(list(c), 11) for c in rows.T]).T
    assert np.allclose(resize_bicubic(img, (11, 7)), np.clip(full, 0, 1), atol=1e-12)


def test_resize_rejects_tiny():
    with pytest.raises(ValueError, match="4x4"):
        resize_bicubic(np.zeros((3, 10)))


def test_resize_output_clipped():
    img = np.zeros((40, 40))
    img[:, 20:] = 1.0  # ringing overshoots at the step
    out = resize_bicubic(img, 97)
    assert out.min() >= 0.0 and out.max() <= 1.0


# -- Canny ----------------------------------------------------------------------


def reference_canny(img, sigma=1.0, t_low=0.10, t_high=0.20):
    """Brute-force scalar Canny: clamped Gaussian, Sobel, max-normalised L2,
    4-direction NMS, double threshold, BFS hysteresis (8-connected)."""
    h, w = len(img), len(img[0])

    def at(a, i, j):
        return a[min(max(i, 0), h - 1)][min(max(j, 0), w - 1)]

    r = math.ceil(3 * sigma)
    g = [math.exp(-(k * k) / (2 * sigma * sigma)) for k in range(-r, r + 1)]
    s = sum(g)
    g = [v / s for v in g]
    blur = [[sum(g[di + r] * g[dj + r] * at(img, i + di, j + dj)
                 for di in range(-r, r + 1) for dj in range(-r, r + 1))
             for j in range(w)] for i in range(h)]

    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    gx = [[sum(kx[a][b] * at(blur, i + a - 1, j + b - 1) for a in range(3) for b in range(3))
           for j in range(w)] for i in range(h)]
    gy = [[sum(kx[b][a] * at(blur, i + a - 1, j + b - 1) for a in range(3) for b in range(3))
           for j in range(w)] for i in range(h)]
    mag = [[math.hypot(gx[i][j], gy[i][j]) for j in range(w)] for i in range(h)]
    peak = max(max(row) for row in mag)
    if peak == 0:
        return np.zeros((h, w), bool)
    mag = [[v / peak for v in row] for row in mag]

    def m(i, j):
        return mag[i][j] if 0 <= i < h and 0 <= j < w else 0.0

    keep = [[False] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            ang = math.degrees(math.atan2(gy[i][j], gx[i][j])) % 180
            if ang < 22.5 or ang >= 157.5:
                d = (0, 1)
            elif ang < 67.5:
                d = (1, 1)
            elif ang < 112.5:
                d = (1, 0)
            else:
                d = (1, -1)
            v = mag[i][j]
            keep[i][j] = v > 0 and v > m(i - d[0], j - d[1]) and v >= m(i + d[0], j + d[1])

    weak = [[keep[i][j] and mag[i][j] >= t_low for j in range(w)] for i in range(h)]
    out = np.zeros((h, w), bool)
    queue = deque((i, j) for i in range(h) for j in range(w) if keep[i][j] and mag[i][j] >= t_high)
    for i, j in queue:
        out[i, j] = True
    while queue:
        i, j = queue.popleft()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                a, b = i + di, j + dj
                if 0 <= a < h and 0 <= b < w and weak[a][b] and not out[a, b]:
                    out[a, b] = True
                    queue.append((a, b))
    return out


def disc(size=64, radius=20):
    yy, xx = np.mgrid[:size, :size]
    c = (size - 1) / 2
    return ((yy - c) ** 2 + (xx - c) ** 2 <= radius**2).astype(np.float64)


def test_constant_image_has_no_edges():
    assert not canny(np.full((50, 60), 0.3)).any()


def step(size=224, invert=False):
    img = np.zeros((size, size))
    img[:, size // 2 :] = 1.0
    return 1.0 - img if invert else img


def test_vertical_step_gives_single_column():
    edges = canny(step())
    assert (edges.sum(axis=1) == 1).all()
    cols = np.flatnonzero(edges.any(axis=0))
    assert cols.size == 1 and cols[0] in (111, 112)


def test_step_edge_stable_under_inversion():
    a = np.flatnonzero(canny(step()).any(axis=0))
    b = np.flatnonzero(canny(step(invert=True)).any(axis=0))
    assert a.size == b.size == 1
    assert abs(int(a[0]) - int(b[0])) <= 1


def test_disc_matches_brute_force_reference():
    img = disc()
    assert np.array_equal(canny(img), reference_canny(img.tolist()))


@pytest.mark.xfail(strict=True, reason="a sigma=1 blur thickens the digital circle; 148 edge pixels vs 2*pi*20=125.7 (+18%)")
def test_disc_edge_count_near_circumference():
    n = int(canny(disc()).sum())
    assert abs(n - 2 * math.pi * 20) <= 0.15 * 2 * math.pi * 20


@pytest.mark.parametrize("seed", range(3))
def test_random_images_match_reference(seed):
    img = np.random.default_rng(seed).random((17, 23))
    assert np.array_equal(canny(img), reference_canny(img.tolist()))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (20, 20), elements=st.floats(0, 1)), st.floats(0.05, 0.4), st.floats(0.5, 2.0))
def test_edges_subset_of_low_threshold(img, t_low, sigma):
    params = CannyParams(sigma=sigma, t_low=t_low, t_high=min(t_low * 2, 0.95))
    edges = canny(img, params)
    mag, _ = gradient_magnitude(img, sigma)
    assert not (edges & (mag < t_low)).any()


@pytest.mark.parametrize("bad", [dict(t_low=0.3, t_high=0.2), dict(t_low=0.0), dict(sigma=0.0)])
def test_canny_params_validated(bad):
    with pytest.raises(ValueError):
        CannyParams(**bad)
