"""Independent reference computations used by the test suite.

Each oracle is written from the defining formula with plain loops or
high-precision arithmetic, sharing no code with the package.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction

import mpmath
import numpy as np


def dft_energy(img) -> float:
    """Direct double sum over all frequencies of |F(u, v)|^2."""
    m, n = len(img), len(img[0])
    total = 0.0
    for u in range(m):
        for v in range(n):
            f = 0j
            for i in range(m):
                for j in range(n):
                    f += img[i][j] * cmath.exp(-2j * math.pi * (u * i / m + v * j / n))
            total += abs(f) ** 2
    return total


def two_pass_std(values) -> float:
    values = list(values)
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


GLCM_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


def glcm_homogeneity(levels_img, n_levels: int, d: int = 1) -> float:
    """Enumerate every ordered pixel pair (both directions) per angle."""
    h, w = len(levels_img), len(levels_img[0])
    per_angle = []
    for di, dj in GLCM_OFFSETS.values():
        pairs = []
        for i in range(h):
            for j in range(w):
                a, b = i + di * d, j + dj * d
                if 0 <= a < h and 0 <= b < w:
                    pairs.append((levels_img[i][j], levels_img[a][b]))
                    pairs.append((levels_img[a][b], levels_img[i][j]))
        per_angle.append(sum(Fraction(1, 1 + abs(p - q)) for p, q in pairs) / len(pairs))
    return float(sum(per_angle) / len(per_angle))


def box_count(edges, size: int) -> int:
    h, w = len(edges), len(edges[0])
    n = 0
    for r in range(0, h, size):
        for c in range(0, w, size):
            if any(edges[i][j] for i in range(r, min(r + size, h)) for j in range(c, min(c + size, w))):
                n += 1
    return n


def ols_slope(x, y) -> float:
    x = [mpmath.mpf(v) for v in x]
    y = [mpmath.mpf(v) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    return float(sum((a - mx) * (b - my) for a, b in zip(x, y)) / sum((a - mx) ** 2 for a in x))


def box_dimension(counts, sizes=(2, 4, 8, 16, 32, 64)) -> float:
    with mpmath.workdps(40):
        return ols_slope([-mpmath.log(s) for s in sizes], [mpmath.log(c) for c in counts])


def wilson_mp(x: int, n: int, z: float = 1.96, dps: int = 40) -> tuple[float, float]:
    """Wilson score interval at ``dps`` decimal digits, clamped to [0, 1]."""
    with mpmath.workdps(dps):
        z = mpmath.mpf(z)
        p = mpmath.mpf(x) / n
        denom = 1 + z**2 / n
        centre = p + z**2 / (2 * n)
        half = z * mpmath.sqrt(p * (1 - p) / n + z**2 / (4 * n * n))
        lo = (centre - half) / denom
        hi = (centre + half) / denom
        return float(max(lo, 0)), float(min(hi, 1))


def wilson_longdouble(x: np.ndarray, n: np.ndarray, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Wilson interval in extended precision (80-bit on x86)."""
    x = x.astype(np.longdouble)
    n = n.astype(np.longdouble)
    z = np.longdouble(z)
    p = x / n
    denom = 1 + z * z / n
    centre = p + z * z / (2 * n)
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return np.clip((centre - half) / denom, 0, 1), np.clip((centre + half) / denom, 0, 1)


def matrix_forward(weights, biases, x):
    """Layer-by-layer forward pass with explicit loops over units."""
    a = list(x)
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = [sum(w[r][c] * a[c] for c in range(len(a))) + b[r] for r in range(len(b))]
        a = z if k == len(weights) - 1 else [max(v, 0.0) for v in z]
    return a


def central_difference(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(theta)
    for k in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        g[k] = (f(up) - f(down)) / (2 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max over entries of |a - b| / max(|a|, |b|, floor)."""
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale))


def exhaustive_ocsvm_dual(kernel: np.ndarray, upper: float) -> float:
    """Minimum of 0.5 a^T K a on {0 <= a <= upper, sum a = 1} by active-set enumeration.

    Every assignment of each variable to {lower bound, upper bound, free} is
    tried; the free block is solved from its KKT linear system and kept only if
    feasible. Convexity makes the best feasible candidate the global minimum.
    """
    import itertools

    n = kernel.shape[0]
    best = math.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        at_up = [i for i, s in enumerate(pattern) if s == 1]
        free = [i for i, s in enumerate(pattern) if s == 2]
        alpha = np.zeros(n)
        alpha[at_up] = upper
        rest = 1.0 - upper * len(at_up)
        if not free:
            if abs(rest) > 1e-12:
                continue
        else:
            kf = kernel[np.ix_(free, free)]
            rhs = -kernel[np.ix_(free, at_up)] @ alpha[at_up]
            m = len(free)
            system = np.zeros((m + 1, m + 1))
            system[:m, :m] = kf
            system[:m, m] = 1.0
            system[m, :m] = 1.0
            try:
                sol = np.linalg.solve(system, np.append(rhs, rest))
            except np.linalg.LinAlgError:
                continue
            alpha[free] = sol[:m]
            if (alpha < -1e-10).any() or (alpha > upper + 1e-10).any():
                continue
        best = min(best, 0.5 * float(alpha @ kernel @ alpha))
    return best
