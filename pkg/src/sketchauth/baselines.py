"""Classical one-class scorers on standardised features.

Both return anomaly scores where larger means more anomalous, so they share the
training-quantile thresholding used for the autoencoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    pass


@dataclass
class GaussianModel:
    mean: np.ndarray
    cov: np.ndarray
    ridge: float
    precision: np.ndarray

    method = "mahalanobis"

    def score(self, x) -> np.ndarray | float:
        return mahalanobis_score(self, x)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
            "ridge": self.ridge,
            "precision": self.precision.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GaussianModel:
        return cls(np.array(d["mean"]), np.array(d["cov"]), float(d["ridge"]), np.array(d["precision"]))


def fit_gaussian(train, ridge: float = 1e-6) -> GaussianModel:
    """Mean, population covariance and a relative ridge ``ridge * trace(cov) / d``.

    When the covariance is identically zero the ridge falls back to ``ridge``
    itself so the precision still exists.
    """
    x = np.asarray(train, dtype=np.float64)
    n, d = x.shape
    if n <= d:
        raise ValueError(f"need more samples than dimensions, got {n} samples in {d} dimensions")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / n
    scale = np.trace(cov) / d
    lam = ridge * (scale if scale > 0 else 1.0)
    ridged = cov + lam * np.eye(d)
    try:
        chol = np.linalg.cholesky(ridged)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite after the ridge") from None
    inv_chol = np.linalg.solve(chol, np.eye(d))
    precision = inv_chol.T @ inv_chol
    return GaussianModel(mean, cov, lam, precision)


def mahalanobis_score(model: GaussianModel, x) -> np.ndarray | float:
    """Squared Mahalanobis distance ``(x - mean)^T precision (x - mean)``."""
    x = np.asarray(x, dtype=np.float64)
    diff = x - model.mean
    if diff.ndim == 1:
        return float(diff @ model.precision @ diff)
    return np.einsum("ij,jk,ik->i", diff, model.precision, diff)


@dataclass
class OcsvmModel:
    support_vectors: np.ndarray
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    iterations: int = 0
    kkt_gap: float = 0.0

    method = "ocsvm"

    def score(self, x) -> np.ndarray | float:
        return ocsvm_score(self, x)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alpha": self.alpha.tolist(),
            "rho": self.rho,
            "gamma": self.gamma,
            "nu": self.nu,
            "iterations": self.iterations,
            "kkt_gap": self.kkt_gap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> OcsvmModel:
        sv = np.array(d["support_vectors"], dtype=np.float64)
        return cls(
            sv.reshape(len(d["alpha"]), -1), np.array(d["alpha"], dtype=np.float64),
            float(d["rho"]), float(d["gamma"]), float(d["nu"]),
            int(d.get("iterations", 0)), float(d.get("kkt_gap", 0.0)),
        )


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def default_gamma(train) -> float:
    """``1 / (d * mean per-component variance)``, or 1/d for degenerate data."""
    x = np.asarray(train, dtype=np.float64)
    var = float(np.mean(x.var(axis=0)))
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0 / x.shape[1]


def solve_ocsvm_dual(kernel: np.ndarray, upper: float, tol: float = 1e-6, max_iter: int = 100_000):
    """Minimise ``0.5 a^T K a`` subject to ``0 <= a_i <= upper`` and ``sum a = 1``.

    Sequential minimal optimisation with maximal-violating-pair selection;
    ties go to the lowest index. Returns ``(alpha, grad, iterations, gap)``.
    """
    n = kernel.shape[0]
    if upper * n < 1.0 - 1e-12:
        raise ValueError("box constraint makes sum(alpha) = 1 infeasible")
    alpha = np.zeros(n)
    remaining = 1.0
    for i in range(n):
        alpha[i] = min(upper, remaining)
        remaining -= alpha[i]
        if remaining <= 0:
            break
    grad = kernel @ alpha

    for it in range(max_iter + 1):
        can_up = alpha < upper
        can_down = alpha > 0
        g_up = np.where(can_up, grad, np.inf)
        g_down = np.where(can_down, grad, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_down))
        gap = g_down[j] - g_up[i]
        if gap <= tol or i == j:
            return alpha, grad, it, max(float(gap), 0.0)
        if it == max_iter:
            break
        curv = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        step = gap / max(curv, 1e-12)
        step = min(step, upper - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (kernel[:, i] - kernel[:, j])
    raise ConvergenceError(f"SMO did not reach KKT gap {tol} within {max_iter} iterations (gap {gap:.3g})")


def _offset(alpha: np.ndarray, grad: np.ndarray, upper: float) -> float:
    eps = 1e-12
    free = (alpha > eps) & (alpha < upper - eps)
    if free.any():
        return float(grad[free].mean())
    # rho lies between the largest gradient at the bound and the smallest at zero
    at_upper = alpha >= upper - eps
    at_zero = alpha <= eps
    lo = grad[at_upper].max() if at_upper.any() else None
    hi = grad[at_zero].min() if at_zero.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def fit_ocsvm(train, nu: float = 0.05, gamma: float | None = None, tol: float = 1e-6, max_iter: int = 100_000) -> OcsvmModel:
    """One-class SVM with an RBF kernel, dual normalised so the weights sum to 1."""
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need at least one training vector")
    if not 0 < nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    gamma = default_gamma(x) if gamma is None else float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    n = x.shape[0]
    upper = 1.0 / (nu * n)
    kernel = rbf_kernel(x, x, gamma)
    alpha, grad, iters, gap = solve_ocsvm_dual(kernel, upper, tol, max_iter)
    rho = _offset(alpha, grad, upper)
    keep = alpha > 0
    return OcsvmModel(x[keep].copy(), alpha[keep].copy(), rho, gamma, nu, iters, gap)


def ocsvm_score(model: OcsvmModel, x) -> np.ndarray | float:
    """``rho - sum_i alpha_i k(x, sv_i)``: positive outside the learned support."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    k = rbf_kernel(np.atleast_2d(x), model.support_vectors, model.gamma)
    s = model.rho - k @ model.alpha
    return float(s[0]) if single else s


def dual_objective(kernel: np.ndarray, alpha: np.ndarray) -> float:
    return float(0.5 * alpha @ kernel @ alpha)
