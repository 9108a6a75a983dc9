"""One-class autoencoder verifier.

A small fully connected autoencoder (5 -> 4 -> 2 -> 4 -> 5, ReLU hidden units,
linear output) is trained on one artist's standardised feature vectors. The
anomaly score of a probe is its squared reconstruction error and the accept
threshold is a nearest-rank quantile of the training scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from sketchauth.features import FeatureVector, Standardiser, standardise

DEFAULT_WIDTHS = (5, 4, 2, 4, 5)
MODEL_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    max_epochs: int = 100
    patience: int = 10
    val_fraction: float = 0.2
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.val_fraction < 1:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class AutoencoderParams:
    widths: tuple[int, ...]
    weights: list[np.ndarray]  # weights[k] has shape (widths[k + 1], widths[k])
    biases: list[np.ndarray]

    method = "autoencoder"

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match widths")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[k + 1], self.widths[k]) or b.shape != (self.widths[k + 1],):
                raise ValueError(f"layer {k} has inconsistent shapes {w.shape}, {b.shape}")

    def copy(self) -> AutoencoderParams:
        return AutoencoderParams(self.widths, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, theta: np.ndarray) -> AutoencoderParams:
        out, pos = self.copy(), 0
        for a in out.arrays():
            a[...] = theta[pos : pos + a.size].reshape(a.shape)
            pos += a.size
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def score(self, x) -> np.ndarray | float:
        return reconstruction_error(self, x)

    def __eq__(self, other):
        if not isinstance(other, AutoencoderParams):
            return NotImplemented
        return self.widths == other.widths and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays())
        )

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> AutoencoderParams:
        return cls(
            tuple(d["widths"]),
            [np.array(w, dtype=np.float64).reshape(o, i) for w, i, o in zip(d["weights"], d["widths"], d["widths"][1:])],
            [np.array(b, dtype=np.float64) for b in d["biases"]],
        )


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(seed: int | np.random.Generator, widths=DEFAULT_WIDTHS) -> AutoencoderParams:
    """Glorot-uniform weights and zero biases from a seeded generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths, widths[1:]):
        bound = glorot_bound(fan_in, fan_out)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return AutoencoderParams(tuple(widths), weights, biases)


def _forward_cache(params: AutoencoderParams, x: np.ndarray):
    pre, acts = [], [x]
    a = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if k == last else np.maximum(z, 0.0)
        acts.append(a)
    return pre, acts


def forward(params: AutoencoderParams, x) -> np.ndarray:
    """Reconstruct a vector or an ``(n, d)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    return _forward_cache(params, x)[1][-1]


def reconstruction_error(params: AutoencoderParams, x) -> np.ndarray | float:
    """Squared Euclidean reconstruction error, per row for a batch."""
    x = np.asarray(x, dtype=np.float64)
    r = x - forward(params, x)
    if x.ndim == 1:
        return float(np.sum(r * r))
    return np.sum(r * r, axis=1)


def loss(params: AutoencoderParams, x: np.ndarray) -> float:
    """Mean over samples of the squared reconstruction error."""
    return float(np.mean(reconstruction_error(params, np.atleast_2d(x))))


def loss_and_grad(params: AutoencoderParams, x: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Batch loss and its gradient, ordered like ``params.arrays()``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    pre, acts = _forward_cache(params, x)
    resid = acts[-1] - x
    value = float(np.sum(resid * resid) / n)

    delta = 2.0 * resid / n
    grads: list[np.ndarray] = []
    for k in range(len(params.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))  # bias
        grads.append(delta.T @ acts[k])  # weight
        if k > 0:
            delta = (delta @ params.weights[k]) * (pre[k - 1] > 0)
    grads.reverse()
    return value, grads


class Adam:
    def __init__(self, shapes, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(
    vectors,
    cfg: TrainConfig = TrainConfig(),
    widths=DEFAULT_WIDTHS,
    history: list | None = None,
) -> AutoencoderParams:
    """Full-batch Adam with early stopping on a seeded hold-out split.

    The last ``ceil(val_fraction * n)`` vectors of a seeded shuffle are held out
    for validation. Returns the parameters with the best validation loss.
    Per-epoch ``{"epoch", "train_loss", "val_loss"}`` dicts are appended to
    ``history`` when given.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 5:
        raise ValueError(f"need at least 5 training vectors, got {x.shape[0] if x.ndim == 2 else x.ndim}")
    if x.shape[1] != widths[0]:
        raise ValueError(f"vectors have dimension {x.shape[1]}, model expects {widths[0]}")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(rng, widths)
    order = rng.permutation(x.shape[0])
    n_val = min(max(math.ceil(cfg.val_fraction * x.shape[0] - 1e-9), 1), x.shape[0] - 1)
    fit_x, val_x = x[order[:-n_val]], x[order[-n_val:]]

    opt = Adam([a.shape for a in params.arrays()], cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    best, best_val = params.copy(), loss(params, val_x)
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        train_loss, grads = loss_and_grad(params, fit_x)
        if not math.isfinite(train_loss):
            raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
        opt.step(params.arrays(), grads)
        val = loss(params, val_x)
        if not math.isfinite(val):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        if history is not None:
            history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val})
        if val < best_val:
            best, best_val, stale = params.copy(), val, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best


def calibrate_threshold(errors, q: float) -> float:
    """Nearest-rank quantile: the ``ceil(q * n)``-th smallest error."""
    e = np.sort(np.asarray(errors, dtype=np.float64).ravel())
    if e.size == 0:
        raise ValueError("cannot calibrate a threshold from no errors")
    if not 0 < q <= 1:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    # the guard keeps products like 0.9 * 20 = 18.000000000000004 on rank 18
    rank = min(max(math.ceil(q * e.size - 1e-9), 1), e.size)
    return float(e[rank - 1])


@dataclass(frozen=True)
class Decision:
    accepted: bool
    score: float
    threshold: float


@dataclass
class VerifierModel:
    """A fitted per-artist scorer with its standardiser and accept threshold.

    ``scorer`` is any object with ``score(x)`` on standardised vectors where a
    higher value means more anomalous.
    """

    artist_id: str
    scorer: object
    standardiser: Standardiser
    threshold: float
    q: float
    training_errors: list[float]
    seed: int | None = None
    hyperparams: dict = field(default_factory=dict)

    @property
    def method(self) -> str:
        return self.scorer.method

    def scores(self, features) -> np.ndarray:
        x = standardise(np.atleast_2d(_raw(features)), self.standardiser)
        return np.atleast_1d(self.scorer.score(x))

    def recalibrated(self, q: float) -> VerifierModel:
        return VerifierModel(
            self.artist_id, self.scorer, self.standardiser,
            calibrate_threshold(self.training_errors, q), q,
            list(self.training_errors), self.seed, dict(self.hyperparams),
        )

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "method": self.method,
            "artist_id": self.artist_id,
            "seed": self.seed,
            "q": self.q,
            "threshold": self.threshold,
            "training_errors": list(self.training_errors),
            "hyperparams": self.hyperparams,
            "standardiser": self.standardiser.to_dict(),
            "model": self.scorer.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> VerifierModel:
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
        scorer_cls = scorer_registry().get(d["method"])
        if scorer_cls is None:
            raise ValueError(f"unknown method {d['method']!r}")
        return cls(
            artist_id=d["artist_id"],
            scorer=scorer_cls.from_dict(d["model"]),
            standardiser=Standardiser.from_dict(d["standardiser"]),
            threshold=float(d["threshold"]),
            q=float(d["q"]),
            training_errors=[float(v) for v in d["training_errors"]],
            seed=d.get("seed"),
            hyperparams=dict(d.get("hyperparams", {})),
        )

    @classmethod
    def loads(cls, text: str) -> VerifierModel:
        return cls.from_dict(json.loads(text))


def scorer_registry() -> dict[str, type]:
    from sketchauth.baselines import GaussianModel, OcsvmModel

    return {"autoencoder": AutoencoderParams, "mahalanobis": GaussianModel, "ocsvm": OcsvmModel}


def _raw(features) -> np.ndarray:
    if isinstance(features, FeatureVector):
        return features.as_array()
    if isinstance(features, (list, tuple)) and features and isinstance(features[0], FeatureVector):
        return np.vstack([f.as_array() for f in features])
    return np.asarray(features, dtype=np.float64)


def verify(model: VerifierModel, f) -> Decision:
    """Standardise ``f`` with the model's own statistics, score it, compare to the threshold."""
    score = float(model.scores(f)[0])
    return Decision(accepted=score <= model.threshold, score=score, threshold=model.threshold)


def calibrated_model(
    artist_id: str,
    scorer,
    standardiser: Standardiser,
    train_x: np.ndarray,
    q: float,
    seed: int | None = None,
    hyperparams: dict | None = None,
) -> VerifierModel:
    """Attach a threshold computed from the scorer's scores on all training vectors."""
    errors = [float(v) for v in np.atleast_1d(scorer.score(train_x))]
    return VerifierModel(
        artist_id, scorer, standardiser, calibrate_threshold(errors, q), q, errors, seed, dict(hyperparams or {})
    )


def fit_autoencoder_verifier(
    artist_id: str,
    train_features,
    cfg: TrainConfig = TrainConfig(),
    q: float = 0.95,
    sigma_floor: float | None = None,
) -> VerifierModel:
    from sketchauth.features import DEFAULT_SIGMA_FLOOR, fit_standardiser

    raw = _raw(list(train_features))
    std = fit_standardiser(raw, DEFAULT_SIGMA_FLOOR if sigma_floor is None else sigma_floor)
    x = standardise(raw, std)
    params = train(x, cfg)
    hyper = {
        "learning_rate": cfg.learning_rate, "max_epochs": cfg.max_epochs, "patience": cfg.patience,
        "val_fraction": cfg.val_fraction, "widths": list(params.widths),
    }
    return calibrated_model(artist_id, params, std, x, q, cfg.seed, hyper)
