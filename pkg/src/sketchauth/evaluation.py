"""Genuine/impostor trial design and biometric metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sketchauth.ingest import DatasetManifest
from sketchauth.verifier import VerifierModel

Z95 = 1.96
DEFAULT_Q_GRID = (0.90, 0.95, 0.99)


@dataclass(frozen=True)
class Trial:
    target: str
    source: str
    image_id: str

    @property
    def genuine(self) -> bool:
        return self.target == self.source


@dataclass(frozen=True)
class TrialSet:
    target: str
    genuine: tuple[Trial, ...]
    impostor: tuple[Trial, ...]

    @property
    def trials(self) -> tuple[Trial, ...]:
        return self.genuine + self.impostor


@dataclass(frozen=True)
class TrialDecision:
    target: str
    source: str
    image_id: str
    score: float
    threshold: float
    accepted: bool

    @property
    def genuine(self) -> bool:
        return self.target == self.source


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n_genuine(self) -> int:
        return self.tp + self.fn

    @property
    def n_impostor(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fn + other.fn, self.fp + other.fp, self.tn + other.tn)

    @classmethod
    def from_decisions(cls, decisions) -> ConfusionCounts:
        tp = fn = fp = tn = 0
        for d in decisions:
            if d.genuine:
                tp, fn = (tp + 1, fn) if d.accepted else (tp, fn + 1)
            else:
                fp, tn = (fp + 1, tn) if d.accepted else (fp, tn + 1)
        return cls(tp, fn, fp, tn)


@dataclass(frozen=True)
class WilsonInterval:
    estimate: float
    lower: float
    upper: float
    x: int
    n: int
    z: float = Z95


def wilson_interval(x: int, n: int, z: float = Z95) -> WilsonInterval:
    """Wilson score interval for ``x`` successes in ``n`` trials."""
    if n < 1:
        raise ValueError("wilson_interval needs n >= 1")
    if not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    p = x / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = p + z2 / (2.0 * n)
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    lower = min(max((centre - half) / denom, 0.0), p)
    upper = max(min((centre + half) / denom, 1.0), p)
    return WilsonInterval(p, lower, upper, x, n, z)


def _ratio(num: float, den: float) -> float:
    return num / den if den else math.nan


@dataclass(frozen=True)
class BiometricMetrics:
    counts: ConfusionCounts
    far: float
    frr: float
    tar: float
    specificity: float
    accuracy: float
    balanced_accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    far_ci: WilsonInterval
    frr_ci: WilsonInterval
    tar_ci: WilsonInterval
    specificity_ci: WilsonInterval
    accuracy_ci: WilsonInterval
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def ci(w: WilsonInterval) -> dict:
            return {"estimate": w.estimate, "lower": w.lower, "upper": w.upper, "x": w.x, "n": w.n, "z": w.z}

        c = self.counts
        return {
            "counts": {"tp": c.tp, "fn": c.fn, "fp": c.fp, "tn": c.tn,
                       "n_genuine": c.n_genuine, "n_impostor": c.n_impostor},
            "far": self.far, "frr": self.frr, "tar": self.tar,
            "specificity": self.specificity, "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "precision": self.precision, "recall": self.recall, "f1": self.f1, "mcc": self.mcc,
            "intervals": {"far": ci(self.far_ci), "frr": ci(self.frr_ci), "tar": ci(self.tar_ci),
                          "specificity": ci(self.specificity_ci), "accuracy": ci(self.accuracy_ci)},
            "flags": list(self.flags),
        }


def compute_metrics(c: ConfusionCounts, z: float = Z95) -> BiometricMetrics:
    """All rate, classical and interval metrics from one confusion matrix.

    Undefined quantities are reported as 0 with an entry in ``flags`` rather
    than raising.
    """
    if c.n_genuine == 0 or c.n_impostor == 0:
        raise ValueError("need at least one genuine and one impostor trial")
    flags = []
    far = c.fp / c.n_impostor
    frr = c.fn / c.n_genuine
    tar = c.tp / c.n_genuine
    spec = c.tn / c.n_impostor
    acc = (c.tp + c.tn) / c.total
    precision = _ratio(c.tp, c.tp + c.fp)
    if math.isnan(precision):
        precision = 0.0
        flags.append("precision_undefined")
    f1 = _ratio(2 * precision * tar, precision + tar)
    if math.isnan(f1):
        f1 = 0.0
        flags.append("f1_undefined")
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        mcc = 0.0
        flags.append("mcc_degenerate")
    else:
        mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)
    return BiometricMetrics(
        counts=c, far=far, frr=frr, tar=tar, specificity=spec, accuracy=acc,
        balanced_accuracy=0.5 * (tar + spec), precision=precision, recall=tar, f1=f1, mcc=mcc,
        far_ci=wilson_interval(c.fp, c.n_impostor, z),
        frr_ci=wilson_interval(c.fn, c.n_genuine, z),
        tar_ci=wilson_interval(c.tp, c.n_genuine, z),
        specificity_ci=wilson_interval(c.tn, c.n_impostor, z),
        accuracy_ci=wilson_interval(c.tp + c.tn, c.total, z),
        flags=tuple(flags),
    )


def build_trials(manifest: DatasetManifest, target: str) -> TrialSet:
    """Genuine trials are the target's test images; impostors are every other artist's."""
    if target not in manifest.artist_ids:
        raise KeyError(f"unknown artist {target!r}")
    genuine, impostor = [], []
    for artist in manifest.artists:
        tests = artist.split("test")
        if len(tests) != manifest.n_test:
            raise ValueError(f"artist {artist.artist_id!r} has {len(tests)} test images, expected {manifest.n_test}")
        trials = [Trial(target, artist.artist_id, e.image_id) for e in tests]
        (genuine if artist.artist_id == target else impostor).extend(trials)
    return TrialSet(target, tuple(genuine), tuple(impostor))


FeatureLookup = Mapping[tuple[str, str], object]


def run_trials(
    model: VerifierModel, trials: TrialSet, features: FeatureLookup
) -> tuple[list[TrialDecision], ConfusionCounts]:
    """Score every probe with ``model`` and tally the outcomes.

    ``features`` maps ``(artist_id, image_id)`` to a feature vector.
    """
    probes = trials.trials
    missing = [t for t in probes if (t.source, t.image_id) not in features]
    if missing:
        names = ", ".join(f"{t.source}/{t.image_id}" for t in missing[:5])
        raise KeyError(f"no features for {len(missing)} probe(s): {names}")
    scores = model.scores([features[(t.source, t.image_id)] for t in probes])
    decisions = [
        TrialDecision(t.target, t.source, t.image_id, float(s), model.threshold, bool(s <= model.threshold))
        for t, s in zip(probes, scores)
    ]
    return decisions, ConfusionCounts.from_decisions(decisions)


def pool(counts: Sequence[ConfusionCounts]) -> ConfusionCounts:
    total = ConfusionCounts()
    for c in counts:
        total = total + c
    return total


@dataclass(frozen=True)
class PairwiseAttribution:
    artists: tuple[str, ...]
    counts: np.ndarray  # counts[target, source]; diagonal is zero and meaningless

    def row_sums(self) -> dict[str, int]:
        return {a: int(self.counts[k].sum()) for k, a in enumerate(self.artists)}

    def get(self, target: str, source: str) -> int:
        return int(self.counts[self.artists.index(target), self.artists.index(source)])


def attribute_false_accepts(decisions: Sequence[TrialDecision], artists: Sequence[str] | None = None) -> PairwiseAttribution:
    """Count accepted impostor probes per (target verifier, true source artist)."""
    if artists is None:
        seen: dict[str, None] = {}
        for d in decisions:
            seen.setdefault(d.target, None)
            seen.setdefault(d.source, None)
        artists = list(seen)
    artists = tuple(artists)
    index = {a: k for k, a in enumerate(artists)}
    mat = np.zeros((len(artists), len(artists)), dtype=np.int64)
    fp: dict[str, int] = {a: 0 for a in artists}
    for d in decisions:
        if d.target not in index or d.source not in index:
            raise ValueError(f"decision labelled with unknown artist: {d.target!r} / {d.source!r}")
        if d.accepted and not d.genuine:
            mat[index[d.target], index[d.source]] += 1
            fp[d.target] += 1
    result = PairwiseAttribution(artists, mat)
    if result.row_sums() != fp:
        raise AssertionError("attribution rows do not reconcile with false-accept counts")
    return result


@dataclass(frozen=True)
class SensitivityRow:
    q: float
    far: float
    tar: float
    counts: ConfusionCounts


@dataclass(frozen=True)
class SensitivityReport:
    rows: tuple[SensitivityRow, ...]
    thresholds: dict[str, tuple[float, ...]] = field(default_factory=dict)


def q_sweep(
    models: Mapping[str, VerifierModel],
    trials: Mapping[str, TrialSet],
    features: FeatureLookup,
    qs: Sequence[float] = DEFAULT_Q_GRID,
) -> SensitivityReport:
    """Recalibrate every model at each ``q`` from its stored training scores and re-run the trials."""
    rows = []
    thresholds: dict[str, list[float]] = {a: [] for a in models}
    for q in qs:
        per_target = []
        for artist_id, model in models.items():
            m = model.recalibrated(q)
            thresholds[artist_id].append(m.threshold)
            per_target.append(run_trials(m, trials[artist_id], features)[1])
        c = pool(per_target)
        rows.append(SensitivityRow(q, c.fp / c.n_impostor, c.tp / c.n_genuine, c))
    return SensitivityReport(tuple(rows), {a: tuple(t) for a, t in thresholds.items()})


@dataclass
class EvaluationResult:
    method: str
    artists: tuple[str, ...]
    decisions: list[TrialDecision]
    per_artist: dict[str, ConfusionCounts]
    pooled: ConfusionCounts
    attribution: PairwiseAttribution
    sensitivity: SensitivityReport | None = None

    def metrics(self) -> tuple[BiometricMetrics, dict[str, BiometricMetrics]]:
        return compute_metrics(self.pooled), {a: compute_metrics(c) for a, c in self.per_artist.items()}


def summarise_decisions(method: str, decisions: Sequence[TrialDecision], artists: Sequence[str] | None = None) -> EvaluationResult:
    """Per-target and pooled counts plus attribution from a decision log."""
    attribution = attribute_false_accepts(decisions, artists)
    per_artist = {}
    for a in attribution.artists:
        rows = [d for d in decisions if d.target == a]
        if rows:
            per_artist[a] = ConfusionCounts.from_decisions(rows)
    return EvaluationResult(
        method, attribution.artists, list(decisions), per_artist, pool(per_artist.values()), attribution
    )


def evaluate_models(
    manifest: DatasetManifest,
    models: Mapping[str, VerifierModel],
    features: FeatureLookup,
    qs: Sequence[float] | None = None,
) -> EvaluationResult:
    """Run every target's trials, pool the counts and optionally sweep ``q``."""
    trials = {a: build_trials(manifest, a) for a in manifest.artist_ids}
    decisions: list[TrialDecision] = []
    methods = {m.method for m in models.values()}
    if len(methods) != 1:
        raise ValueError(f"models mix methods {sorted(methods)}")
    for artist_id in manifest.artist_ids:
        if artist_id not in models:
            raise KeyError(f"no model for artist {artist_id!r}")
        decisions.extend(run_trials(models[artist_id], trials[artist_id], features)[0])
    result = summarise_decisions(methods.pop(), decisions, manifest.artist_ids)
    if qs:
        result.sensitivity = q_sweep({a: models[a] for a in manifest.artist_ids}, trials, features, qs)
    return result
