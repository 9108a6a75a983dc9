"""Report bundle: delimited tables and JSON summaries for one method.

Files written into the bundle directory::

    metrics_pooled.json        full-precision pooled metrics and Wilson intervals
    metrics_per_artist.csv     rates in percent (1 dp), classical metrics (3 dp)
    confusion_per_artist.csv   TP/FN/FP/TN, accuracy, MCC, plus a pooled row
    pairwise_attribution.csv   target x source false-accept counts, '---' diagonal
    sensitivity.csv            pooled FAR/TAR per threshold quantile (if swept)
    decisions.csv              one row per trial; input to ``report``
    run_meta.json              seeds, hyperparameters, manifest digest
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Sequence

from sketchauth.evaluation import (
    BiometricMetrics,
    ConfusionCounts,
    EvaluationResult,
    SensitivityReport,
    SensitivityRow,
    TrialDecision,
    compute_metrics,
    summarise_decisions,
)

DECISION_COLUMNS = ("target", "source", "image_id", "genuine", "score", "threshold", "accepted")


def pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def dec3(x: float) -> str:
    return f"{x:.3f}"


def _csv(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def decisions_csv(decisions: Sequence[TrialDecision]) -> str:
    rows = [DECISION_COLUMNS]
    for d in decisions:
        rows.append((d.target, d.source, d.image_id, int(d.genuine),
                     format(d.score, ".17g"), format(d.threshold, ".17g"), int(d.accepted)))
    return _csv(rows)


def read_decisions(path: str | Path) -> list[TrialDecision]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(DECISION_COLUMNS) - set(reader.fieldnames or ())
        missing.discard("genuine")
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row in reader:
            d = TrialDecision(row["target"], row["source"], row["image_id"], float(row["score"]),
                              float(row["threshold"]), row["accepted"].strip() in ("1", "true", "True"))
            if "genuine" in row and row["genuine"] not in (None, ""):
                if (row["genuine"].strip() in ("1", "true", "True")) != d.genuine:
                    raise ValueError(f"{path}: genuine flag disagrees with labels for {d.target}/{d.image_id}")
            out.append(d)
        return out


_RATE_FIELDS = ("far", "frr", "tar", "specificity", "accuracy")


def per_artist_csv(per_artist: Mapping[str, BiometricMetrics], names: Mapping[str, str]) -> str:
    header = ["artist_id", "display_name", "n_genuine", "n_impostor"]
    for f in _RATE_FIELDS:
        header += [f"{f}_pct", f"{f}_ci_low_pct", f"{f}_ci_high_pct"]
    header += ["balanced_accuracy", "precision", "recall", "f1", "mcc", "flags"]
    rows = [header]
    for a, m in per_artist.items():
        row = [a, names.get(a, a), m.counts.n_genuine, m.counts.n_impostor]
        for f in _RATE_FIELDS:
            ci = getattr(m, f"{f}_ci")
            row += [pct(getattr(m, f)), pct(ci.lower), pct(ci.upper)]
        row += [dec3(m.balanced_accuracy), dec3(m.precision), dec3(m.recall), dec3(m.f1), dec3(m.mcc), ";".join(m.flags)]
        rows.append(row)
    return _csv(rows)


def confusion_csv(per_artist: Mapping[str, ConfusionCounts], names: Mapping[str, str], pooled: ConfusionCounts) -> str:
    rows = [("artist_id", "display_name", "tp", "fn", "fp", "tn", "accuracy_pct", "mcc")]
    for a, c in list(per_artist.items()) + [("pooled", pooled)]:
        m = compute_metrics(c)
        rows.append((a, names.get(a, "Pooled" if a == "pooled" else a), c.tp, c.fn, c.fp, c.tn, pct(m.accuracy), dec3(m.mcc)))
    return _csv(rows)


def attribution_csv(result: EvaluationResult) -> str:
    att = result.attribution
    rows = [("target\\source", *att.artists)]
    for i, t in enumerate(att.artists):
        rows.append((t, *("---" if i == j else int(att.counts[i, j]) for j in range(len(att.artists)))))
    return _csv(rows)


def sensitivity_csv(result: EvaluationResult) -> str:
    rows = [("q", "far", "tar", "tp", "fn", "fp", "tn")]
    for r in result.sensitivity.rows:
        c = r.counts
        rows.append((f"{r.q:.2f}", f"{r.far:.3f}", f"{r.tar:.3f}", c.tp, c.fn, c.fp, c.tn))
    return _csv(rows)


def bundle_files(result: EvaluationResult, names: Mapping[str, str] | None = None, meta: dict | None = None) -> dict[str, str]:
    """Render every bundle file to text, keyed by file name."""
    names = dict(names or {})
    pooled, per_artist = result.metrics()
    files = {
        "metrics_pooled.json": _json({
            "method": result.method,
            "n_decisions": result.pooled.total,
            "n_artists": len(result.artists),
            "pooled": pooled.to_dict(),
            "per_artist": {a: m.to_dict() for a, m in per_artist.items()},
        }),
        "metrics_per_artist.csv": per_artist_csv(per_artist, names),
        "confusion_per_artist.csv": confusion_csv(result.per_artist, names, result.pooled),
        "pairwise_attribution.csv": attribution_csv(result),
        "decisions.csv": decisions_csv(result.decisions),
    }
    if result.sensitivity is not None:
        files["sensitivity.csv"] = sensitivity_csv(result)
    if meta is not None:
        files["run_meta.json"] = _json(meta)
    return files


def write_bundle(result: EvaluationResult, out_dir: str | Path, names=None, meta=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in bundle_files(result, names, meta).items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths


def result_from_decisions(path: str | Path, method: str = "unknown", artists: Sequence[str] | None = None) -> EvaluationResult:
    """Rebuild counts and attribution from a decision log."""
    return summarise_decisions(method, read_decisions(path), artists)


def read_sensitivity(path: str | Path) -> SensitivityReport:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = []
        for r in csv.DictReader(fh):
            c = ConfusionCounts(int(r["tp"]), int(r["fn"]), int(r["fp"]), int(r["tn"]))
            rows.append(SensitivityRow(float(r["q"]), c.fp / c.n_impostor, c.tp / c.n_genuine, c))
    return SensitivityReport(tuple(rows))
