"""End-to-end stages: extract features, fit verifiers, run the trial protocol.

Every stage reads and writes plain files so it can be rerun on its own:

    <out>/features.csv, features.json
    <out>/models/<method>/<artist_id>.json
    <out>/reports/<method>/...          (see ``sketchauth.reports``)
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from sketchauth.baselines import default_gamma, fit_gaussian, fit_ocsvm
from sketchauth.config import RunConfig, derive_seed
from sketchauth.evaluation import EvaluationResult, evaluate_models
from sketchauth.features import FEATURE_NAMES, FeatureVector, GlcmParams, extract_features, fit_standardiser, standardise
from sketchauth.imgproc import CannyParams
from sketchauth.ingest import DatasetManifest, ImageEntry, ImageLoadError, load_image
from sketchauth.verifier import VerifierModel, calibrated_model, fit_autoencoder_verifier

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ("image_id", "artist_id", "split", *FEATURE_NAMES, "edgeless")


class ExtractionError(RuntimeError):
    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures
        lines = "\n".join(f"  {image_id}: {msg}" for image_id, msg in failures)
        super().__init__(f"{len(failures)} image(s) failed:\n{lines}")


class MissingArtefactError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class FeatureRecord:
    artist_id: str
    image_id: str
    split: str
    features: FeatureVector

    @property
    def key(self) -> tuple[str, str]:
        return (self.artist_id, self.image_id)


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


# -- extraction -----------------------------------------------------------------


def _extract_one(args) -> tuple[str, FeatureVector | None, str | None]:
    entry, base_dir, cache_dir, fetch, canny_params, glcm_params = args
    try:
        rgb = load_image(entry, cache_dir, base_dir=base_dir, fetch=fetch)
        return entry.image_id, extract_features(rgb, canny_params, glcm_params), None
    except (ImageLoadError, ValueError) as exc:
        return entry.image_id, None, str(exc)


def extract_manifest(
    manifest: DatasetManifest,
    canny_params: CannyParams = CannyParams(),
    glcm_params: GlcmParams = GlcmParams(),
    cache_dir: str | Path | None = None,
    fetch: bool = False,
    workers: int = 1,
) -> list[FeatureRecord]:
    """Feature vectors for every image, in manifest order.

    All failures are collected and raised together as :class:`ExtractionError`.
    """
    pairs = list(manifest.iter_images())
    jobs = [(e, manifest.base_dir, cache_dir, fetch, canny_params, glcm_params) for _, e in pairs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=4))
    else:
        results = [_extract_one(j) for j in jobs]

    records, failures = [], []
    for (artist, entry), (image_id, fv, err) in zip(pairs, results):
        if err is not None:
            failures.append((f"{artist.artist_id}/{image_id}", err))
        else:
            records.append(FeatureRecord(artist.artist_id, entry.image_id, entry.split, fv))
    if failures:
        raise ExtractionError(failures)
    return records


def features_csv(records: list[FeatureRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_COLUMNS)
    for r in records:
        w.writerow([r.image_id, r.artist_id, r.split, *(fmt(v) for v in r.features.as_array()), int(r.features.edgeless)])
    return buf.getvalue()


def features_json(records: list[FeatureRecord]) -> str:
    rows = [
        {"image_id": r.image_id, "artist_id": r.artist_id, "split": r.split,
         **dict(zip(FEATURE_NAMES, r.features.as_array().tolist())), "edgeless": r.features.edgeless}
        for r in records
    ]
    return json.dumps(rows, indent=1) + "\n"


def write_features(records: list[FeatureRecord], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "features.csv").write_text(features_csv(records), encoding="utf-8")
    (out / "features.json").write_text(features_json(records), encoding="utf-8")
    return out / "features.csv"


def read_features(path: str | Path) -> list[FeatureRecord]:
    path = Path(path)
    if not path.is_file():
        raise MissingArtefactError(f"features file {path} not found; run 'extract' first")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FEATURE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            FeatureRecord(
                row["artist_id"], row["image_id"], row["split"],
                FeatureVector.from_array([float(row[n]) for n in FEATURE_NAMES], edgeless=row["edgeless"] == "1"),
            )
            for row in reader
        ]


def feature_lookup(records: list[FeatureRecord]) -> dict[tuple[str, str], FeatureVector]:
    return {r.key: r.features for r in records}


# -- training -------------------------------------------------------------------


def train_matrix(manifest: DatasetManifest, lookup, artist_id: str) -> np.ndarray:
    artist = manifest.artist(artist_id)
    missing = [e.image_id for e in artist.split("train") if (artist_id, e.image_id) not in lookup]
    if missing:
        raise MissingArtefactError(f"artist {artist_id!r}: no features for training images {missing}")
    return np.vstack([lookup[(artist_id, e.image_id)].as_array() for e in artist.split("train")])


def fit_verifier(method: str, artist_id: str, raw_train: np.ndarray, cfg: RunConfig) -> VerifierModel:
    seed = derive_seed(cfg.seed, artist_id)
    if method == "autoencoder":
        return fit_autoencoder_verifier(artist_id, raw_train, replace(cfg.train, seed=seed), cfg.q, cfg.sigma_floor)
    std = fit_standardiser(raw_train, cfg.sigma_floor)
    x = standardise(raw_train, std)
    b = cfg.baselines
    if method == "mahalanobis":
        return calibrated_model(artist_id, fit_gaussian(x, b.ridge), std, x, cfg.q, seed, {"ridge": b.ridge})
    if method == "ocsvm":
        gamma = default_gamma(x) if b.gamma is None else b.gamma
        return calibrated_model(artist_id, fit_ocsvm(x, b.nu, gamma), std, x, cfg.q, seed, {"nu": b.nu, "gamma": gamma})
    raise ValueError(f"unknown method {method!r}")


def fit_all(manifest: DatasetManifest, records: list[FeatureRecord], cfg: RunConfig) -> dict[str, dict[str, VerifierModel]]:
    lookup = feature_lookup(records)
    models: dict[str, dict[str, VerifierModel]] = {}
    for method in cfg.methods:
        models[method] = {}
        for artist_id in manifest.artist_ids:
            models[method][artist_id] = fit_verifier(method, artist_id, train_matrix(manifest, lookup, artist_id), cfg)
            log.info("fitted %s for %s (threshold %.6g)", method, artist_id, models[method][artist_id].threshold)
    return models


def _safe_name(artist_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", artist_id)


def save_models(models: dict[str, dict[str, VerifierModel]], out_dir: str | Path) -> list[Path]:
    paths = []
    for method, per_artist in models.items():
        d = Path(out_dir) / "models" / method
        d.mkdir(parents=True, exist_ok=True)
        for artist_id, model in per_artist.items():
            p = d / f"{_safe_name(artist_id)}.json"
            p.write_text(model.dumps(), encoding="utf-8")
            paths.append(p)
    return paths


def load_models(manifest: DatasetManifest, out_dir: str | Path, methods) -> dict[str, dict[str, VerifierModel]]:
    models: dict[str, dict[str, VerifierModel]] = {}
    for method in methods:
        d = Path(out_dir) / "models" / method
        models[method] = {}
        for artist_id in manifest.artist_ids:
            p = d / f"{_safe_name(artist_id)}.json"
            if not p.is_file():
                raise MissingArtefactError(f"model {p} not found; run 'train' first")
            model = VerifierModel.loads(p.read_text(encoding="utf-8"))
            if model.artist_id != artist_id or model.method != method:
                raise ValueError(f"{p} holds a {model.method} model for {model.artist_id!r}")
            models[method][artist_id] = model
    return models


# -- evaluation -------------------------------------------------------------------


def evaluate_all(
    manifest: DatasetManifest,
    models: dict[str, dict[str, VerifierModel]],
    records: list[FeatureRecord],
    qs=None,
) -> dict[str, EvaluationResult]:
    lookup = feature_lookup(records)
    return {method: evaluate_models(manifest, per_artist, lookup, qs) for method, per_artist in models.items()}


def manifest_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
