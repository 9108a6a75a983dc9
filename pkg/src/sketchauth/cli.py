"""Command-line entry point.

    sketchauth extract  --manifest M --out RUN
    sketchauth train    --manifest M --out RUN [--methods all] [--q 0.95] [--seed 0]
    sketchauth evaluate --manifest M --out RUN [--q-sweep]
    sketchauth report   --out RUN [--manifest M]
    sketchauth report   --decisions log.csv --out DIR      # external decision log
    sketchauth run      --manifest M --out RUN             # extract + train + evaluate
    sketchauth synth    --out DIR                          # synthetic demo corpus

Exit status: 0 on success, 1 for invalid input, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from sketchauth import __version__
from sketchauth.baselines import ConvergenceError
from sketchauth.config import ConfigError, RunConfig, derive_seed, load_config
from sketchauth.evaluation import DEFAULT_Q_GRID
from sketchauth.ingest import DatasetManifest, ImageLoadError, ManifestError, read_manifest
from sketchauth.pipeline import (
    ExtractionError,
    MissingArtefactError,
    evaluate_all,
    extract_manifest,
    fit_all,
    load_models,
    manifest_digest,
    read_features,
    save_models,
    write_features,
)
from sketchauth.reports import DECISION_COLUMNS, read_sensitivity, result_from_decisions, write_bundle
from sketchauth.verifier import TrainingDivergedError

log = logging.getLogger("sketchauth")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _config(args) -> RunConfig:
    return load_config(
        getattr(args, "config", None),
        {"q": getattr(args, "q", None), "seed": getattr(args, "seed", None), "methods": getattr(args, "methods", None)},
    )


def _manifest(args) -> DatasetManifest:
    if not args.manifest:
        raise ConfigError("--manifest is required for this command")
    return read_manifest(args.manifest)


def _names(manifest: DatasetManifest | None) -> dict[str, str]:
    return {a.artist_id: a.display_name for a in manifest.artists} if manifest else {}


def cmd_extract(args) -> int:
    cfg = _config(args)
    manifest = _manifest(args)
    records = extract_manifest(manifest, cfg.canny, cfg.glcm, args.cache_dir, args.fetch, args.workers)
    path = write_features(records, args.out)
    n_edgeless = sum(r.features.edgeless for r in records)
    print(f"wrote {len(records)} feature rows to {path}" + (f" ({n_edgeless} edgeless)" if n_edgeless else ""))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    manifest = _manifest(args)
    records = read_features(Path(args.out) / "features.csv")
    models = fit_all(manifest, records, cfg)
    paths = save_models(models, args.out)
    print(f"wrote {len(paths)} model files under {Path(args.out) / 'models'}")
    return EXIT_OK


def run_meta(cfg: RunConfig, manifest: DatasetManifest, manifest_path, method: str, records, qs) -> dict:
    return {
        "package_version": __version__,
        "method": method,
        "q": cfg.q,
        "seed": cfg.seed,
        "artist_seeds": {a: derive_seed(cfg.seed, a) for a in manifest.artist_ids},
        "config": cfg.to_dict(),
        "q_sweep": list(qs) if qs else None,
        "manifest_sha256": manifest_digest(manifest_path),
        "manifest_version": manifest.version,
        "n_artists": len(manifest.artists),
        "artists": [[a.artist_id, a.display_name] for a in manifest.artists],
        "n_train": manifest.n_train,
        "n_test": manifest.n_test,
        "edgeless_images": [f"{r.artist_id}/{r.image_id}" for r in records if r.features.edgeless],
    }


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    manifest = _manifest(args)
    records = read_features(Path(args.out) / "features.csv")
    models = load_models(manifest, args.out, cfg.methods)
    qs = DEFAULT_Q_GRID if args.q_sweep else None
    results = evaluate_all(manifest, models, records, qs)
    for method, result in results.items():
        out = Path(args.out) / "reports" / method
        write_bundle(result, out, _names(manifest), run_meta(cfg, manifest, args.manifest, method, records, qs))
        pooled, _ = result.metrics()
        print(f"{method}: TAR {pooled.tar:.3f} FAR {pooled.far:.3f} MCC {pooled.mcc:.3f} -> {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    for step in (cmd_extract, cmd_train, cmd_evaluate):
        step(args)
    return EXIT_OK


def cmd_report(args) -> int:
    from sketchauth.plotting import render_figures

    manifest = read_manifest(args.manifest) if args.manifest else None
    names = _names(manifest)
    artists = manifest.artist_ids if manifest else None
    if args.decisions:
        targets = [(args.method or "external", Path(args.decisions), Path(args.out))]
    else:
        root = Path(args.out) / "reports"
        found = sorted(p for p in root.glob("*/decisions.csv")) if root.is_dir() else []
        if not found:
            raise MissingArtefactError(f"no decision logs under {root}; run 'evaluate' first")
        targets = [(p.parent.name, p, p.parent) for p in found]

    for method, log_path, out in targets:
        if not log_path.is_file():
            raise MissingArtefactError(f"decision log {log_path} not found")
        names_here, artists_here = names, artists
        if manifest is None and (out / "run_meta.json").is_file():
            recorded = json.loads((out / "run_meta.json").read_text(encoding="utf-8")).get("artists")
            if recorded:
                names_here = dict(recorded)
                artists_here = [a for a, _ in recorded]
        result = result_from_decisions(log_path, method, artists_here)
        if (out / "sensitivity.csv").is_file():
            result.sensitivity = read_sensitivity(out / "sensitivity.csv")
        # sensitivity.csv and run_meta.json from 'evaluate' are left untouched
        write_bundle(result, out, names_here)
        figures = [] if args.no_figures else render_figures(result, out / "figures", names_here)
        pooled, _ = result.metrics()
        print(f"{method}: {pooled.counts.total} decisions, TAR {pooled.tar:.3f} FAR {pooled.far:.3f} "
              f"MCC {pooled.mcc:.3f}; {len(figures)} figure(s) -> {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from sketchauth.synthetic import make_corpus

    path = make_corpus(args.out, args.artists, args.n_train, args.n_test, args.seed, args.size)
    print(f"wrote synthetic corpus manifest {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchauth", description="One-class verification of drawings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="dataset manifest (JSON)")
    common.add_argument("--out", required=True, help="run directory")
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--q", type=float, help="threshold quantile (default 0.95)")
    common.add_argument("--seed", type=int, help="top-level random seed (default 0)")
    common.add_argument("--methods", help="comma list of autoencoder,mahalanobis,ocsvm or 'all'")

    fetch = argparse.ArgumentParser(add_help=False)
    fetch.add_argument("--cache-dir", help="image cache directory")
    fetch.add_argument("--fetch", action="store_true", help="download images missing locally from source_url")
    fetch.add_argument("--workers", type=int, default=1, help="parallel extraction workers")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--q-sweep", action="store_true", help="also report q in {0.90, 0.95, 0.99}")

    p = sub.add_parser("extract", parents=[common, fetch], help="compute feature vectors")
    p.set_defaults(func=cmd_extract)
    p = sub.add_parser("train", parents=[common], help="fit per-artist verifiers")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("evaluate", parents=[common, sweep], help="run genuine/impostor trials")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("run", parents=[common, fetch, sweep], help="extract, train and evaluate")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="rebuild tables and render figures from decision logs")
    p.add_argument("--out", required=True, help="run directory, or output directory with --decisions")
    p.add_argument("--manifest", help="manifest for artist order and display names")
    p.add_argument("--decisions", help=f"external decision log with columns {','.join(DECISION_COLUMNS)}")
    p.add_argument("--method", help="method label for an external decision log")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--artists", type=int, default=10)
    p.add_argument("--n-train", type=int, default=20)
    p.add_argument("--n-test", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ManifestError, MissingArtefactError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ExtractionError, ImageLoadError, TrainingDivergedError, ConvergenceError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
