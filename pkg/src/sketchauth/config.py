"""Run configuration: INI file plus command-line overrides.

Example file::

    [run]
    q = 0.95
    seed = 0
    methods = autoencoder, mahalanobis, ocsvm

    [canny]
    sigma = 1.0
    t_low = 0.10
    t_high = 0.20

    [glcm]
    levels = 64
    distance = 1

    [train]
    learning_rate = 0.001
    max_epochs = 100
    patience = 10
    val_fraction = 0.2

    [baselines]
    ridge = 1e-6
    nu = 0.05
    gamma = auto
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from sketchauth.features import DEFAULT_SIGMA_FLOOR, GlcmParams
from sketchauth.imgproc import CannyParams
from sketchauth.verifier import TrainConfig

METHODS = ("autoencoder", "mahalanobis", "ocsvm")
SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineParams:
    ridge: float = 1e-6
    nu: float = 0.05
    gamma: float | None = None  # None: 1 / (d * mean variance) per artist


@dataclass(frozen=True)
class RunConfig:
    q: float = 0.95
    seed: int = 0
    methods: tuple[str, ...] = ("autoencoder",)
    canny: CannyParams = field(default_factory=CannyParams)
    glcm: GlcmParams = field(default_factory=GlcmParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    baselines: BaselineParams = field(default_factory=BaselineParams)
    sigma_floor: float = DEFAULT_SIGMA_FLOOR

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ConfigError(f"q must lie in (0, 1], got {self.q}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be drawn from {METHODS}, got {self.methods}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["glcm"]["angles"] = list(self.glcm.angles)
        return d


def derive_seed(seed: int, artist_id: str) -> int:
    """Per-artist seed: the run seed XOR a stable 64-bit hash of the artist id."""
    h = int.from_bytes(hashlib.sha256(artist_id.encode("utf-8")).digest()[:8], "big")
    return (seed ^ h) & SEED_MASK


def _parse_methods(text: str) -> tuple[str, ...]:
    items = [m.strip() for m in text.replace(";", ",").split(",") if m.strip()]
    if items == ["all"]:
        return METHODS
    return tuple(items)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from an optional INI file, then apply ``overrides``.

    ``overrides`` keys are ``q``, ``seed`` and ``methods`` (a comma list or tuple);
    ``None`` values are ignored.
    """
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            cfg = _apply_ini(cfg, parser)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from None

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "methods" and isinstance(value, str):
            value = _parse_methods(value)
        try:
            cfg = replace(cfg, **{key: value})
        except TypeError:
            raise ConfigError(f"unknown override {key!r}") from None
    return cfg


INI_KEYS = {
    "run": {"q", "seed", "methods", "sigma_floor"},
    "canny": {"sigma", "t_low", "t_high"},
    "glcm": {"levels", "distance"},
    "train": {"learning_rate", "max_epochs", "patience", "val_fraction"},
    "baselines": {"ridge", "nu", "gamma"},
}


def _apply_ini(cfg: RunConfig, p: configparser.ConfigParser) -> RunConfig:
    unknown = set(p.sections()) - set(INI_KEYS)
    if unknown:
        raise ValueError(f"unknown sections {sorted(unknown)}")
    for section in p.sections():
        extra = set(p[section]) - INI_KEYS[section]
        if extra:
            raise ValueError(f"unknown keys in [{section}]: {sorted(extra)}")
    updates = {}
    if p.has_section("run"):
        run = p["run"]
        if "q" in run:
            updates["q"] = run.getfloat("q")
        if "seed" in run:
            updates["seed"] = run.getint("seed")
        if "methods" in run:
            updates["methods"] = _parse_methods(run["methods"])
        if "sigma_floor" in run:
            updates["sigma_floor"] = run.getfloat("sigma_floor")
    if p.has_section("canny"):
        s = p["canny"]
        updates["canny"] = CannyParams(
            s.getfloat("sigma", cfg.canny.sigma), s.getfloat("t_low", cfg.canny.t_low), s.getfloat("t_high", cfg.canny.t_high)
        )
    if p.has_section("glcm"):
        s = p["glcm"]
        updates["glcm"] = GlcmParams(s.getint("levels", cfg.glcm.levels), s.getint("distance", cfg.glcm.distance))
    if p.has_section("train"):
        s = p["train"]
        t = cfg.train
        updates["train"] = replace(
            t,
            learning_rate=s.getfloat("learning_rate", t.learning_rate),
            max_epochs=s.getint("max_epochs", t.max_epochs),
            patience=s.getint("patience", t.patience),
            val_fraction=s.getfloat("val_fraction", t.val_fraction),
        )
    if p.has_section("baselines"):
        s = p["baselines"]
        b = cfg.baselines
        gamma = s.get("gamma", "auto").strip().lower()
        updates["baselines"] = BaselineParams(
            s.getfloat("ridge", b.ridge), s.getfloat("nu", b.nu), None if gamma == "auto" else float(gamma)
        )
    return replace(cfg, **updates)
