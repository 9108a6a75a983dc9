"""Synthetic drawing corpus for tests and demos.

Each "artist" is a texture family: a paper tone, optional hatching, grain and
wash, and a population of pen strokes. Family members differ by stroke
placement and small parameter jitter, so intra-family features cluster while
families differ in frequency, contrast and edge complexity.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

SEPIA = np.array([1.0, 0.94, 0.82])


@dataclass(frozen=True)
class Style:
    name: str
    paper: float = 0.9  # background tone
    gradient: float = 0.0  # vertical tone ramp added to the paper
    ink: float = 0.15  # stroke tone
    strokes: int = 30
    length: float = 60.0
    width: int = 1
    curve: float = 0.2  # control-point offset relative to length
    hatch_freq: float = 0.0  # cycles per pixel
    hatch_amp: float = 0.0
    hatch_angle: float = 45.0
    grain: float = 0.01  # per-pixel noise std
    wash: float = 0.0  # low-frequency blotch amplitude


STYLES = (
    Style("sparse_line", paper=0.93, ink=0.20, strokes=12, length=110, grain=0.01),
    Style("dense_hatch", paper=0.84, ink=0.25, strokes=50, length=25, hatch_freq=0.22, hatch_amp=0.20, grain=0.015),
    Style("dark_wash", paper=0.42, ink=0.85, strokes=25, length=50, width=2, grain=0.04, wash=0.10),
    Style("chalk", paper=0.66, ink=0.10, strokes=18, length=70, width=4, grain=0.12),
    Style("fine_grid", paper=0.90, ink=0.40, strokes=6, length=60, hatch_freq=0.45, hatch_amp=0.12, hatch_angle=0.0, grain=0.005),
    Style("blotchy", paper=0.78, ink=0.30, strokes=4, length=80, width=2, wash=0.30, grain=0.02),
    Style("heavy_ink", paper=0.96, ink=0.04, strokes=90, length=45, width=2, grain=0.005),
    Style("tonal_ramp", paper=0.55, gradient=0.40, ink=0.10, strokes=10, length=90, grain=0.02),
    Style("scribble", paper=0.74, ink=0.20, strokes=160, length=14, curve=0.8, grain=0.03),
    Style("pale", paper=0.97, ink=0.78, strokes=40, length=60, grain=0.004),
)


def _jitter(style: Style, rng: np.random.Generator, amount: float = 0.04) -> Style:
    def j(v: float) -> float:
        return float(v * (1.0 + amount * rng.standard_normal()))

    return replace(
        style,
        paper=float(np.clip(j(style.paper), 0.05, 1.0)),
        ink=float(np.clip(j(style.ink), 0.0, 1.0)),
        strokes=max(1, int(round(j(style.strokes)))),
        length=j(style.length),
        grain=abs(j(style.grain)),
        hatch_amp=abs(j(style.hatch_amp)),
        wash=abs(j(style.wash)),
    )


def _stroke_mask(style: Style, rng: np.random.Generator, size: int) -> np.ndarray:
    mask = np.zeros((size, size))
    for _ in range(style.strokes):
        p0 = rng.uniform(0, size, 2)
        theta = rng.uniform(0, np.pi)
        length = style.length * rng.uniform(0.6, 1.4)
        p2 = p0 + length * np.array([np.cos(theta), np.sin(theta)])
        normal = np.array([-np.sin(theta), np.cos(theta)])
        p1 = 0.5 * (p0 + p2) + style.curve * length * rng.uniform(-1, 1) * normal
        t = np.linspace(0.0, 1.0, max(int(2 * length), 2))[:, None]
        pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2
        ij = np.round(pts).astype(int)
        ok = (ij >= 0).all(axis=1) & (ij < size).all(axis=1)
        mask[ij[ok, 1], ij[ok, 0]] = 1.0
    if style.width > 1:
        mask = ndimage.binary_dilation(mask > 0, iterations=style.width - 1).astype(float)
    return np.clip(ndimage.gaussian_filter(mask, 0.6), 0.0, 1.0)


def render(style: Style, rng: np.random.Generator, size: int = 256) -> np.ndarray:
    """Render one sepia-tinted sketch as an ``(size, size, 3)`` uint8 array."""
    s = _jitter(style, rng)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    tone = np.full((size, size), s.paper) + s.gradient * (yy / size - 0.5)
    if s.hatch_amp > 0:
        a = np.radians(s.hatch_angle + rng.uniform(-5, 5))
        phase = rng.uniform(0, 2 * np.pi)
        tone -= s.hatch_amp * 0.5 * (1 + np.sin(2 * np.pi * s.hatch_freq * (xx * np.cos(a) + yy * np.sin(a)) + phase))
    if s.wash > 0:
        blob = ndimage.gaussian_filter(rng.standard_normal((size, size)), size / 12)
        tone += s.wash * blob / (np.abs(blob).max() + 1e-12)
    mask = _stroke_mask(s, rng, size)
    tone = tone * (1 - mask) + s.ink * mask
    tone += s.grain * rng.standard_normal((size, size))
    grey = np.clip(tone, 0.0, 1.0)
    rgb = np.clip(grey[..., None] * SEPIA * 255.0 + 0.5, 0, 255)
    return rgb.astype(np.uint8)


def _png_bytes(rgb: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def make_corpus(
    out_dir: str | Path,
    n_artists: int = 10,
    n_train: int = 20,
    n_test: int = 9,
    seed: int = 0,
    size: int = 256,
    styles=STYLES,
) -> Path:
    """Write a PNG corpus plus ``manifest.json`` under ``out_dir``; return the manifest path."""
    if n_artists > len(styles):
        raise ValueError(f"only {len(styles)} styles available, asked for {n_artists}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    artists = []
    for style, child in zip(styles[:n_artists], root.spawn(n_artists)):
        rng = np.random.default_rng(child)
        images = []
        for k in range(n_train + n_test):
            split = "train" if k < n_train else "test"
            image_id = f"{style.name}-{k:02d}"
            data = _png_bytes(render(style, rng, size))
            rel = f"images/{image_id}.png"
            (out / rel).write_bytes(data)
            images.append({"image_id": image_id, "split": split, "path": rel,
                           "sha256": hashlib.sha256(data).hexdigest()})
        artists.append({"artist_id": style.name, "display_name": style.name.replace("_", " ").title(),
                        "images": images})
    manifest = {"version": "synthetic-1", "n_train": n_train, "n_test": n_test, "artists": artists}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
