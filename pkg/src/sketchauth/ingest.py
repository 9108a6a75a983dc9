"""Dataset manifest parsing and image loading.

A manifest is a UTF-8 JSON document listing artists and their images with an
explicit train/test split::

    {"version": "1", "n_train": 20, "n_test": 9,
     "artists": [{"artist_id": "a", "display_name": "A",
                  "images": [{"image_id": "a-01", "split": "train",
                              "path": "imgs/a-01.png",
                              "source_url": "https://...", "sha256": "..."}]}]}

Splits are data, never computed here.
"""

from __future__ import annotations

import hashlib
import io
import json
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

SPLITS = ("train", "test")
SUPPORTED_FORMATS = ("PNG", "JPEG")


class ManifestError(ValueError):
    """Raised when a manifest document is malformed or violates its invariants."""


class ImageLoadError(RuntimeError):
    """Raised when an image cannot be located, fetched, verified or decoded."""


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    split: str
    path: str
    source_url: str | None = None
    sha256: str | None = None


@dataclass(frozen=True)
class ArtistRecord:
    artist_id: str
    display_name: str
    images: tuple[ImageEntry, ...]

    def split(self, name: str) -> tuple[ImageEntry, ...]:
        return tuple(img for img in self.images if img.split == name)


@dataclass(frozen=True)
class DatasetManifest:
    artists: tuple[ArtistRecord, ...]
    version: str = "1"
    n_train: int = 20
    n_test: int = 9
    # directory that relative image paths resolve against; not serialised
    base_dir: str | None = field(default=None, compare=False)

    @property
    def artist_ids(self) -> list[str]:
        return [a.artist_id for a in self.artists]

    def artist(self, artist_id: str) -> ArtistRecord:
        for a in self.artists:
            if a.artist_id == artist_id:
                return a
        raise KeyError(f"unknown artist {artist_id!r}")

    def iter_images(self):
        """Yield ``(artist, entry)`` pairs in manifest order."""
        for a in self.artists:
            for img in a.images:
                yield a, img

    def resolve(self, entry: ImageEntry) -> Path:
        p = Path(entry.path)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    @property
    def n_images(self) -> int:
        return sum(len(a.images) for a in self.artists)


def _require(obj: dict, key: str, kind: type, where: str):
    if key not in obj:
        raise ManifestError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ManifestError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _parse_entry(obj, where: str) -> ImageEntry:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: image entry must be an object")
    image_id = _require(obj, "image_id", str, where)
    where = f"{where} image {image_id!r}"
    split = _require(obj, "split", str, where)
    if split not in SPLITS:
        raise ManifestError(f"{where}: split must be one of {SPLITS}, got {split!r}")
    path = _require(obj, "path", str, where)
    url = obj.get("source_url")
    if url is not None and not isinstance(url, str):
        raise ManifestError(f"{where}: source_url must be a string")
    digest = obj.get("sha256")
    if digest is not None:
        if not isinstance(digest, str) or len(digest) != 64:
            raise ManifestError(f"{where}: sha256 must be a 64-character hex digest")
        try:
            int(digest, 16)
        except ValueError:
            raise ManifestError(f"{where}: sha256 is not hexadecimal") from None
        digest = digest.lower()
    return ImageEntry(image_id=image_id, split=split, path=path, source_url=url, sha256=digest)


def parse_manifest(data: bytes | str, base_dir: str | Path | None = None) -> DatasetManifest:
    """Parse and validate a manifest document."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")

    version = str(doc.get("version", "1"))
    n_train = doc.get("n_train", 20)
    n_test = doc.get("n_test", 9)
    for name, value in (("n_train", n_train), ("n_test", n_test)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ManifestError(f"{name} must be a positive integer")

    raw_artists = doc.get("artists")
    if not isinstance(raw_artists, list):
        raise ManifestError("manifest field 'artists' must be a list")
    if not raw_artists:
        raise ManifestError("no artists")

    artists = []
    seen_artists: set[str] = set()
    for k, raw in enumerate(raw_artists):
        if not isinstance(raw, dict):
            raise ManifestError(f"artist #{k}: must be an object")
        artist_id = _require(raw, "artist_id", str, f"artist #{k}")
        if artist_id in seen_artists:
            raise ManifestError(f"duplicate artist id {artist_id!r}")
        seen_artists.add(artist_id)
        where = f"artist {artist_id!r}"
        display = raw.get("display_name", artist_id)
        if not isinstance(display, str):
            raise ManifestError(f"{where}: display_name must be a string")
        raw_images = _require(raw, "images", list, where)

        images = []
        seen_images: set[str] = set()
        for raw_img in raw_images:
            entry = _parse_entry(raw_img, where)
            if entry.image_id in seen_images:
                raise ManifestError(f"{where}: duplicate image id {entry.image_id!r}")
            seen_images.add(entry.image_id)
            images.append(entry)

        for split, expected in (("train", n_train), ("test", n_test)):
            got = sum(1 for e in images if e.split == split)
            if got != expected:
                short = expected - got
                detail = f"short by {short}" if short > 0 else f"{-short} too many"
                raise ManifestError(
                    f"{where}: has {got} {split} images, expected {expected} ({detail})"
                )
        artists.append(ArtistRecord(artist_id, display, tuple(images)))

    return DatasetManifest(
        artists=tuple(artists),
        version=version,
        n_train=n_train,
        n_test=n_test,
        base_dir=None if base_dir is None else str(base_dir),
    )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    artists = []
    for a in manifest.artists:
        images = []
        for e in a.images:
            item = {"image_id": e.image_id, "split": e.split, "path": e.path}
            if e.source_url is not None:
                item["source_url"] = e.source_url
            if e.sha256 is not None:
                item["sha256"] = e.sha256
            images.append(item)
        artists.append({"artist_id": a.artist_id, "display_name": a.display_name, "images": images})
    return {
        "version": manifest.version,
        "n_train": manifest.n_train,
        "n_test": manifest.n_test,
        "artists": artists,
    }


def serialise_manifest(manifest: DatasetManifest) -> bytes:
    return (json.dumps(manifest_to_dict(manifest), indent=2) + "\n").encode("utf-8")


def read_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest file; relative image paths resolve against its directory."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    return parse_manifest(data, base_dir=path.parent)


def _fetch(url: str, timeout: float = 60.0) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def load_image_bytes(
    entry: ImageEntry,
    cache_dir: str | Path | None = None,
    *,
    base_dir: str | Path | None = None,
    fetch: bool = False,
) -> bytes:
    """Return the raw bytes for ``entry``: local path, then cache, then URL."""
    path = Path(entry.path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    cached = None
    if cache_dir is not None:
        cached = Path(cache_dir) / (entry.sha256 or entry.image_id)

    if path.is_file():
        data = path.read_bytes()
    elif cached is not None and cached.is_file():
        data = cached.read_bytes()
    elif entry.source_url and fetch:
        if cached is None:
            raise ImageLoadError(f"{entry.image_id}: fetching requires a cache directory")
        try:
            data = _fetch(entry.source_url)
        except OSError as exc:
            raise ImageLoadError(f"{entry.image_id}: fetch failed: {exc}") from None
        cached.parent.mkdir(parents=True, exist_ok=True)
        cached.write_bytes(data)
    elif entry.source_url:
        raise ImageLoadError(
            f"{entry.image_id}: file {path} not found and fetching is disabled"
        )
    else:
        raise ImageLoadError(f"{entry.image_id}: file {path} not found and no source_url")

    if entry.sha256 is not None:
        actual = hashlib.sha256(data).hexdigest()
        if actual != entry.sha256:
            raise ImageLoadError(
                f"{entry.image_id}: sha256 mismatch (expected {entry.sha256}, got {actual})"
            )
    return data


def decode_image(data: bytes, image_id: str = "<bytes>") -> np.ndarray:
    """Decode PNG/JPEG bytes to an ``(height, width, 3)`` uint8 RGB array."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format not in SUPPORTED_FORMATS:
                raise ImageLoadError(f"{image_id}: unsupported image format {im.format}")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageLoadError(f"{image_id}: cannot decode image: {exc}") from None
    return np.ascontiguousarray(arr)


def load_image(
    entry: ImageEntry,
    cache_dir: str | Path | None = None,
    *,
    base_dir: str | Path | None = None,
    fetch: bool = False,
) -> np.ndarray:
    """Load ``entry`` as an RGB raster, verifying its digest when one is declared."""
    data = load_image_bytes(entry, cache_dir, base_dir=base_dir, fetch=fetch)
    return decode_image(data, entry.image_id)
