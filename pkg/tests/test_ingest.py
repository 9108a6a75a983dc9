import hashlib
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from sketchauth.ingest import (
    ImageEntry,
    ImageLoadError,
    ManifestError,
    decode_image,
    load_image,
    parse_manifest,
    read_manifest,
    serialise_manifest,
)


def manifest_doc(n_artists=10, n_train=20, n_test=9, **kw):
    artists = []
    for a in range(n_artists):
        images = [{"image_id": f"a{a}-{k}", "split": "train" if k < n_train else "test", "path": f"a{a}/{k}.png"}
                  for k in range(n_train + n_test)]
        artists.append({"artist_id": f"a{a}", "display_name": f"Artist {a}", "images": images})
    doc = {"version": "1", "n_train": n_train, "n_test": n_test, "artists": artists}
    doc.update(kw)
    return doc


def png_bytes(arr):
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def test_full_manifest_has_290_images():
    m = parse_manifest(json.dumps(manifest_doc()))
    assert len(m.artists) == 10
    assert m.n_images == 290
    assert all(len(a.split("train")) == 20 and len(a.split("test")) == 9 for a in m.artists)


def test_empty_artist_list():
    with pytest.raises(ManifestError, match="no artists"):
        parse_manifest(json.dumps(manifest_doc(artists=[])))


def test_train_shortfall_names_artist():
    doc = manifest_doc()
    doc["artists"][3]["images"].pop(0)
    with pytest.raises(ManifestError) as exc:
        parse_manifest(json.dumps(doc))
    msg = str(exc.value)
    assert "'a3'" in msg and "19 train" in msg and "short by 1" in msg


def test_duplicates_rejected():
    doc = manifest_doc(n_artists=2)
    doc["artists"][1]["artist_id"] = "a0"
    with pytest.raises(ManifestError, match="duplicate artist"):
        parse_manifest(json.dumps(doc))
    doc = manifest_doc(n_artists=1)
    doc["artists"][0]["images"][1]["image_id"] = "a0-0"
    with pytest.raises(ManifestError, match="duplicate image"):
        parse_manifest(json.dumps(doc))


@pytest.mark.parametrize("bad", ["not json", "[]", '{"artists": {}}'])
def test_malformed_documents(bad):
    with pytest.raises(ManifestError):
        parse_manifest(bad)


def test_bad_digest_field():
    doc = manifest_doc(n_artists=1)
    doc["artists"][0]["images"][0]["sha256"] = "xyz"
    with pytest.raises(ManifestError, match="sha256"):
        parse_manifest(json.dumps(doc))


ids = st.text("abcdefgh0123456789_-", min_size=1, max_size=8)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.booleans(), ids)
def test_round_trip(n_artists, n_train, n_test, with_extras, version):
    doc = manifest_doc(n_artists, n_train, n_test, version=version)
    if with_extras:
        for a in doc["artists"]:
            for img in a["images"]:
                img["source_url"] = f"https://example.org/{img['image_id']}"
                img["sha256"] = hashlib.sha256(img["image_id"].encode()).hexdigest()
    m = parse_manifest(json.dumps(doc))
    assert parse_manifest(serialise_manifest(m)) == m


def test_read_manifest_resolves_relative_paths(tmp_path):
    (tmp_path / "a0").mkdir()
    data = png_bytes(np.full((4, 4, 3), 9, np.uint8))
    (tmp_path / "a0" / "x.png").write_bytes(data)
    doc = {"n_train": 1, "n_test": 1, "artists": [{"artist_id": "a0", "images": [
        {"image_id": "x", "split": "train", "path": "a0/x.png"},
        {"image_id": "y", "split": "test", "path": "a0/x.png"}]}]}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    m = read_manifest(tmp_path / "m.json")
    entry = m.artists[0].images[0]
    assert m.resolve(entry) == tmp_path / "a0" / "x.png"
    assert load_image(entry, base_dir=m.base_dir).shape == (4, 4, 3)


def test_single_white_pixel(tmp_path):
    p = tmp_path / "w.png"
    p.write_bytes(png_bytes(np.full((1, 1, 3), 255, np.uint8)))
    img = load_image(ImageEntry("w", "train", str(p)))
    assert img.shape == (1, 1, 3)
    assert img.dtype == np.uint8
    assert tuple(img[0, 0]) == (255, 255, 255)


def test_digest_mismatch(tmp_path):
    p = tmp_path / "w.png"
    p.write_bytes(png_bytes(np.zeros((2, 2, 3), np.uint8)))
    entry = ImageEntry("w", "train", str(p), sha256="0" * 64)
    with pytest.raises(ImageLoadError, match="sha256 mismatch"):
        load_image(entry)


def test_dimensions_pass_through(tmp_path):
    p = tmp_path / "r.png"
    p.write_bytes(png_bytes(np.random.default_rng(0).integers(0, 256, (200, 300, 3), dtype=np.uint8)))
    img = load_image(ImageEntry("r", "train", str(p)))
    height, width = img.shape[:2]
    assert (width, height) == (300, 200)


def test_missing_file_without_url(tmp_path):
    with pytest.raises(ImageLoadError, match="nope"):
        load_image(ImageEntry("nope", "train", str(tmp_path / "nope.png")))


def test_url_requires_opt_in(tmp_path):
    entry = ImageEntry("remote", "train", str(tmp_path / "gone.png"), source_url="https://example.org/x.png")
    with pytest.raises(ImageLoadError, match="fetching is disabled"):
        load_image(entry, tmp_path / "cache")


def test_cache_lookup_by_digest(tmp_path):
    data = png_bytes(np.full((3, 5, 3), 40, np.uint8))
    digest = hashlib.sha256(data).hexdigest()
    (tmp_path / "cache").mkdir()
    (tmp_path / "cache" / digest).write_bytes(data)
    entry = ImageEntry("c", "train", str(tmp_path / "absent.png"), sha256=digest)
    assert load_image(entry, tmp_path / "cache").shape == (3, 5, 3)


def test_decode_rejects_garbage_and_other_formats():
    with pytest.raises(ImageLoadError):
        decode_image(b"definitely not an image")
    buf = io.BytesIO()
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(buf, format="BMP")
    with pytest.raises(ImageLoadError, match="unsupported"):
        decode_image(buf.getvalue())


def test_greyscale_and_alpha_become_rgb():
    buf = io.BytesIO()
    Image.fromarray(np.full((2, 3), 77, np.uint8), "L").save(buf, format="PNG")
    img = decode_image(buf.getvalue())
    assert img.shape == (2, 3, 3) and (img == 77).all()
