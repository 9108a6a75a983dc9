"""One-class verification of drawings from handcrafted image features."""

from sketchauth.features import FeatureVector, Standardiser, extract_features
from sketchauth.ingest import ArtistRecord, DatasetManifest, ImageEntry, load_image, parse_manifest
from sketchauth.verifier import Decision, TrainConfig, VerifierModel, verify

__version__ = "0.1.0"

__all__ = [
    "ArtistRecord",
    "DatasetManifest",
    "Decision",
    "FeatureVector",
    "ImageEntry",
    "Standardiser",
    "TrainConfig",
    "VerifierModel",
    "extract_features",
    "load_image",
    "parse_manifest",
    "verify",
]
