"""Offline producer of lesionfeat v1 files from CNN dense-layer activations."""

from .backbone import (
    BACKBONES,
    BackboneError,
    TinyBackbone,
    Vgg16Backbone,
    build_backbone,
    capture_dense_activations,
    dense_width,
    last_two_block_start,
)
from .export import ImageDecodeError, export_features, load_image_tensor
from .finetune import finetune
from .manifest import ExportManifest, ManifestError, read_manifest_csv

__version__ = "0.1.0"
