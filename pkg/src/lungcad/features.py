"""Feature-vector exchange format and the built-in image descriptor.

The `lesionfeat v1` text format is the contract between external feature
producers (a CNN exporter, for instance) and the classifier: one header pair
and one line per record, floats in shortest round-trip form, so files
re-serialize byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FeatureFormatError
from .imaging import ImageGrid, gradient_central

_MAGIC = "lesionfeat v1"

INTENSITY_BINS = 16
GRID_CELLS = 4
ORIENT_BINS = 8
DESCRIPTOR_DIM = INTENSITY_BINS + GRID_CELLS * GRID_CELLS * ORIENT_BINS


@dataclass(frozen=True, eq=False)
class FeatureRecord:
    """One sample: whitespace-free id, optional 0/1 label, fixed-width vector."""

    id: str
    label: int | None
    vector: np.ndarray

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise ValueError(f"record id {self.id!r} must be non-empty without whitespace")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError("label must be 0, 1, or absent")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError("vector must be a non-empty 1-D array")
        if not np.isfinite(vec).all():
            raise ValueError("vector values must be finite")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True, eq=False)
class FeatureFile:
    dim: int
    records: list[FeatureRecord]


def format_feature_file(records) -> str:
    records = list(records)
    if not records:
        raise ValueError("feature file needs at least one record")
    dim = records[0].vector.size
    seen = set()
    lines = [_MAGIC, f"dim {dim}"]
    for r in records:
        if r.vector.size != dim:
            raise ValueError(f"record {r.id!r} has dim {r.vector.size}, expected {dim}")
        if r.id in seen:
            raise ValueError(f"duplicate record id {r.id!r}")
        seen.add(r.id)
        label = "?" if r.label is None else str(r.label)
        floats = " ".join(repr(float(v)) for v in r.vector)
        lines.append(f"{r.id} {label} {floats}")
    return "\n".join(lines) + "\n"


def parse_feature_file(text: str) -> FeatureFile:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise FeatureFormatError(f"version mismatch: expected header {_MAGIC!r}")
    if len(lines) < 2 or not lines[1].startswith("dim "):
        raise FeatureFormatError("missing dim header")
    try:
        dim = int(lines[1][4:])
    except ValueError as e:
        raise FeatureFormatError(f"unparsable dim: {lines[1]!r}") from e
    if dim < 1:
        raise FeatureFormatError(f"dim must be positive, got {dim}")
    records = []
    seen = set()
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split()
        if len(parts) != 2 + dim:
            raise FeatureFormatError(
                f"line {lineno}: expected id, label and {dim} floats, got {len(parts)} fields"
            )
        rid, label_text = parts[0], parts[1]
        if rid in seen:
            raise FeatureFormatError(f"line {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        if label_text == "?":
            label = None
        elif label_text in ("0", "1"):
            label = int(label_text)
        else:
            raise FeatureFormatError(f"line {lineno}: bad label {label_text!r}")
        try:
            vector = np.array([float(tok) for tok in parts[2:]], dtype=np.float64)
        except ValueError as e:
            raise FeatureFormatError(f"line {lineno}: unparsable float: {e}") from e
        records.append(FeatureRecord(rid, label, vector))
    if not records:
        raise FeatureFormatError("feature file has no records")
    return FeatureFile(dim, records)


def write_features(records, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(format_feature_file(records))


def read_features(path) -> FeatureFile:
    with open(path, "r") as f:
        return parse_feature_file(f.read())


def builtin_descriptor(image: ImageGrid) -> np.ndarray:
    """144-value descriptor of a normalized image.

    A 16-bin intensity histogram (normalized to sum 1) followed by a 4x4
    grid of 8-bin gradient-orientation histograms weighted by gradient
    magnitude, each cell L2-normalized (an all-zero cell stays zero). Cells
    are emitted x-major, matching the pixel index convention.
    """
    v = image.values
    if v.min() < 0 or v.max() > 1:
        raise ValueError("descriptor expects a normalized image")
    hist, _ = np.histogram(v, bins=INTENSITY_BINS, range=(0.0, 1.0))
    intensity = hist.astype(np.float64) / v.size

    gx, gy = gradient_central(image)
    mag = np.hypot(gx.values, gy.values)
    theta = np.arctan2(gy.values, gx.values)
    obin = np.minimum(
        (((theta + np.pi) / (2.0 * np.pi)) * ORIENT_BINS).astype(int), ORIENT_BINS - 1
    )
    xs = np.arange(image.width)[:, None] * GRID_CELLS // image.width
    ys = np.arange(image.height)[None, :] * GRID_CELLS // image.height
    cell = np.minimum(xs, GRID_CELLS - 1) * GRID_CELLS + np.minimum(ys, GRID_CELLS - 1)
    flat_bin = cell * ORIENT_BINS + obin
    blocks = np.bincount(
        np.broadcast_to(flat_bin, mag.shape).ravel(),
        weights=mag.ravel(),
        minlength=GRID_CELLS * GRID_CELLS * ORIENT_BINS,
    ).reshape(GRID_CELLS * GRID_CELLS, ORIENT_BINS)
    norms = np.linalg.norm(blocks, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return np.concatenate([intensity, (blocks / norms).ravel()])
