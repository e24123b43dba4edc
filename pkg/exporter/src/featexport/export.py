"""Batch feature export: images -> first-dense-layer activations -> lesionfeat v1."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbone import build_backbone, capture_dense_activations, dense_width
from .manifest import ExportManifest

_BATCH = 8


class ImageDecodeError(ValueError):
    pass


def load_image_tensor(path, size: int) -> torch.Tensor:
    """Decode to grayscale, resize to the backbone input, replicate to three
    channels, scale to [0, 1]."""
    try:
        with Image.open(path) as img:
            gray = img.convert("L").resize((size, size), Image.BILINEAR)
    except (OSError, SyntaxError) as e:
        raise ImageDecodeError(f"undecodable image {path}: {e}") from e
    arr = np.asarray(gray, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).unsqueeze(0).repeat(3, 1, 1)


def _record_id(path: Path, seen: set) -> str:
    rid = path.stem.replace(" ", "_")
    candidate = rid
    n = 1
    while candidate in seen:
        n += 1
        candidate = f"{rid}_{n}"
    seen.add(candidate)
    return candidate


def export_features(manifest: ExportManifest, model=None) -> Path:
    """Run every manifest image through the backbone in inference mode and
    write one feature record per image; `dim` equals the first dense layer's
    width. Records keep manifest order."""
    if manifest.output is None:
        raise ValueError("manifest has no output path")
    if model is None:
        model = build_backbone(manifest.backbone, manifest.weights,
                               manifest.dropout, manifest.seed)
    width = dense_width(model)
    size = model.input_size

    seen = set()
    lines = ["lesionfeat v1", f"dim {width}"]
    for start in range(0, len(manifest.entries), _BATCH):
        chunk = manifest.entries[start : start + _BATCH]
        batch = torch.stack([load_image_tensor(p, size) for p, _ in chunk])
        acts = capture_dense_activations(model, batch).cpu().numpy().astype(np.float64)
        for (path, label), vec in zip(chunk, acts):
            rid = _record_id(Path(path), seen)
            label_text = "?" if label is None else str(label)
            floats = " ".join(repr(float(v)) for v in vec)
            lines.append(f"{rid} {label_text} {floats}")
    out = Path(manifest.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return out
