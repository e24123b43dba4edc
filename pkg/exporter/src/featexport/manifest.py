"""Manifest parsing: which images, which labels, which backbone."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class ManifestError(ValueError):
    pass


@dataclass
class ExportManifest:
    """Inputs for an export or fine-tune run.

    entries: (path, label-or-None) pairs from a `path,label` csv; labels are
    0/1 or absent. All paths must exist.
    """

    entries: list[tuple[Path, int | None]]
    backbone: str = "tiny"
    weights: str = "random"
    output: Path | None = None
    finetune: bool = False
    epochs: int = 3
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.entries:
            raise ManifestError("manifest lists no images")
        if not 0.0 <= self.dropout < 1.0:
            raise ManifestError("dropout must lie in [0, 1)")
        if self.epochs < 1:
            raise ManifestError("epochs must be at least 1")
        for path, label in self.entries:
            if label not in (0, 1, None):
                raise ManifestError(f"label for {path} must be 0, 1, or empty")
            if not Path(path).exists():
                raise ManifestError(f"image does not exist: {path}")

    def labels(self) -> list[int]:
        got = [label for _, label in self.entries]
        if any(label is None for label in got):
            raise ManifestError("all images must be labeled for this operation")
        return got


def read_manifest_csv(path) -> list[tuple[Path, int | None]]:
    """Rows of `path,label`; the label column may be empty or omitted."""
    entries = []
    base = Path(path).parent
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            raw_path = row[0].strip()
            if not raw_path:
                raise ManifestError(f"line {lineno}: empty image path")
            label_text = row[1].strip() if len(row) > 1 else ""
            if label_text == "":
                label = None
            elif label_text in ("0", "1"):
                label = int(label_text)
            else:
                raise ManifestError(f"line {lineno}: bad label {label_text!r}")
            p = Path(raw_path)
            if not p.is_absolute():
                p = base / p
            entries.append((p, label))
    return entries
