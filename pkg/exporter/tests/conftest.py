import numpy as np
import pytest
from PIL import Image


def write_toy_image(path, seed=0, lesion=False, size=48):
    """Small grayscale PNG: noisy background, optional bright disk."""
    rng = np.random.default_rng(seed)
    values = rng.normal(60, 10, (size, size))
    if lesion:
        c = size / 2
        Y, X = np.ogrid[:size, :size]
        values[(X - c) ** 2 + (Y - c) ** 2 <= (size / 5) ** 2] = 200
    arr = np.clip(values, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)
    return path


@pytest.fixture
def toy_dataset(tmp_path):
    """20 labeled toy images (10 lesion, 10 background) plus a manifest csv."""
    rows = []
    for i in range(10):
        p = write_toy_image(tmp_path / f"pos{i}.png", seed=i, lesion=True)
        rows.append(f"{p},1")
    for i in range(10):
        p = write_toy_image(tmp_path / f"neg{i}.png", seed=100 + i, lesion=False)
        rows.append(f"{p},0")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest
