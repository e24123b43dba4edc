import numpy as np
import pytest

from lungcad import FeatureRecord, ImageGrid, SegMask, builtin_descriptor, normalize, save_image


def disk_phantom(n=128, radius=15.0, fg=0.85, bg=0.2, noise_sigma=0.0, seed=11):
    """Synthetic slice: a bright disk on a dark background, optional Gaussian
    noise. Returns (image, ground-truth mask)."""
    c = (n - 1) / 2.0
    X, Y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    disk = (X - c) ** 2 + (Y - c) ** 2 <= radius * radius
    values = np.where(disk, fg, bg)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_sigma, values.shape)
    return ImageGrid(n, n, values), SegMask(n, n, disk)


def write_phantom_pgm(path, noise_sigma=0.05, seed=11, radius=15.0, n=128):
    """8-bit PGM of a disk phantom; returns the ground-truth mask."""
    img, truth = disk_phantom(n=n, radius=radius, noise_sigma=noise_sigma, seed=seed)
    as_bytes = np.rint(np.clip(img.values, 0.0, 1.0) * 255.0)
    save_image(ImageGrid(img.width, img.height, as_bytes), path)
    return truth


def write_flat_pgm(path, n=128, value=90):
    save_image(ImageGrid(n, n, np.full((n, n), float(value))), path)


def descriptor_records(seed=0):
    """Labeled builtin descriptors: disk phantoms vs near-flat negatives."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(12):
        img, _ = disk_phantom(n=64, radius=rng.uniform(8, 16), noise_sigma=0.04,
                              seed=100 + i)
        records.append(FeatureRecord(f"pos{i}", 1, builtin_descriptor(normalize(img))))
    for i in range(12):
        flat = np.full((64, 64), rng.uniform(0.1, 0.6))
        flat += rng.normal(0, 0.02, flat.shape)
        img = ImageGrid(64, 64, flat)
        records.append(FeatureRecord(f"neg{i}", 0, builtin_descriptor(normalize(img))))
    return records


def separable_2d(n=500, margin=0.2, seed=42):
    """Linearly separable 2-D points with a margin band removed; exactly n
    points, labels by the sign of x0 + x1."""
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n:
        batch = rng.uniform(-1.0, 1.0, size=(n, 2))
        keep = np.abs(batch[:, 0] + batch[:, 1]) >= margin
        rows.extend(batch[keep].tolist())
    x = np.array(rows[:n])
    y = (x[:, 0] + x[:, 1] > 0).astype(float)
    return x, y


@pytest.fixture
def phantom_pair():
    return disk_phantom(noise_sigma=0.05)
