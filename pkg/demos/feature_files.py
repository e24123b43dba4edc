"""The lesionfeat v1 exchange format and the builtin descriptor.

Computes 144-dimensional descriptors for two synthetic slices, writes them to
a feature file, and reads the file back bit-exactly. External producers (a
CNN exporter, say) write the same format with their own dim.
"""
from pathlib import Path

import numpy as np

from lungcad import (
    FeatureRecord,
    ImageGrid,
    builtin_descriptor,
    normalize,
    read_features,
    write_features,
)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

n = 64
c = (n - 1) / 2.0
X, Y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
rng = np.random.default_rng(3)

lesion = np.where((X - c) ** 2 + (Y - c) ** 2 <= 100, 0.9, 0.2)
lesion += rng.normal(0, 0.03, lesion.shape)
healthy = np.full((n, n), 0.3) + rng.normal(0, 0.03, (n, n))

records = [
    FeatureRecord("slice_lesion", 1, builtin_descriptor(normalize(ImageGrid(n, n, lesion)))),
    FeatureRecord("slice_healthy", 0, builtin_descriptor(normalize(ImageGrid(n, n, healthy)))),
]
for r in records:
    intensity, orientation = r.vector[:16], r.vector[16:]
    print(f"{r.id}: label {r.label}, intensity block sums to {intensity.sum():.6f}, "
          f"{np.count_nonzero(orientation)} nonzero orientation entries")

path = out_dir / "slices.feat"
write_features(records, path)
print(f"\nwrote {path} ({path.stat().st_size} bytes)")
print("first lines:")
print("\n".join(path.read_text().splitlines()[0:2]))

back = read_features(path)
assert back.dim == 144
assert all(np.array_equal(a.vector, b.vector) for a, b in zip(records, back.records))
print("\nround trip exact: yes")
