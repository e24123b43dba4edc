"""End-to-end run through the CLI verbs.

Synthesizes a labeled training set and a batch of unseen slices, trains the
classifier, and runs the classify-then-segment pipeline: positives get masks,
negatives only a classification line.
"""
from pathlib import Path

import numpy as np

from lungcad import FeatureRecord, ImageGrid, builtin_descriptor, normalize, save_image, write_features
from lungcad.cli import main

out_dir = Path(__file__).parent / "output" / "pipeline"
out_dir.mkdir(parents=True, exist_ok=True)


def make_slice(n=128, lesion_radius=None, seed=0):
    rng = np.random.default_rng(seed)
    c = (n - 1) / 2.0
    X, Y = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    values = np.full((n, n), 0.25)
    if lesion_radius:
        values = np.where((X - c) ** 2 + (Y - c) ** 2 <= lesion_radius**2, 0.85, values)
    values = values + rng.normal(0, 0.03, values.shape)
    return ImageGrid(n, n, np.rint(np.clip(values, 0, 1) * 255))


# 1. labeled descriptors for training (positives have disks, negatives don't)
records = []
for i in range(12):
    img = make_slice(n=64, lesion_radius=8 + i % 5, seed=100 + i)
    records.append(FeatureRecord(f"pos{i}", 1, builtin_descriptor(normalize(img))))
for i in range(12):
    img = make_slice(n=64, lesion_radius=None, seed=200 + i)
    records.append(FeatureRecord(f"neg{i}", 0, builtin_descriptor(normalize(img))))
feat_path = out_dir / "train.feat"
write_features(records, feat_path)

# 2. train; the model file and the holdout confusion matrix land in out_dir
print("== train ==")
assert main(["train", "--features", str(feat_path), "--out", str(out_dir), "--seed", "2"]) == 0

# 3. a batch of unseen slices: two with lesions, one without
batch = []
for name, radius, seed in [("case1", 15, 31), ("case2", 11, 32), ("case3", None, 33)]:
    p = out_dir / f"{name}.pgm"
    save_image(make_slice(lesion_radius=radius, seed=seed), p)
    batch.append(str(p))

cfg = out_dir / "pipeline.cfg"
cfg.write_text("fcm.clusters = 2\n")

print("\n== pipeline ==")
code = main(["pipeline", "--model", str(out_dir / "model.txt"), *batch,
             "--config", str(cfg), "--out", str(out_dir), "--seed", "5"])
print(f"exit code {code}")
print("masks written:", sorted(p.name for p in out_dir.glob("*.mask.pgm")))
