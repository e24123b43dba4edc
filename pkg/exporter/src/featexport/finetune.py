"""Two-stage fine-tuning: dense head first, then the last two conv blocks.

Stage 1 trains only the dense head against frozen convolutions (a bad head
initialization must not damage the convolutional weights). Stage 2 unfreezes
the last two convolutional blocks and continues. Per-epoch training and
validation loss/accuracy are appended to a curves CSV next to the weights.
"""
from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from .backbone import build_backbone, last_two_block_start
from .export import load_image_tensor
from .manifest import ExportManifest, ManifestError


def _split(entries, labels, seed: int, holdout_frac: float = 0.2):
    gen = torch.Generator().manual_seed(seed)
    train_idx, val_idx = [], []
    for value in (0, 1):
        idx = [i for i, lab in enumerate(labels) if lab == value]
        order = torch.randperm(len(idx), generator=gen).tolist()
        idx = [idx[o] for o in order]
        n_val = max(1, round(holdout_frac * len(idx))) if len(idx) >= 2 else 0
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return sorted(train_idx), sorted(val_idx)


def _epoch_pass(model, x, y, optimizer=None):
    criterion = nn.CrossEntropyLoss()
    training = optimizer is not None
    model.train(training)
    total_loss, correct = 0.0, 0
    batch = 8
    for start in range(0, x.shape[0], batch):
        xb, yb = x[start : start + batch], y[start : start + batch]
        if training:
            optimizer.zero_grad()
            out = model(xb)
            loss = criterion(out, yb)
            loss.backward()
            optimizer.step()
        else:
            with torch.no_grad():
                out = model(xb)
                loss = criterion(out, yb)
        total_loss += float(loss.detach()) * xb.shape[0]
        correct += int((out.argmax(dim=1) == yb).sum())
    return total_loss / x.shape[0], correct / x.shape[0]


def finetune(manifest: ExportManifest, model=None, lr: float = 1e-3,
             stages: tuple = (1, 2)) -> Path:
    """Train per the manifest and save the resulting state dict to
    manifest.output; epoch curves go to `<output>.curves.csv`.

    stages=(1,) stops after the head-only stage (convolutions stay frozen
    throughout)."""
    if manifest.output is None:
        raise ValueError("manifest has no output path")
    labels = manifest.labels()
    if len(set(labels)) < 2:
        raise ManifestError("degenerate labels: fine-tuning needs both classes")
    torch.manual_seed(manifest.seed)
    if model is None:
        model = build_backbone(manifest.backbone, manifest.weights,
                               manifest.dropout, manifest.seed)

    x = torch.stack([load_image_tensor(p, model.input_size) for p, _ in manifest.entries])
    y = torch.tensor(labels, dtype=torch.long)
    train_idx, val_idx = _split(manifest.entries, labels, manifest.seed)
    xt, yt = x[train_idx], y[train_idx]
    xv, yv = x[val_idx], y[val_idx]

    curves = ["stage,epoch,train_loss,train_acc,val_loss,val_acc"]

    def run_stage(stage: int, trainable_prefix_ok):
        for name, param in model.named_parameters():
            param.requires_grad = trainable_prefix_ok(name)
        params = [p for p in model.parameters() if p.requires_grad]
        optimizer = torch.optim.Adam(params, lr=lr)
        for epoch in range(manifest.epochs):
            train_loss, train_acc = _epoch_pass(model, xt, yt, optimizer)
            val_loss, val_acc = _epoch_pass(model, xv, yv)
            curves.append(
                f"{stage},{epoch},{train_loss!r},{train_acc!r},{val_loss!r},{val_acc!r}"
            )

    # stage 1: dense head only, convolutions frozen
    if 1 in stages:
        run_stage(1, lambda name: name.startswith("classifier"))
    # stage 2: last two conv blocks join in
    if 2 in stages:
        boundary = last_two_block_start(model)

        def stage2(name):
            if name.startswith("classifier"):
                return True
            if name.startswith("features."):
                return int(name.split(".")[1]) >= boundary
            return False

        run_stage(2, stage2)

    out = Path(manifest.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out)
    Path(f"{out}.curves.csv").write_text("\n".join(curves) + "\n")
    return out
