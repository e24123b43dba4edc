"""CLI: `export` writes a lesionfeat v1 file, `finetune` writes weights."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbone import BACKBONES, BackboneError
from .export import ImageDecodeError, export_features
from .finetune import finetune
from .manifest import ExportManifest, ManifestError, read_manifest_csv


def _parser():
    p = argparse.ArgumentParser(prog="lesionfeat-export", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--manifest", required=True, help="csv of `path,label` rows")
        sp.add_argument("--out", required=True, help="output file path")
        sp.add_argument("--backbone", default="vgg16", choices=BACKBONES)
        sp.add_argument("--weights", default=None,
                        help="pretrained | random | path to a state dict "
                             "(default: pretrained for vgg16, random for tiny)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--dropout", type=float, default=0.1)

    sp = sub.add_parser("export", help="write first-dense-layer activations")
    common(sp)
    sp = sub.add_parser("finetune", help="two-stage fine-tune; writes weights")
    common(sp)
    sp.add_argument("--epochs", type=int, default=3)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    weights = args.weights
    if weights is None:
        weights = "pretrained" if args.backbone == "vgg16" else "random"
    try:
        manifest = ExportManifest(
            entries=read_manifest_csv(args.manifest),
            backbone=args.backbone,
            weights=weights,
            output=Path(args.out),
            finetune=args.verb == "finetune",
            epochs=getattr(args, "epochs", 3),
            dropout=args.dropout,
            seed=args.seed,
        )
        if args.verb == "export":
            out = export_features(manifest)
        else:
            out = finetune(manifest)
        print(out)
        return 0
    except (ManifestError, BackboneError, ImageDecodeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
