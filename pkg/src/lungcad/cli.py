"""Command-line interface.

Verbs: train, classify, segment, pipeline, eval. Exit codes: 0 success,
1 usage or configuration error, 2 no lesion region after clustering,
3 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline as pl
from .errors import (
    ConfigError,
    FeatureFormatError,
    LungCadError,
    ModelFormatError,
    NoLesionRegionError,
    PgmError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_LESION = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lungcad", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="fit the classifier on a labeled feature file")
    common(p)
    p.add_argument("--features", required=True, help="lesionfeat v1 file")

    p = sub.add_parser("classify", help="score feature records or images")
    common(p)
    p.add_argument("--model", required=True, help="model v1 file")
    p.add_argument("--features", help="lesionfeat v1 file to score")
    p.add_argument("--builtin-features", action="store_true",
                   help="compute the builtin descriptor for the given images")
    p.add_argument("inputs", nargs="*", help="image paths (with --builtin-features)")

    p = sub.add_parser("segment", help="segment one image")
    common(p)
    p.add_argument("image", help="PGM image path")
    p.add_argument("--truth", help="ground-truth mask PGM for a Dice report")

    p = sub.add_parser("pipeline", help="classify images; segment the positives")
    common(p)
    p.add_argument("--model", required=True, help="model v1 file")
    p.add_argument("images", nargs="+", help="PGM image paths")

    p = sub.add_parser("eval", help="metrics of a model on a labeled feature file")
    common(p)
    p.add_argument("--model", required=True, help="model v1 file")
    p.add_argument("--features", required=True, help="lesionfeat v1 file")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = pl.load_config(args.config) if args.config else pl.PipelineConfig()
        if args.seed is not None:
            config.seed = args.seed
        if args.verb == "train":
            return pl.cmd_train(args.features, config, out_dir=args.out, seed=args.seed)
        if args.verb == "classify":
            return pl.cmd_classify(
                args.model,
                features_path=args.features,
                image_paths=args.inputs,
                builtin=args.builtin_features,
                config=config,
            )
        if args.verb == "segment":
            return pl.cmd_segment(args.image, config, out_dir=args.out,
                                  truth_path=args.truth, seed=args.seed)
        if args.verb == "pipeline":
            return pl.cmd_pipeline(args.model, args.images, config,
                                   out_dir=args.out, seed=args.seed)
        if args.verb == "eval":
            return pl.cmd_eval(args.model, args.features, config)
        raise ConfigError(f"unknown verb {args.verb!r}")
    except NoLesionRegionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_LESION
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PgmError, FeatureFormatError, ModelFormatError, OSError, LungCadError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
