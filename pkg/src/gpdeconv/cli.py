"""Command-line surface.

Subcommands: sample | deconv | train | image | baseline | evaluate |
diagnose.  Exit codes: 0 success, 2 usage/config/format error,
3 numerical or training failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import commands, fileio, schemas
from .errors import (ConfigError, DataFormatError, DimensionError,
                     GPDeconvError, NotPositiveDefiniteError, ParameterError,
                     TrainingError, UnsupportedOperationError)

USAGE_ERRORS = (ConfigError, DataFormatError, ParameterError, DimensionError,
                UnsupportedOperationError)
NUMERICAL_ERRORS = (NotPositiveDefiniteError, TrainingError)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gpdeconv",
        description="Deconvolution of continuous signals with Gaussian process priors")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, needs_config=True, needs_input=False):
        cmd = sub.add_parser(name, help=help_text)
        if needs_config:
            cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--no-plot", action="store_true",
                         help="skip figure rendering")
        if needs_input:
            cmd.add_argument("--input", required=True, help="input data file")
        return cmd

    add("sample", "draw a joint (source, convolution, observations) sample")
    add("deconv", "posterior over the source from (t, y) observations",
        needs_input=True)
    add("train", "maximum-likelihood fit, optionally blind", needs_input=True)
    add("image", "blur/corrupt/reconstruct an image", needs_input=True)
    add("baseline", "FFT deconvolution baselines", needs_input=True)
    diag = add("diagnose", "spectral recoverability diagnostic")
    evaluate = add("evaluate", "metrics between truth and estimate CSVs",
                   needs_config=False)
    evaluate.add_argument("--config", default=None, help="optional JSON config")
    evaluate.add_argument("--truth", required=True, help="truth CSV")
    evaluate.add_argument("--estimate", required=True, help="estimate CSV")
    evaluate.add_argument("--align", action="store_true",
                          help="remove the best circular shift before scoring")
    return parser


def _load_config(args):
    if getattr(args, "config", None) is None:
        config = {}
    else:
        config = fileio.read_json(args.config)
        if not isinstance(config, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    config = schemas.validate_config(args.command, config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.no_plot:
        config["plot"] = False
    if getattr(args, "align", False):
        config["align"] = True
    return config


def run(argv=None):
    args = build_parser().parse_args(argv)
    config = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "sample":
        written = commands.cmd_sample(config, out_dir)
    elif args.command == "deconv":
        written = commands.cmd_deconv(config, args.input, out_dir)
    elif args.command == "train":
        written = commands.cmd_train(config, args.input, out_dir)
    elif args.command == "image":
        written = commands.cmd_image(config, args.input, out_dir)
    elif args.command == "baseline":
        written = commands.cmd_baseline(config, args.input, out_dir)
    elif args.command == "evaluate":
        written = commands.cmd_evaluate(args.truth, args.estimate, config, out_dir)
    else:
        written = commands.cmd_diagnose(config, out_dir)
    for path in written:
        print(path)
    return 0


def main(argv=None):
    try:
        return run(argv)
    except USAGE_ERRORS as exc:
        print(f"gpdeconv: error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"gpdeconv: numerical failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"gpdeconv: error: {exc}", file=sys.stderr)
        return 2
    except GPDeconvError as exc:
        print(f"gpdeconv: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
