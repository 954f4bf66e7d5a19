"""Command-line entry point for the manitest-oracle/1 worker."""

from __future__ import annotations

import argparse
import sys

from . import AdapterConfig, AdapterError, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manitest-oracle-adapter",
        description="Serve a stored classifier over the manitest-oracle/1 protocol.",
    )
    parser.add_argument("model",
                        help="MTMODEL1 model file path, or constant:<label>")
    parser.add_argument("--preprocess", default="none",
                        choices=("none", "standardize"))
    parser.add_argument("--channels", type=int, default=None)
    parser.add_argument("--width", type=int, default=None)
    parser.add_argument("--height", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(selector=args.model, preprocess=args.preprocess,
                               channels=args.channels, width=args.width,
                               height=args.height)
        serve(config)
    except AdapterError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except BrokenPipeError:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
