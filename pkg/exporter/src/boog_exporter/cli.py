"""Command-line front end: one export per invocation.

JSON summary on stdout; exit 0 on success, 1 on validation or encoder
failure, 2 on I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import DEFAULT_MODEL, TEMPLATES, export
from .errors import EncoderError, ManifestError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boog-export",
        description="Encode manifest texts into a binary embedding file.")
    parser.add_argument("--manifest", required=True,
                        help="JSON-lines file of {id, text} records")
    parser.add_argument("--out", required=True,
                        help="output path for the binary embedding file")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="encoder name: a sentence-transformers id or "
                             "hash:<dim> for the offline stand-in")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--template", choices=sorted(TEMPLATES),
                        default="none",
                        help="prompt prefix applied to every text")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        summary = export(args.manifest, args.model, args.out,
                         batch_size=args.batch_size,
                         template=args.template)
    except (ManifestError, EncoderError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
