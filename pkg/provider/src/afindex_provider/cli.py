import argparse
import sys

from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afindex-provider",
        description="Embed JSON-lines text from stdin to the exchange format "
                    "on stdout.",
    )
    parser.add_argument(
        "--model", required=True,
        help="sentence-transformers checkpoint name/path, or hash:<dim> for "
             "the deterministic offline test encoder",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument(
        "--on-bad-line", choices=("abort", "skip"), default="abort",
        help="abort (default) or skip-and-report malformed input lines",
    )
    return parser


def main() -> None:
    args = build_parser().parse_args()
    sys.exit(serve(
        model_id=args.model,
        stdin=sys.stdin,
        stdout=sys.stdout,
        stderr=sys.stderr,
        batch_size=args.batch_size,
        on_bad_line=args.on_bad_line,
    ))


if __name__ == "__main__":
    main()
