"""Command line entry point.

    wcs-extract --model <id> --contexts <jsonl> --temps 0.7,1.0,1.5 --out <trace.jsonl>

Exit codes: 0 on success, 1 when the job is invalid or produced no records,
2 on I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ExtractorError
from .extract import extract
from .job import DEFAULT_PREFIX_TOKENS, ExtractionJob


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcs-extract",
        description="Extract per-step sampling statistics from a causal "
        "language model into a coverage trace.",
    )
    parser.add_argument("--model", required=True, help="model identifier or local path")
    parser.add_argument("--contexts", required=True, help="contexts JSONL from the selection stage")
    parser.add_argument("--out", required=True, help="trace JSONL to write")
    parser.add_argument(
        "--temps", default="0.7,1.0,1.5",
        help="comma-separated temperatures to record (default %(default)s)",
    )
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu", help="torch device (default %(default)s)")
    parser.add_argument(
        "--prefix-tokens", type=int, default=DEFAULT_PREFIX_TOKENS,
        help="context tokens kept before the word (default %(default)s)",
    )
    parser.add_argument(
        "--targets", default=None,
        help="target-set JSON; labels each record with the word's frequency rank",
    )
    parser.add_argument(
        "--chat-template", action="store_true",
        help="wrap each prefix as a user turn with the tokenizer chat template",
    )
    return parser


def _parse_temps(text: str) -> tuple[float, ...]:
    try:
        temps = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ExtractorError(f"invalid temperature list {text!r}") from None
    return temps


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            model=args.model,
            contexts_path=args.contexts,
            out_path=args.out,
            temperatures=_parse_temps(args.temps),
            batch_size=args.batch_size,
            device=args.device,
            prefix_tokens=args.prefix_tokens,
            targets_path=args.targets,
            apply_chat_template=args.chat_template,
        )
        summary = extract(job)
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"extracted {summary.records_written} records"
        f" ({len(summary.skipped)} skipped) -> {summary.out_path}"
    )
    if summary.records_written == 0:
        print("error: no records were extracted", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
