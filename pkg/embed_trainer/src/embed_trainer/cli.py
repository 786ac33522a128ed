"""Command-line interface: ``embed train`` and ``embed extract``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import MlmConfig
from .data import load_sequences
from .errors import FormatError, TrainerError
from .export import export_embeddings, extract_pretrained_embeddings, save_embeddings
from .training import train_mlm


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed",
        description="Train code embeddings from cohort sequences or "
        "extract them from a pretrained text encoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a masked-code model on a cohort CSV")
    train.add_argument("--cohort", required=True, type=Path, help="cohort CSV input")
    train.add_argument("--out", required=True, type=Path, help="embedding CSV output")
    train.add_argument("--seed", required=True, type=int, help="training seed")
    train.add_argument(
        "--max-epochs", type=int, default=None, help="override the epoch budget"
    )
    train.add_argument(
        "--batch-size", type=int, default=None, help="override the batch size"
    )

    extract = sub.add_parser(
        "extract", help="embed code descriptions with a pretrained encoder"
    )
    extract.add_argument("--model", required=True, help="pretrained model identifier")
    extract.add_argument(
        "--descriptions",
        required=True,
        type=Path,
        help="CSV with header code,description",
    )
    extract.add_argument("--out", required=True, type=Path, help="embedding CSV output")
    return parser


def _load_descriptions(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise FormatError(f"descriptions file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["code", "description"]:
            raise FormatError(
                f"{path}: expected header code,description, got {header!r}"
            )
        out: dict[str, str] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(
                    f"{path}:{lineno}: expected 2 fields, got {len(row)}"
                )
            code = row[0].strip()
            if not code:
                raise FormatError(f"{path}:{lineno}: empty code")
            if code in out:
                raise FormatError(f"{path}:{lineno}: duplicate code {code}")
            out[code] = row[1]
    if not out:
        raise FormatError(f"{path}: no description rows")
    return out


def _cmd_train(args: argparse.Namespace) -> int:
    config = MlmConfig(seed=args.seed)
    if args.max_epochs is not None:
        config = replace(config, max_epochs=args.max_epochs)
    if args.batch_size is not None:
        config = replace(config, batch_size=args.batch_size)
    sequences = load_sequences(args.cohort)
    result = train_mlm(sequences, config)
    vectors = export_embeddings(result.model, result.vocab, args.out)
    last = result.log.epochs[-1]
    print(
        json.dumps(
            {
                "codes": len(result.vocab),
                "dim": vectors.shape[1],
                "epochs": last.epoch,
                "best_epoch": result.log.best_epoch,
                "val_loss": round(last.val_loss, 6),
                "val_accuracy": round(last.val_accuracy, 6),
                "stopped_early": result.log.stopped_early,
                "out": str(args.out),
            }
        )
    )
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    descriptions = _load_descriptions(args.descriptions)
    codes, vectors = extract_pretrained_embeddings(args.model, descriptions)
    save_embeddings(codes, vectors, args.out)
    print(
        json.dumps(
            {
                "codes": len(codes),
                "dim": vectors.shape[1],
                "skipped": len(descriptions) - len(codes),
                "out": str(args.out),
            }
        )
    )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_extract(args)
    except (TrainerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
