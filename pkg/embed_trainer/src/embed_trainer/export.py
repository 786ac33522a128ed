"""Writing and extracting code embeddings in the shared CSV format.

The boundary format is a CSV with header ``code,d0,...,d{D-1}`` and one
row per code; values are rendered with 9 significant digits.  Files in
this layout are consumed downstream to build cosine-similarity
matrices, so rows must be unique, rectangular and finite.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import torch

from .errors import FormatError, ValidationError
from .model import MlmEncoder

logger = logging.getLogger(__name__)

#: Renders one embedding value for the CSV boundary format.
_FORMAT = "%.9g"


def save_embeddings(
    codes: Sequence[str], vectors: np.ndarray, path: Path | str
) -> None:
    """Write an embedding matrix to the shared ``code,d0,...`` CSV."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(codes):
        raise ValidationError(
            f"expected one vector per code: {len(codes)} codes, "
            f"array shape {vectors.shape}"
        )
    if len(set(codes)) != len(codes):
        raise ValidationError("duplicate codes in embedding export")
    if not np.isfinite(vectors).all():
        raise ValidationError("embedding vectors must be finite")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["code"] + [f"d{i}" for i in range(vectors.shape[1])])
        for code, row in zip(codes, vectors):
            writer.writerow([code] + [_FORMAT % value for value in row])


def load_embeddings(path: Path | str) -> tuple[list[str], np.ndarray]:
    """Read a ``code,d0,...`` CSV back into codes and a float matrix."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"embedding file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "code" or len(header) < 2:
            raise FormatError(f"{path}: expected header code,d0,..., got {header!r}")
        width = len(header) - 1
        codes: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected {width + 1} fields, got {len(row)}"
                )
            try:
                rows.append([float(value) for value in row[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from exc
            codes.append(row[0])
    if len(set(codes)) != len(codes):
        raise FormatError(f"{path}: duplicate codes")
    if not codes:
        raise FormatError(f"{path}: no embedding rows")
    return codes, np.asarray(rows, dtype=np.float64)


def export_embeddings(
    model: MlmEncoder, vocab: Sequence[str], path: Path | str
) -> np.ndarray:
    """Write the model's code-embedding table to ``path``.

    Rows follow ``vocab`` order, one per real code, with the model's
    embedding width.  Returns the exported matrix.
    """
    with torch.no_grad():
        vectors = model.code_embeddings().numpy().astype(np.float64)
    if vectors.shape[0] != len(vocab):
        raise ValidationError(
            f"model embeds {vectors.shape[0]} codes but vocab has {len(vocab)}"
        )
    save_embeddings(vocab, vectors, path)
    return vectors


def extract_pretrained_embeddings(
    model_id: str,
    descriptions: Mapping[str, str],
    *,
    encoder: Callable[[str], np.ndarray] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Embed code descriptions with a pretrained text encoder.

    Each description is encoded and represented by the final hidden
    state at the first (classification) position, then L2-normalized
    to unit length.  Codes whose description is missing or empty are
    skipped with a warning.  ``encoder`` maps one text to its vector
    and is resolved from ``model_id`` via ``transformers`` when not
    supplied.  Codes are processed in sorted order.
    """
    if encoder is None:
        encoder = _build_encoder(model_id)
    codes: list[str] = []
    rows: list[np.ndarray] = []
    for code in sorted(descriptions):
        text = descriptions[code]
        if not text or not text.strip():
            logger.warning("skipping %s: no description", code)
            continue
        vector = np.asarray(encoder(text), dtype=np.float64).reshape(-1)
        norm = float(np.linalg.norm(vector))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValidationError(f"encoder returned a degenerate vector for {code}")
        codes.append(code)
        rows.append(vector / norm)
    if not codes:
        raise ValidationError("no code has a usable description")
    widths = {row.size for row in rows}
    if len(widths) != 1:
        raise ValidationError(f"encoder returned mixed vector widths: {sorted(widths)}")
    return codes, np.vstack(rows)


def _build_encoder(model_id: str) -> Callable[[str], np.ndarray]:
    """First-position final-hidden-state encoder from a transformers model."""
    from transformers import AutoModel, AutoTokenizer  # deferred heavy import

    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModel.from_pretrained(model_id)
    model.eval()

    def encode(text: str) -> np.ndarray:
        batch = tokenizer(text, return_tensors="pt", truncation=True)
        with torch.no_grad():
            output = model(**batch)
        return output.last_hidden_state[0, 0].numpy()

    return encode
