"""Embedding file ingestion and cosine similarity matrices.

The embedding CSV format: header `code,d0,...,d{D-1}`, one row per code,
all rows the same width, values finite. Files round-trip through
save_embeddings/load_embeddings at 9 significant digits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codes import Vocabulary
from .errors import FormatError, ValidationError
from .matrix import FLOAT_FMT, InterconnectionMatrix, format_value


@dataclass(frozen=True)
class EmbeddingSet:
    vocab: Vocabulary
    vectors: np.ndarray
    source_name: str = "embedding"

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValidationError("embedding vectors must form a 2-D array")
        if vectors.shape[0] != len(self.vocab):
            raise ValidationError(
                f"{vectors.shape[0]} vectors for {len(self.vocab)} codes"
            )
        if vectors.shape[1] < 1:
            raise ValidationError("embedding dimension must be at least 1")
        if not np.all(np.isfinite(vectors)):
            raise ValidationError("embedding vectors must be finite")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)


def load_embeddings(path: str | Path, source_name: str | None = None) -> EmbeddingSet:
    """Read an embedding CSV. Duplicate codes, ragged rows, and
    non-numeric or non-finite values are format errors."""
    path = Path(path)
    codes: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "code" or len(header) < 2:
            raise FormatError(f"{path}: expected header `code,d0,...`")
        width = len(header) - 1
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise FormatError(f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}")
            code = row[0].strip()
            if code in seen:
                raise FormatError(f"{path}:{lineno}: duplicate code {code}")
            seen.add(code)
            try:
                values = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from exc
            codes.append(code)
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no embedding rows")
    vectors = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(vectors)):
        raise FormatError(f"{path}: non-finite embedding values")
    name = source_name if source_name is not None else path.stem
    return EmbeddingSet(vocab=Vocabulary(codes), vectors=vectors, source_name=name)


def save_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code," + ",".join(f"d{i}" for i in range(emb.dim)) + "\n")
        for code, vec in zip(emb.vocab, emb.vectors):
            fh.write(code + "," + ",".join(format_value(x) for x in vec) + "\n")


def cosine_matrix(emb: EmbeddingSet, l2_normalize: bool = True) -> InterconnectionMatrix:
    """Pairwise cosine similarities: out[i][j] = <v_i, v_j> / (|v_i| |v_j|).

    With l2_normalize the vectors are scaled to unit norm first; every
    norm must be nonzero. Without it the vectors are trusted to be unit
    norm already and plain dot products are taken. Output is clamped to
    [-1, 1] with an exact unit diagonal.
    """
    if l2_normalize:
        norms = np.linalg.norm(emb.vectors, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ValidationError(f"zero embedding vector for code {emb.vocab.codes[zero[0]]}")
        unit = emb.vectors / norms[:, None]
    else:
        unit = emb.vectors
    values = np.clip(unit @ unit.T, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    values = np.maximum(values, values.T)
    return InterconnectionMatrix(
        vocab=emb.vocab,
        values=values,
        kind="similarity",
        symmetric=True,
        method_name=emb.source_name,
    )


__all__ = [
    "EmbeddingSet",
    "load_embeddings",
    "save_embeddings",
    "cosine_matrix",
    "FLOAT_FMT",
]
