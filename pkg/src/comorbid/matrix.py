"""Square code-indexed score matrices and their on-disk format.

Every interconnection method in the pipeline, whatever its source, produces
an InterconnectionMatrix. The CSV layout is fixed so matrices round-trip
byte-identically between runs: cell (0,0) is the literal string ``code``,
the header row and first column carry the vocabulary, and values are written
with 9 significant digits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .codes import Vocabulary
from .errors import EmptyIntersectionError, FormatError, ValidationError

KINDS = ("count", "similarity", "binary", "pvalue", "odds_ratio", "score")

FLOAT_FMT = "%.9g"


def format_value(x: float) -> str:
    return FLOAT_FMT % x


@dataclass(frozen=True)
class InterconnectionMatrix:
    """Dense N x N matrix of pairwise scores over a code vocabulary."""

    vocab: Vocabulary
    values: np.ndarray
    kind: str
    symmetric: bool
    method_name: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        n = len(self.vocab)
        if values.shape != (n, n):
            raise ValidationError(
                f"matrix shape {values.shape} does not match vocabulary size {n}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("matrix contains non-finite entries")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown matrix kind: {self.kind!r}")
        if self.kind == "similarity":
            if values.size and (values.min() < -1.0 or values.max() > 1.0):
                raise ValidationError("similarity entries must lie in [-1, 1]")
        elif self.kind == "binary":
            if not np.all((values == 0.0) | (values == 1.0)):
                raise ValidationError("binary entries must be 0 or 1")
        elif self.kind == "pvalue":
            if values.size and (values.min() < 0.0 or values.max() > 1.0):
                raise ValidationError("p-value entries must lie in [0, 1]")
        elif self.kind == "count":
            if values.size and (values.min() < 0.0 or np.any(values != np.round(values))):
                raise ValidationError("count entries must be non-negative integers")
        elif self.kind == "odds_ratio":
            if values.size and values.min() < 0.0:
                raise ValidationError("odds-ratio entries must be non-negative")
        # kind == "score" admits any finite reals; it marks transform
        # outputs (e.g. clipped counts) whose original range no longer holds
        if self.symmetric and not np.array_equal(values, values.T):
            raise ValidationError("matrix flagged symmetric but values differ from transpose")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.vocab)

    def value(self, code_a: str, code_b: str) -> float:
        return float(self.values[self.vocab.position(code_a), self.vocab.position(code_b)])

    def off_diagonal(self) -> np.ndarray:
        """All entries with i != j, row-major; the basis for quantile statistics."""
        mask = ~np.eye(self.n, dtype=bool)
        return self.values[mask]

    def upper_triangle(self) -> np.ndarray:
        """Strict upper-triangle entries, row-major pair order."""
        iu = np.triu_indices(self.n, k=1)
        return self.values[iu]

    def with_values(self, values: np.ndarray, *, kind: str | None = None,
                    symmetric: bool | None = None) -> "InterconnectionMatrix":
        return replace(
            self,
            values=values,
            kind=self.kind if kind is None else kind,
            symmetric=self.symmetric if symmetric is None else symmetric,
        )

    def symmetrize(self) -> "InterconnectionMatrix":
        return symmetrize(self)


def align(a: InterconnectionMatrix, b: InterconnectionMatrix
          ) -> tuple[InterconnectionMatrix, InterconnectionMatrix]:
    """Restrict both matrices to their common codes, sorted lexicographically.

    Values move with their code labels, not their positions, so the outputs
    agree cell-for-cell on which pair of codes each entry describes.
    """
    common = sorted(set(a.vocab.codes) & set(b.vocab.codes))
    if not common:
        raise EmptyIntersectionError(
            f"empty intersection between {a.method_name!r} and {b.method_name!r} vocabularies"
        )
    vocab = Vocabulary(common)
    ia = np.fromiter((a.vocab.position(c) for c in common), dtype=np.intp, count=len(common))
    ib = np.fromiter((b.vocab.position(c) for c in common), dtype=np.intp, count=len(common))
    return (
        replace(a, vocab=vocab, values=a.values[np.ix_(ia, ia)]),
        replace(b, vocab=vocab, values=b.values[np.ix_(ib, ib)]),
    )


def symmetrize(m: InterconnectionMatrix) -> InterconnectionMatrix:
    """Undirected view of a possibly directed matrix: elementwise max of
    the two directions. Keeps the strongest evidence and leaves quantile
    thresholds monotone; the diagonal is unchanged."""
    return m.with_values(np.maximum(m.values, m.values.T), symmetric=True)


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def save_matrix(m: InterconnectionMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code," + ",".join(m.vocab.codes) + "\n")
        for i, code in enumerate(m.vocab.codes):
            row = ",".join(format_value(v) for v in m.values[i])
            fh.write(f"{code},{row}\n")
    meta = {"method_name": m.method_name, "kind": m.kind, "symmetric": m.symmetric}
    with open(_meta_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matrix(path: str | Path) -> InterconnectionMatrix:
    path = Path(path)
    meta_path = _meta_path(path)
    if not meta_path.exists():
        raise FormatError(f"missing matrix metadata sidecar: {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    for key in ("method_name", "kind", "symmetric"):
        if key not in meta:
            raise FormatError(f"matrix sidecar {meta_path} lacks key {key!r}")

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"empty matrix file: {path}") from None
        if not header or header[0] != "code":
            raise FormatError(f"matrix file {path} must start with a 'code' header cell")
        codes = header[1:]
        vocab = Vocabulary(codes)
        values = np.empty((len(codes), len(codes)), dtype=np.float64)
        n_rows = 0
        for row in reader:
            if not row:
                continue
            if n_rows >= len(codes):
                raise FormatError(f"matrix file {path} has more rows than header codes")
            if row[0] != codes[n_rows]:
                raise FormatError(
                    f"matrix file {path}: row {n_rows + 1} is {row[0]!r}, "
                    f"expected {codes[n_rows]!r}"
                )
            if len(row) != len(codes) + 1:
                raise FormatError(f"matrix file {path}: ragged row for {row[0]!r}")
            try:
                values[n_rows] = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise FormatError(f"matrix file {path}: {exc}") from None
            n_rows += 1
        if n_rows != len(codes):
            raise FormatError(f"matrix file {path} has {n_rows} rows for {len(codes)} codes")

    return InterconnectionMatrix(
        vocab=vocab,
        values=values,
        kind=meta["kind"],
        symmetric=bool(meta["symmetric"]),
        method_name=meta["method_name"],
    )
