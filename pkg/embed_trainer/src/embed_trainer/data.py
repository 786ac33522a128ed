"""Cohort CSV loading and synthetic corpora.

The input format is the shared cohort layout: a CSV with header
``patient_id,admission_index,icd_code``, one row per recorded code.
Rows belonging to one patient form that patient's code sequence,
ordered by admission index (stable on ties) with repeated codes
collapsed to their first occurrence.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import MAX_SEQUENCE_LEN, MIN_SEQUENCE_LEN
from .errors import FormatError, ValidationError

COHORT_HEADER = ("patient_id", "admission_index", "icd_code")


def load_sequences(
    path: Path | str,
    *,
    min_len: int = MIN_SEQUENCE_LEN,
    max_len: int = MAX_SEQUENCE_LEN,
) -> list[list[str]]:
    """Read per-patient code sequences from a cohort CSV.

    Patients whose sequence length falls outside ``[min_len, max_len]``
    are dropped; the bounds default to the admissible training range.
    Raises :class:`FormatError` for a malformed file and
    :class:`ValidationError` if no patient survives the length filter.
    """
    path = Path(path)
    if min_len < 1 or max_len < min_len:
        raise ValidationError(
            f"invalid length bounds [{min_len}, {max_len}]"
        )
    if not path.is_file():
        raise FormatError(f"cohort file {path} does not exist")
    by_patient: dict[str, list[tuple[int, int, str]]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != COHORT_HEADER:
            raise FormatError(
                f"{path}: expected header {','.join(COHORT_HEADER)}, "
                f"got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            patient_id, admission, code = (field.strip() for field in row)
            if not patient_id or not code:
                raise FormatError(f"{path}:{lineno}: empty patient_id or icd_code")
            try:
                admission_index = int(admission)
            except ValueError as exc:
                raise FormatError(
                    f"{path}:{lineno}: admission_index must be an integer, got {admission!r}"
                ) from exc
            by_patient.setdefault(patient_id, []).append(
                (admission_index, lineno, code)
            )
    sequences: list[list[str]] = []
    for events in by_patient.values():
        events.sort(key=lambda item: (item[0], item[1]))
        seen: set[str] = set()
        codes: list[str] = []
        for _, _, code in events:
            if code not in seen:
                seen.add(code)
                codes.append(code)
        if min_len <= len(codes) <= max_len:
            sequences.append(codes)
    if not sequences:
        raise ValidationError(
            f"{path}: no patient has between {min_len} and {max_len} distinct codes"
        )
    return sequences


def build_vocab(sequences: Sequence[Sequence[str]]) -> list[str]:
    """Sorted list of distinct codes appearing in ``sequences``."""
    codes: set[str] = set()
    for seq in sequences:
        codes.update(seq)
    return sorted(codes)


def synth_markov_sequences(
    n_sequences: int,
    vocab_size: int,
    seed: int,
    *,
    min_len: int = MIN_SEQUENCE_LEN,
    max_len: int = 40,
    persistence: float = 0.9,
) -> list[list[str]]:
    """Generate code sequences from a cyclic first-order Markov chain.

    With probability ``persistence`` the next code is the successor of
    the current one on a cycle over the vocabulary; otherwise it is
    drawn uniformly.  The structure is learnable from context, which
    makes the corpus useful for verifying that training beats the
    uniform-guessing baseline.  Codes are named ``M00``, ``M01``, ...
    """
    if n_sequences < 1 or vocab_size < 2:
        raise ValidationError("need at least one sequence over at least two codes")
    if not 0.0 <= persistence <= 1.0:
        raise ValidationError(f"persistence must be in [0, 1], got {persistence}")
    if min_len < 2 or max_len < min_len:
        raise ValidationError(f"invalid length bounds [{min_len}, {max_len}]")
    codes = [f"M{i:02d}" for i in range(vocab_size)]
    rng = np.random.default_rng(seed)
    sequences: list[list[str]] = []
    for _ in range(n_sequences):
        length = int(rng.integers(min_len, max_len + 1))
        state = int(rng.integers(vocab_size))
        seq = [state]
        while len(seq) < length:
            if rng.random() < persistence:
                state = (state + 1) % vocab_size
            else:
                state = int(rng.integers(vocab_size))
            seq.append(state)
        sequences.append([codes[i] for i in seq])
    return sequences
