"""ICD-10 category codes, chapter ranges, and code vocabularies.

Codes live at the three-character category level (e.g. ``C34``) and are
represented as plain validated strings throughout the package.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Sequence

from .errors import UnmappedCodeError, ValidationError

_CODE_RE = re.compile(r"^[A-Z][0-9A-Z]{2}$")


def validate_code(text: str) -> str:
    """Canonicalize and validate a three-character ICD-10 category.

    Uppercases the input; raises ValidationError unless the result is one
    uppercase letter followed by two characters in [0-9A-Z].
    """
    if not isinstance(text, str):
        raise ValidationError(f"code must be a string, got {type(text).__name__}")
    code = text.strip().upper()
    if not _CODE_RE.match(code):
        raise ValidationError(f"invalid ICD-10 category: {text!r}")
    return code


def is_valid_code(text: str) -> bool:
    return isinstance(text, str) and bool(_CODE_RE.match(text.strip().upper()))


def is_cancer(code: str) -> bool:
    """Cancer predicate used for degree slices: C-block codes only.

    Benign and in-situ neoplasms (D00-D48) count as non-cancer.
    """
    return code.startswith("C")


@dataclass(frozen=True)
class Chapter:
    """One ICD-10 chapter: an inclusive range of category codes."""

    index: int
    start: str
    end: str
    label: str

    def contains(self, code: str) -> bool:
        return self.start <= code <= self.end


def _load_chapter_table() -> tuple[Chapter, ...]:
    text = resources.files("comorbid.data").joinpath("icd10_chapters.csv").read_text("utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    chapters = tuple(
        Chapter(int(r["index"]), validate_code(r["start"]), validate_code(r["end"]), r["label"])
        for r in rows
    )
    ordered = sorted(chapters, key=lambda ch: ch.start)
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.start <= prev.end:
            raise ValidationError(
                f"chapter ranges overlap: {prev.index} ({prev.start}-{prev.end}) "
                f"and {nxt.index} ({nxt.start}-{nxt.end})"
            )
    return chapters


_CHAPTERS: tuple[Chapter, ...] | None = None


def chapters() -> tuple[Chapter, ...]:
    global _CHAPTERS
    if _CHAPTERS is None:
        _CHAPTERS = _load_chapter_table()
    return _CHAPTERS


def chapter_of(code: str) -> Chapter:
    """Return the unique chapter whose range contains `code`.

    Raises UnmappedCodeError for codes in inter-chapter gaps (e.g. D49).
    """
    code = validate_code(code)
    for ch in chapters():
        if ch.contains(code):
            return ch
    raise UnmappedCodeError(f"unmapped code: {code}")


class Vocabulary:
    """Ordered set of distinct category codes with positional lookup."""

    __slots__ = ("codes", "index")

    def __init__(self, codes: Sequence[str]):
        codes = tuple(validate_code(c) for c in codes)
        index = {c: i for i, c in enumerate(codes)}
        if len(index) != len(codes):
            seen: set[str] = set()
            dup = next(c for c in codes if c in seen or seen.add(c))
            raise ValidationError(f"duplicate code in vocabulary: {dup}")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "index", index)

    @classmethod
    def from_codes(cls, codes: Iterable[str]) -> "Vocabulary":
        """Deduplicate and sort lexicographically (the default ordering)."""
        return cls(sorted({validate_code(c) for c in codes}))

    def position(self, code: str) -> int:
        try:
            return self.index[code]
        except KeyError:
            raise ValidationError(f"code not in vocabulary: {code}") from None

    def __setattr__(self, name, value):
        raise AttributeError("Vocabulary is immutable")

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self) -> Iterator[str]:
        return iter(self.codes)

    def __contains__(self, code: object) -> bool:
        return code in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.codes == other.codes

    def __hash__(self) -> int:
        return hash(self.codes)

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.codes)} codes)"
