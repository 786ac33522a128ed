"""Cohort ingestion: raw diagnosis records to normalized code sequences.

Normalization order per record: optional ICD-9 to ICD-10 crosswalk lookup,
truncation to the three-character category, validation, then per-admission
deduplication. Codes that fail validation are dropped and counted; the load
aborts only when more than half of all rows are unusable.
"""

from __future__ import annotations

import csv
import logging
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codes import Vocabulary, is_valid_code, validate_code
from .errors import FormatError, ValidationError

log = logging.getLogger(__name__)

COHORT_HEADER = ("patient_id", "admission_index", "icd_code")


@dataclass(frozen=True)
class RawRecord:
    """One diagnosis row before normalization."""

    patient_id: str
    admission_index: int
    code: str


@dataclass(frozen=True)
class PatientSequence:
    """Deduplicated (admission_index, code) events, sorted by admission
    then code; within one admission each code appears once."""

    patient_id: str
    events: tuple[tuple[int, str], ...]

    def __len__(self) -> int:
        return len(self.events)

    def codes(self) -> tuple[str, ...]:
        return tuple(code for _, code in self.events)


@dataclass(frozen=True)
class Cohort:
    patients: tuple[PatientSequence, ...]
    vocab: Vocabulary = field(init=False)

    def __post_init__(self):
        observed = {code for p in self.patients for _, code in p.events}
        object.__setattr__(self, "vocab", Vocabulary(sorted(observed)))

    def __len__(self) -> int:
        return len(self.patients)


@dataclass
class IngestStats:
    rows: int = 0
    invalid: int = 0
    mapped: int = 0
    deduplicated: int = 0


def load_gem(path: str | Path) -> dict[str, str]:
    """Load an ICD-9 to ICD-10 crosswalk TSV (source_code, target_code).

    A source listed with several targets keeps the first listed target;
    later rows are logged as collisions.
    """
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or not {"source_code", "target_code"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: expected TSV columns source_code, target_code")
        for row in reader:
            src = row["source_code"].strip().upper()
            dst = row["target_code"].strip().upper()
            if not src or not dst:
                continue
            if src in mapping:
                if mapping[src] != dst:
                    log.warning("crosswalk collision for %s: keeping %s, ignoring %s",
                                src, mapping[src], dst)
                continue
            mapping[src] = dst
    return mapping


def normalize_code(raw: str, gem: dict[str, str] | None = None) -> str | None:
    """Map (if a crosswalk row exists), truncate to the category level,
    validate. Returns None for codes that do not survive."""
    code = raw.strip().upper()
    if not code:
        return None
    if gem:
        code = gem.get(code, code)
    code = code[:3]
    return code if is_valid_code(code) else None


def _build_cohort(events_by_patient: dict[str, set[tuple[int, str]]],
                  order: Sequence[str]) -> Cohort:
    patients = tuple(
        PatientSequence(pid, tuple(sorted(events_by_patient[pid])))
        for pid in order
    )
    return Cohort(patients=patients)


def load_cohort(path: str | Path, gem: dict[str, str] | None = None) -> Cohort:
    """Parse a long-format cohort CSV into a normalized Cohort.

    The file must carry the header columns patient_id, admission_index,
    icd_code. Patients keep their first-appearance order; reloading a
    serialized cohort reproduces it exactly.
    """
    stats = IngestStats()
    events: dict[str, set[tuple[int, str]]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(COHORT_HEADER) <= set(reader.fieldnames):
            raise FormatError(
                f"{path}: expected CSV header with columns {', '.join(COHORT_HEADER)}"
            )
        for row in reader:
            stats.rows += 1
            pid = (row["patient_id"] or "").strip()
            raw_code = row["icd_code"] or ""
            try:
                adm = int(row["admission_index"])
            except (TypeError, ValueError):
                adm = -1
            code = normalize_code(raw_code, gem)
            if not pid or adm < 0 or code is None:
                stats.invalid += 1
                continue
            if gem and raw_code.strip().upper() in gem:
                stats.mapped += 1
            if pid not in events:
                events[pid] = set()
                order.append(pid)
            if (adm, code) in events[pid]:
                stats.deduplicated += 1
            else:
                events[pid].add((adm, code))
    if stats.rows == 0:
        raise FormatError(f"{path}: no data rows")
    if stats.invalid * 2 > stats.rows:
        raise ValidationError(
            f"{path}: {stats.invalid}/{stats.rows} rows invalid (>50%); "
            "refusing to build a cohort from this file"
        )
    if stats.invalid or stats.deduplicated:
        log.info("ingest %s: %d rows, %d invalid dropped, %d duplicates removed, %d mapped",
                 path, stats.rows, stats.invalid, stats.deduplicated, stats.mapped)
    return _build_cohort(events, order)


def save_cohort(cohort: Cohort, path: str | Path) -> None:
    """Serialize in the same long format accepted by load_cohort."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(COHORT_HEADER) + "\n")
        for patient in cohort.patients:
            for adm, code in patient.events:
                fh.write(f"{patient.patient_id},{adm},{code}\n")


def filter_lengths(cohort: Cohort, min_len: int, max_len: int) -> Cohort:
    """Keep patients whose deduplicated event count lies in [min_len, max_len]."""
    if not (1 <= min_len <= max_len):
        raise ValidationError(f"invalid length bounds [{min_len}, {max_len}]")
    kept = tuple(p for p in cohort.patients if min_len <= len(p) <= max_len)
    return Cohort(patients=kept)


def _filler_codes(exclude: set[str]) -> Iterable[str]:
    for letter in string.ascii_uppercase:
        for num in range(100):
            code = f"{letter}{num:02d}"
            if code not in exclude:
                yield code


def synth_cohort(
    n_patients: int,
    vocab_size: int,
    planted_pairs: Sequence[tuple[str, str, float]],
    seed: int,
    base_rate: float = 0.1,
    max_admissions: int = 5,
) -> Cohort:
    """Generate a synthetic cohort with known pairwise structure.

    Codes are independently present with probability `base_rate`, except
    planted pairs whose joint probability is multiplied by `lift` while
    both marginals stay at `base_rate` exactly. Output is deterministic
    per seed. A code may belong to at most one planted pair.
    """
    if vocab_size < 2:
        raise ValidationError("vocab_size must be at least 2")
    if not 0.0 < base_rate < 0.5:
        raise ValidationError("base_rate must lie in (0, 0.5)")
    planted: list[tuple[str, str, float]] = []
    used: set[str] = set()
    for ca, cb, lift in planted_pairs:
        ca, cb = validate_code(ca), validate_code(cb)
        if ca == cb:
            raise ValidationError(f"planted pair repeats code {ca}")
        if ca in used or cb in used:
            raise ValidationError("a code may appear in at most one planted pair")
        if lift < 1.0:
            raise ValidationError(f"planted lift must be >= 1, got {lift}")
        if lift * base_rate > 1.0:
            raise ValidationError(
                f"lift {lift} with base rate {base_rate} would exceed a valid joint probability"
            )
        used.update((ca, cb))
        planted.append((ca, cb, float(lift)))
    if len(used) > vocab_size:
        raise ValidationError(
            f"planted codes ({len(used)}) exceed vocab_size ({vocab_size}); "
            "planted code outside generated vocab"
        )

    codes = sorted(used)
    filler = _filler_codes(used)
    while len(codes) < vocab_size:
        codes.append(next(filler))
    codes = sorted(codes)
    background = [c for c in codes if c not in used]

    rng = np.random.default_rng(seed)
    pi = base_rate
    patients = []
    for p in range(n_patients):
        present: list[str] = []
        for ca, cb, lift in planted:
            q_joint = lift * pi * pi
            u = rng.random()
            if u < q_joint:
                present += [ca, cb]
            elif u < pi:
                present.append(ca)
            elif u < 2 * pi - q_joint:
                present.append(cb)
        draws = rng.random(len(background))
        present += [c for c, u in zip(background, draws) if u < pi]
        if not present:
            continue
        present.sort()
        n_adm = int(rng.integers(1, max_admissions + 1))
        adm = rng.integers(0, n_adm, size=len(present))
        events = tuple(sorted(zip((int(x) for x in adm), present)))
        patients.append(PatientSequence(f"p{p:06d}", events))
    return Cohort(patients=tuple(patients))
