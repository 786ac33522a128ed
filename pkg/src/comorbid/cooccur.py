"""Co-occurrence counting, the Jaccard matrix, and Fisher's exact test
with Benjamini-Hochberg FDR control.

The contingency table for an ordered pair (i, j) is laid out as

    a = patients whose first occurrence of i strictly precedes j's
    b = patients with i but not counted in a
    c = patients with j but without i
    d = everyone else

so the one-sided (greater) test asks whether i-before-j is enriched given
how common i and j are. First occurrences sharing an admission count toward
the joint total but toward neither ordered direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .codes import Vocabulary
from .errors import ValidationError
from .ingest import Cohort
from .matrix import InterconnectionMatrix

FDR_Q = 0.05

_lf_cache = _kernels.log_factorials(1024)


def _log_factorial_table(n: int) -> np.ndarray:
    global _lf_cache
    if n >= len(_lf_cache):
        _lf_cache = _kernels.log_factorials(max(n, 2 * len(_lf_cache)))
    return _lf_cache


@dataclass(frozen=True)
class CooccurrenceCounts:
    """Patient-level counts: ordered (strict first-occurrence precedence),
    joint (both codes anywhere), and marginal totals."""

    vocab: Vocabulary
    ordered: np.ndarray
    joint: np.ndarray
    marginal: np.ndarray
    total_patients: int

    def __post_init__(self):
        n = len(self.vocab)
        for name in ("ordered", "joint"):
            arr = getattr(self, name)
            if arr.shape != (n, n):
                raise ValidationError(f"{name} counts shape {arr.shape} != ({n}, {n})")
        if self.marginal.shape != (n,):
            raise ValidationError("marginal vector length mismatch")
        for arr in (self.ordered, self.joint, self.marginal):
            arr.setflags(write=False)


@dataclass(frozen=True)
class FisherResult:
    code_i: str
    code_j: str
    odds_ratio: float
    p_raw: float
    p_adjusted: float
    significant: bool


def count_cooccurrences(cohort: Cohort) -> CooccurrenceCounts:
    """Count ordered/joint/marginal patient totals for every code pair.

    Each patient contributes at most one to any cell; order is decided by
    first-occurrence admission index with strict inequality.
    """
    if not cohort.patients:
        raise ValidationError("cannot count co-occurrences of an empty cohort")
    vocab = cohort.vocab
    code_idx: list[int] = []
    adm_idx: list[int] = []
    offsets = [0]
    for patient in cohort.patients:
        firsts: dict[str, int] = {}
        for adm, code in patient.events:
            if code not in firsts:
                firsts[code] = adm
        for code, adm in firsts.items():
            code_idx.append(vocab.position(code))
            adm_idx.append(adm)
        offsets.append(len(code_idx))
    ordered, joint, marginal = _kernels.count_events(
        np.asarray(code_idx, dtype=np.int64),
        np.asarray(adm_idx, dtype=np.int64),
        np.asarray(offsets, dtype=np.int64),
        len(vocab),
    )
    return CooccurrenceCounts(
        vocab=vocab,
        ordered=ordered,
        joint=joint,
        marginal=marginal,
        total_patients=len(cohort.patients),
    )


def joint_counts_matrix(counts: CooccurrenceCounts) -> InterconnectionMatrix:
    """Symmetric patient-count matrix: joint totals off the diagonal,
    marginals on it."""
    return InterconnectionMatrix(
        vocab=counts.vocab,
        values=counts.joint.astype(np.float64),
        kind="count",
        symmetric=True,
        method_name="counts",
    )


def jaccard_matrix(counts: CooccurrenceCounts) -> InterconnectionMatrix:
    """J[i, j] = joint / (marginal_i + marginal_j - joint); 1 on the
    diagonal for observed codes."""
    joint = counts.joint.astype(np.float64)
    m = counts.marginal.astype(np.float64)
    denom = m[:, None] + m[None, :] - joint
    values = np.divide(joint, denom, out=np.zeros_like(joint), where=denom > 0)
    return InterconnectionMatrix(
        vocab=counts.vocab,
        values=values,
        kind="similarity",
        symmetric=True,
        method_name="jaccard",
    )


def fisher_exact_one_sided(a: int, b: int, c: int, d: int) -> tuple[float, float]:
    """One-sided (greater) Fisher exact p-value and odds ratio.

    p = P(X >= a) for X hypergeometric with the table's margins, computed
    in log space. The odds ratio is ad/bc, with the Haldane-Anscombe +0.5
    applied to every cell whenever any cell is zero.
    """
    cells = (a, b, c, d)
    if any(int(x) != x for x in cells):
        raise ValidationError("contingency cells must be integers")
    a, b, c, d = (int(x) for x in cells)
    if min(a, b, c, d) < 0:
        raise ValidationError("contingency cells must be non-negative")
    n = a + b + c + d
    if n < 1:
        raise ValidationError("contingency table must contain at least one count")
    lf = _log_factorial_table(n)
    p = float(_kernels.fisher_greater_p(a, b, c, d, lf))
    if min(a, b, c, d) == 0:
        odds = ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5))
    else:
        odds = (a * d) / (b * c)
    return p, odds


def benjamini_hochberg(p: np.ndarray) -> np.ndarray:
    """Step-up FDR adjustment: adjusted[k] = min over ranks r >= rank(k)
    of p_(r) * m / r, clamped to 1. Ties are ranked stably."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValidationError("p-value input must be one-dimensional")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValidationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.empty(m, dtype=np.float64)
    adjusted[order] = np.clip(adjusted_sorted, 0.0, 1.0)
    # p * m / r can land one ulp below p when r == m; the true adjusted
    # value is never below the raw one, so restore that invariant exactly
    return np.maximum(adjusted, p)


def fisher_tables(counts: CooccurrenceCounts) -> tuple[np.ndarray, np.ndarray]:
    """All ordered-pair contingency tables with both marginals positive.

    Returns (pairs, tables): pairs is (m, 2) vocabulary indices in row-major
    (i, j) order, tables is (m, 4) cells (a, b, c, d).
    """
    n = len(counts.vocab)
    present = counts.marginal > 0
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    keep = (ii != jj) & present[ii] & present[jj]
    i = ii[keep]
    j = jj[keep]
    a = counts.ordered[i, j]
    b = counts.marginal[i] - a
    c = counts.marginal[j] - counts.joint[i, j]
    d = counts.total_patients - a - b - c
    pairs = np.stack([i, j], axis=1)
    tables = np.stack([a, b, c, d], axis=1).astype(np.int64)
    return pairs, tables


def fisher_method_outputs(
    counts: CooccurrenceCounts,
    matrix_kind: str = "count",
    fdr_q: float = FDR_Q,
) -> tuple[InterconnectionMatrix, list[FisherResult]]:
    """Run the full test battery and assemble the method matrix.

    matrix_kind selects what the returned matrix holds: "count" (ordered
    co-occurrence counts, the default used downstream), "odds_ratio", or
    "pvalue" (BH-adjusted). The result list always covers every ordered
    pair with both marginals positive, FDR-adjusted together.
    """
    if matrix_kind not in ("count", "odds_ratio", "pvalue"):
        raise ValidationError(f"unknown fisher matrix kind: {matrix_kind!r}")
    pairs, tables = fisher_tables(counts)
    lf = _log_factorial_table(counts.total_patients)
    p_raw = _kernels.fisher_greater_p_batch(tables, lf)
    p_adj = benjamini_hochberg(p_raw)

    a = tables[:, 0].astype(np.float64)
    b = tables[:, 1].astype(np.float64)
    c = tables[:, 2].astype(np.float64)
    d = tables[:, 3].astype(np.float64)
    zero = tables.min(axis=1) == 0
    odds = np.where(
        zero,
        ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5)),
        np.divide(a * d, b * c, out=np.zeros_like(a), where=~zero),
    )

    codes = counts.vocab.codes
    results = [
        FisherResult(
            code_i=codes[i],
            code_j=codes[j],
            odds_ratio=float(odds[k]),
            p_raw=float(p_raw[k]),
            p_adjusted=float(p_adj[k]),
            significant=bool(p_adj[k] < fdr_q),
        )
        for k, (i, j) in enumerate(pairs)
    ]

    n = len(counts.vocab)
    if matrix_kind == "count":
        values = counts.ordered.astype(np.float64)
        kind = "count"
    elif matrix_kind == "odds_ratio":
        values = np.zeros((n, n), dtype=np.float64)
        values[pairs[:, 0], pairs[:, 1]] = odds
        kind = "odds_ratio"
    else:
        values = np.ones((n, n), dtype=np.float64)
        values[pairs[:, 0], pairs[:, 1]] = p_adj
        kind = "pvalue"
    matrix = InterconnectionMatrix(
        vocab=counts.vocab,
        values=values,
        kind=kind,
        symmetric=False,
        method_name="fisher",
    )
    return matrix, results


def save_fisher_results(
    results: list[FisherResult],
    path,
    only_significant: bool = False,
) -> None:
    """CSV rows (code_i,code_j,odds_ratio,p_raw,p_adjusted,significant),
    sorted by adjusted p then codes."""
    from pathlib import Path

    from .matrix import FLOAT_FMT

    rows = [r for r in results if r.significant] if only_significant else list(results)
    rows.sort(key=lambda r: (r.p_adjusted, r.code_i, r.code_j))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("code_i,code_j,odds_ratio,p_raw,p_adjusted,significant\n")
        for r in rows:
            fh.write(
                f"{r.code_i},{r.code_j},{FLOAT_FMT % r.odds_ratio},"
                f"{FLOAT_FMT % r.p_raw},{FLOAT_FMT % r.p_adjusted},"
                f"{str(r.significant).lower()}\n"
            )
