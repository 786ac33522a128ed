"""Rank-based comparison of interconnection matrices: Spearman with
bootstrap CIs, pseudo-ground-truth PR AUC, and chapter-similarity
statistics over embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codes import chapters
from .embeddings import EmbeddingSet, cosine_matrix
from .errors import ValidationError
from .matrix import InterconnectionMatrix, align
from .transforms import quantile


@dataclass(frozen=True)
class CorrelationResult:
    method_a: str
    method_b: str
    rho: float
    ci_low: float
    ci_high: float
    n_pairs: int
    n_boot: int
    degenerate_skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "method_a": self.method_a,
            "method_b": self.method_b,
            "rho": self.rho,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_pairs": self.n_pairs,
            "n_boot": self.n_boot,
            "degenerate_skipped": self.degenerate_skipped,
        }


@dataclass(frozen=True)
class PrAucResult:
    ground_truth_method: str
    candidate_method: str
    average_precision: float
    n_positive: int
    n_total: int

    def as_dict(self) -> dict:
        return {
            "ground_truth_method": self.ground_truth_method,
            "candidate_method": self.candidate_method,
            "average_precision": self.average_precision,
            "n_positive": self.n_positive,
            "n_total": self.n_total,
        }


def vectorize_aligned(
    a: InterconnectionMatrix, b: InterconnectionMatrix
) -> tuple[np.ndarray, np.ndarray]:
    """Strict upper-triangle vectors of both matrices restricted to their
    common vocabulary, in the same pair order."""
    if not (a.symmetric and b.symmetric):
        raise ValidationError("vectorize_aligned expects symmetrized matrices")
    aa, bb = align(a, b)
    return aa.upper_triangle(), bb.upper_triangle()


def midranks(values: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1; tied values share the average of their ranks."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    boundary = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1], True])
    sizes = np.diff(boundary)
    starts = boundary[:-1]
    group_rank = starts + (sizes - 1) / 2.0 + 1.0
    ranks = np.empty(x.size, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, sizes)
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of midranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("spearman needs two equal-length vectors")
    if x.size < 3:
        raise ValidationError("spearman needs at least 3 observations")
    rx = midranks(x)
    ry = midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    vx = float(rx @ rx)
    vy = float(ry @ ry)
    if vx == 0.0 or vy == 0.0:
        raise ValidationError("spearman undefined: zero rank variance")
    return float((rx @ ry) / np.sqrt(vx * vy))


def bootstrap_spearman(
    x: Sequence[float],
    y: Sequence[float],
    n_boot: int = 500,
    seed: int = 0,
    method_a: str = "a",
    method_b: str = "b",
) -> CorrelationResult:
    """Percentile bootstrap over (x_i, y_i) pairs with replacement.

    Replicates whose resample has zero rank variance in either vector are
    skipped and counted; more than half degenerate is an error. Each
    replicate draws from its own child seed, so the result is
    deterministic regardless of evaluation order.
    """
    if n_boot < 1:
        raise ValidationError("n_boot must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rho = spearman(x, y)
    n = x.size
    children = np.random.SeedSequence(seed).spawn(n_boot)
    replicates: list[float] = []
    skipped = 0
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n)
        try:
            replicates.append(spearman(x[idx], y[idx]))
        except ValidationError:
            skipped += 1
    if skipped * 2 > n_boot:
        raise ValidationError(
            f"{skipped}/{n_boot} bootstrap replicates degenerate; "
            "correlation CI is meaningless on this input"
        )
    reps = np.asarray(replicates)
    ci_low = float(np.percentile(reps, 2.5))
    ci_high = float(np.percentile(reps, 97.5))
    return CorrelationResult(
        method_a=method_a,
        method_b=method_b,
        rho=rho,
        ci_low=min(ci_low, rho),
        ci_high=max(ci_high, rho),
        n_pairs=int(n),
        n_boot=n_boot,
        degenerate_skipped=skipped,
    )


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AP = sum over descending-score groups of (R_k - R_{k-1}) * P_k.

    Tied scores enter as one group, so the value is deterministic under
    any input ordering.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(labels)
    if s.shape != t.shape or s.ndim != 1 or s.size == 0:
        raise ValidationError("scores and labels must be equal-length vectors")
    if not np.all((t == 0) | (t == 1)):
        raise ValidationError("labels must be 0/1")
    total_pos = int(t.sum())
    if total_pos == 0 or total_pos == t.size:
        raise ValidationError("average precision needs both classes present")
    order = np.argsort(-s, kind="stable")
    s = s[order]
    t = t[order]
    boundary = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(t)[boundary]
    seen = boundary + 1
    precision = tp / seen
    recall = tp / total_pos
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def pr_auc(
    ground_truth: InterconnectionMatrix,
    candidate: InterconnectionMatrix,
    gt_quantile: float = 0.95,
) -> PrAucResult:
    """Average precision of the candidate's upper-triangle scores against
    labels derived from the ground-truth matrix: an entry is positive when
    strictly above the gt_quantile of the ground truth's off-diagonal."""
    if not 0.0 < gt_quantile < 1.0:
        raise ValidationError("gt_quantile must lie in (0, 1)")
    if not (ground_truth.symmetric and candidate.symmetric):
        raise ValidationError("pr_auc expects symmetrized matrices")
    gt, cand = align(ground_truth, candidate)
    bound = quantile(gt.off_diagonal(), gt_quantile)
    labels = (gt.upper_triangle() > bound).astype(np.int64)
    scores = cand.upper_triangle()
    ap = average_precision(scores, labels)
    return PrAucResult(
        ground_truth_method=ground_truth.method_name,
        candidate_method=candidate.method_name,
        average_precision=ap,
        n_positive=int(labels.sum()),
        n_total=int(labels.size),
    )


@dataclass(frozen=True)
class ChapterStats:
    chapter_index: int
    label: str
    n_codes: int
    n_pairs: int
    mean: float
    sd: float


@dataclass(frozen=True)
class ChapterSimilarityStats:
    per_chapter: tuple[ChapterStats, ...]
    skipped_chapters: tuple[int, ...]
    pair_values: np.ndarray


def chapter_similarity_stats(
    emb: EmbeddingSet,
    pairs: set[tuple[str, str]] | Sequence[tuple[str, str]] = (),
) -> ChapterSimilarityStats:
    """Intra-chapter cosine-similarity mean and sd per chapter, plus the
    cosine values for a supplied pair set (for histogram emission).

    Chapters with fewer than two codes in the vocabulary are skipped and
    listed. Every supplied pair member must be in the vocabulary.
    """
    cos = cosine_matrix(emb, l2_normalize=True)
    vocab = emb.vocab
    stats: list[ChapterStats] = []
    skipped: list[int] = []
    for chap in chapters():
        members = [c for c in vocab if chap.contains(c)]
        if len(members) < 2:
            skipped.append(chap.index)
            continue
        idx = np.asarray([vocab.position(c) for c in members])
        block = cos.values[np.ix_(idx, idx)]
        vals = block[np.triu_indices(len(idx), k=1)]
        stats.append(ChapterStats(
            chapter_index=chap.index,
            label=chap.label,
            n_codes=len(members),
            n_pairs=int(vals.size),
            mean=float(vals.mean()),
            sd=float(vals.std()),
        ))
    values = []
    for a, b in sorted(pairs):
        ia = vocab.position(a)
        ib = vocab.position(b)
        values.append(float(cos.values[ia, ib]))
    return ChapterSimilarityStats(
        per_chapter=tuple(stats),
        skipped_chapters=tuple(skipped),
        pair_values=np.asarray(values, dtype=np.float64),
    )
