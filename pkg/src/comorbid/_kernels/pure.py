"""Pure NumPy fallback for the hot kernels.

Same contract as the compiled module `_ckernels`; selected at import time by
comorbid._kernels when the extension is unavailable or COMORBID_PURE_PYTHON
is set. Both implementations share the log-factorial-table formulation of the
hypergeometric tail so their outputs agree to ~1e-14.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

# The directly-summed tail is always the one excluding the mode, so the
# result never suffers 1-x cancellation on a small p. Terms walking away
# from the mode stop once they can no longer move the sum.
_REL_EPS = 1e-18


def fisher_greater_p(a: int, b: int, c: int, d: int, lf: np.ndarray) -> float:
    """One-sided (greater) Fisher p-value for the table [[a, b], [c, d]].

    `lf` is a log-factorial table with lf[k] == log(k!), long enough to index
    lf[a+b+c+d]. Computed as the upper hypergeometric tail P(X >= a) with
    margins (a+b, a+c) out of a+b+c+d.
    """
    ab = a + b
    ac = a + c
    n = a + b + c + d
    k_min = max(0, ab + ac - n)
    k_max = min(ab, ac)
    if a <= k_min:
        return 1.0
    log_den = lf[n] - lf[ab] - lf[n - ab]
    mode = ((ab + 1) * (ac + 1)) // (n + 2)

    def log_pmf(ks: np.ndarray) -> np.ndarray:
        return (lf[ac] - lf[ks] - lf[ac - ks]
                + lf[n - ac] - lf[ab - ks] - lf[n - ac - ab + ks]
                - log_den)

    if a > mode:
        # the upper tail excludes the mode: sum it directly, full
        # relative accuracy; terms strictly decrease from k = a on
        terms = np.exp(log_pmf(np.arange(a, k_max + 1)))
        keep = _decay_cutoff(terms)
        return float(min(1.0, terms[:keep].sum()))
    # a <= mode: the upper tail holds the majority mass, so sum the lower
    # tail (walking down from a-1, terms strictly decrease) and subtract
    terms = np.exp(log_pmf(np.arange(a - 1, k_min - 1, -1)))
    keep = _decay_cutoff(terms)
    p = 1.0 - terms[:keep].sum()
    return float(min(1.0, max(p, 5e-324)))


def _decay_cutoff(terms: np.ndarray) -> int:
    total = 0.0
    for i, t in enumerate(terms):
        total += t
        if t < total * _REL_EPS:
            return i + 1
    return len(terms)


def fisher_greater_p_batch(tables: np.ndarray, lf: np.ndarray) -> np.ndarray:
    """Vectorized-over-support p-values for an (m, 4) array of tables."""
    tables = np.ascontiguousarray(tables, dtype=np.int64)
    out = np.empty(len(tables), dtype=np.float64)
    for i, (a, b, c, d) in enumerate(tables):
        out[i] = fisher_greater_p(int(a), int(b), int(c), int(d), lf)
    return out


def count_events(codes: np.ndarray, adms: np.ndarray, offsets: np.ndarray,
                 n_codes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accumulate ordered/joint/marginal patient counts.

    Patient p owns the slice offsets[p]:offsets[p+1] of `codes` (vocabulary
    indices, unique per patient) and `adms` (first-occurrence admission
    ranks). ordered[i, j] counts patients whose first occurrence of i
    precedes j's strictly; same-admission pairs feed joint only.
    """
    ordered = np.zeros((n_codes, n_codes), dtype=np.int64)
    joint = np.zeros((n_codes, n_codes), dtype=np.int64)
    marginal = np.zeros(n_codes, dtype=np.int64)
    for p in range(len(offsets) - 1):
        lo, hi = offsets[p], offsets[p + 1]
        idx = codes[lo:hi]
        pos = adms[lo:hi]
        marginal[idx] += 1
        grid = np.ix_(idx, idx)
        joint[grid] += 1
        ordered[grid] += pos[:, None] < pos[None, :]
    return ordered, joint, marginal


def log_factorials(n: int) -> np.ndarray:
    """lf[k] = log(k!) for k in 0..n, via lgamma (no cumulative drift)."""
    return np.array([math.lgamma(k + 1) for k in range(n + 1)], dtype=np.float64)
