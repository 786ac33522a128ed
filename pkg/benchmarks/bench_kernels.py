#!/usr/bin/env python3
"""Time the compiled kernels against the pure-NumPy fallback.

Covers the two hot paths: batched one-sided Fisher p-values and
per-patient co-occurrence counting. Both backends are loaded directly,
so the comparison runs in one process regardless of COMORBID_PURE_PYTHON.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from comorbid._kernels import pure

try:
    from comorbid._kernels import _ckernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeats: int = 5) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def make_tables(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.integers(0, 300, size=(m, 4), dtype=np.int64)


def make_cohort_arrays(rng: np.random.Generator, n_patients: int,
                       n_codes: int):
    """Flat (codes, admissions, offsets) arrays for count_events."""
    codes_parts, adms_parts, offsets = [], [], [0]
    for _ in range(n_patients):
        k = int(rng.integers(1, 9))
        codes = rng.choice(n_codes, size=min(k, n_codes), replace=False)
        adms = rng.integers(0, 5, size=len(codes))
        codes_parts.append(codes.astype(np.int64))
        adms_parts.append(adms.astype(np.int64))
        offsets.append(offsets[-1] + len(codes))
    return (np.concatenate(codes_parts), np.concatenate(adms_parts),
            np.array(offsets, dtype=np.int64))


def main() -> int:
    rng = np.random.default_rng(0)
    tables = make_tables(rng, 20000)
    lf = pure.log_factorials(1300)
    codes, adms, offsets = make_cohort_arrays(rng, 20000, 60)

    cases = [
        ("fisher_greater_p_batch (20k tables)",
         lambda impl: impl.fisher_greater_p_batch(tables, lf)),
        ("count_events (20k patients, 60 codes)",
         lambda impl: impl.count_events(codes, adms, offsets, 60)),
    ]

    print(f"{'kernel':<42}{'pure':>10}{'compiled':>10}{'speedup':>9}")
    for name, call in cases:
        t_pure = best_of(lambda: call(pure))
        if compiled is None:
            print(f"{name:<42}{t_pure:>9.4f}s{'n/a':>10}{'n/a':>9}")
            continue
        t_comp = best_of(lambda: call(compiled))
        check_pure = call(pure)
        check_comp = call(compiled)
        if isinstance(check_pure, tuple):
            agree = all(np.array_equal(a, b)
                        for a, b in zip(check_pure, check_comp))
        else:
            agree = bool(np.allclose(check_pure, check_comp, rtol=1e-10,
                                     atol=1e-300))
        ratio = t_pure / t_comp if t_comp > 0 else float("inf")
        flag = "" if agree else "  RESULTS DISAGREE"
        print(f"{name:<42}{t_pure:>9.4f}s{t_comp:>9.4f}s{ratio:>8.1f}x{flag}")
    if compiled is None:
        print("\ncompiled extension not available; showing pure timings only")
    return 0


if __name__ == "__main__":
    sys.exit(main())
