"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set COMORBID_PURE_PYTHON=1 to force the fallback (used by the parity tests
and the benchmark). The active implementation is reported via BACKEND.
"""

from __future__ import annotations

import os

if os.environ.get("COMORBID_PURE_PYTHON"):
    from . import pure as impl
else:
    try:
        from . import _ckernels as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pure as impl

BACKEND: str = impl.BACKEND
fisher_greater_p = impl.fisher_greater_p
fisher_greater_p_batch = impl.fisher_greater_p_batch
count_events = impl.count_events
log_factorials = impl.log_factorials

__all__ = [
    "BACKEND",
    "fisher_greater_p",
    "fisher_greater_p_batch",
    "count_events",
    "log_factorials",
]
