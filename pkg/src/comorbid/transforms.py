"""Value transforms applied to interconnection matrices.

Quantiles are always taken over the off-diagonal entries (both orders,
diagonal excluded) using linear interpolation on the sorted values.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .matrix import InterconnectionMatrix


def quantile(values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of a flat vector.

    With sorted values v and h = (n - 1) * q, returns
    v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)]).
    """
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"quantile must lie in [0, 1], got {q}")
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("quantile of an empty vector is undefined")
    return float(np.quantile(v, q))


def off_diagonal_quantile(matrix: InterconnectionMatrix, q: float) -> float:
    return quantile(matrix.off_diagonal(), q)


def clip_at_quantile(matrix: InterconnectionMatrix, q: float) -> InterconnectionMatrix:
    """Cap values at the off-diagonal q-quantile. Diagonal entries are
    capped with the same bound so the result stays internally consistent.
    The kind is kept unless the interpolated bound breaks its range rule
    (a fractional cap on a count or binary matrix), in which case the
    result is demoted to the unconstrained `score` kind."""
    bound = off_diagonal_quantile(matrix, q)
    clipped = np.minimum(matrix.values, bound)
    try:
        return matrix.with_values(clipped)
    except ValidationError:
        return matrix.with_values(clipped, kind="score")


def minmax_scale(matrix: InterconnectionMatrix) -> InterconnectionMatrix:
    """Affinely map off-diagonal values onto [0, 1].

    The minimum and maximum are taken over off-diagonal entries; the
    diagonal is mapped with the same affine transform and clipped to
    [0, 1]. A constant matrix has no defined scaling and is rejected.
    """
    off = matrix.off_diagonal()
    lo, hi = float(off.min()), float(off.max())
    if hi == lo:
        raise ValidationError("cannot minmax-scale a constant matrix")
    scaled = np.clip((matrix.values - lo) / (hi - lo), 0.0, 1.0)
    return InterconnectionMatrix(
        vocab=matrix.vocab,
        values=scaled,
        kind="similarity",
        symmetric=matrix.symmetric,
        method_name=matrix.method_name,
    )
