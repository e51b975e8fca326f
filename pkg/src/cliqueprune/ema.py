"""Exponential-moving-average accumulation of per-layer edge weights.

Edge weights follow a_t = alpha * a_{t-1} + (1 - alpha) * (1 - r).  The
very first update seeds the matrix with 1 - r directly instead of decaying
from zero, which would otherwise bias early pruning decisions toward
artificially low weights.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InvalidAlpha, ShapeMismatch
from .model import EdgeWeightMatrix
from .redundancy import RedundancyMatrix


def ema_init(n: int, alpha: float, layer_id: str = "") -> EdgeWeightMatrix:
    """Fresh all-zero edge matrix with no updates applied."""
    if n < 1:
        raise ShapeMismatch(f"need at least one node, got n={n}")
    if not (0.0 < alpha < 1.0):
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return EdgeWeightMatrix(
        layer_id=layer_id,
        weights=np.zeros((n, n), dtype=np.float64),
        update_count=0,
        alpha=alpha,
    )


def ema_update(m: EdgeWeightMatrix, r: RedundancyMatrix) -> EdgeWeightMatrix:
    """One accumulation step against the current redundancy observation."""
    if m.n != r.n:
        raise ShapeMismatch(f"matrix has {m.n} nodes, redundancy has {r.n}")
    target = 1.0 - r.values
    if m.update_count == 0:
        weights = target.copy()
    else:
        weights = m.alpha * m.weights + (1.0 - m.alpha) * target
    np.fill_diagonal(weights, 0.0)
    return EdgeWeightMatrix(
        layer_id=m.layer_id,
        weights=weights,
        update_count=m.update_count + 1,
        alpha=m.alpha,
    )


def shrink(m: EdgeWeightMatrix, keep_indices: Sequence[int]) -> EdgeWeightMatrix:
    """Drop pruned rows/columns; surviving history carries into the next stage."""
    idx = sorted(int(i) for i in keep_indices)
    if len(idx) < 1:
        raise ShapeMismatch("cannot shrink to an empty node set")
    if idx[0] < 0 or idx[-1] >= m.n or len(set(idx)) != len(idx):
        raise ShapeMismatch(f"keep indices out of range for n={m.n}")
    sub = m.weights[np.ix_(idx, idx)].copy()
    return EdgeWeightMatrix(
        layer_id=m.layer_id,
        weights=sub,
        update_count=m.update_count,
        alpha=m.alpha,
    )
