"""Spatial redundancy between channels of a feature map set.

Each channel map is normalized into a probability score map over its
pixels, and pairwise redundancy is measured on those distributions.  The
default metric is ln 2 minus the Jensen-Shannon divergence, so identical
spatial distributions score ln 2 and disjoint ones score 0.  Because the
divergence is computed on the un-pooled map, two channels that respond to
different locations stay distinguishable even when their pooled statistics
agree; collapsing the maps to 1x1 ("pooled-vector") erases exactly that
information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch, UnsupportedSupport
from .model import METRICS, RESOLUTION_SCALES, FeatureMapSet, _freeze

LN2 = math.log(2.0)

# mass floor added to every pixel before normalization; keeps every KL term
# finite and makes an all-zero map fall back to uniform
DEFAULT_EPSILON = 1e-8


def normalize_to_distribution(channel_map: np.ndarray,
                              epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Clamp negatives, add ``epsilon`` per pixel, divide by the total."""
    arr = np.asarray(channel_map, dtype=np.float64)
    if arr.size < 1:
        raise ShapeMismatch("channel map must contain at least one value")
    if not np.isfinite(arr).all():
        raise NonFiniteInput("channel map contains non-finite values")
    shifted = np.maximum(arr, 0.0) + epsilon
    return shifted / shifted.sum()


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Kullback-Leibler divergence in nats, summed over the support of p."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatch(f"distributions differ in shape: {p.shape} vs {q.shape}")
    mask = p > 0.0
    if np.any(q[mask] == 0.0):
        raise UnsupportedSupport("p has mass where q has none")
    ps = p[mask]
    return float(np.sum(ps * np.log(ps / q[mask])))


def js_redundancy(f_i: np.ndarray, f_j: np.ndarray) -> float:
    """ln 2 minus the Jensen-Shannon divergence of two probability maps.

    The two KL terms are summed before halving so the result is bitwise
    symmetric in its arguments.
    """
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise ShapeMismatch(f"maps differ in shape: {f_i.shape} vs {f_j.shape}")
    midpoint = (f_i + f_j) / 2.0
    divergence = 0.5 * (kl_divergence(f_i, midpoint) + kl_divergence(f_j, midpoint))
    return LN2 - divergence


def variant_redundancy(f_i: np.ndarray, f_j: np.ndarray, metric: str) -> float:
    """Alternative metrics, mapped into the same range as the JS form.

    ``kl`` and ``dice`` expect probability maps and land in (0, ln 2] and
    [0, ln 2] respectively, so the 1 - r edge-weight transform applies
    unchanged; ``dot`` is the raw inner product of the flattened maps and
    is unbounded in sign.
    """
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    if f_i.shape != f_j.shape:
        raise ShapeMismatch(f"maps differ in shape: {f_i.shape} vs {f_j.shape}")
    if metric == "dot":
        return float(np.dot(f_i.ravel(), f_j.ravel()))
    if metric == "dice":
        overlap = float(np.minimum(f_i, f_j).sum())
        total = float(f_i.sum() + f_j.sum())
        return LN2 * (2.0 * overlap / total)
    if metric == "kl":
        smoothed_j = _smooth(f_j)
        smoothed_i = _smooth(f_i)
        sym = kl_divergence(f_i, smoothed_j) + kl_divergence(f_j, smoothed_i)
        return LN2 * math.exp(-0.5 * sym)
    raise ShapeMismatch(f"unknown variant metric {metric!r}")


def _smooth(q: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    shifted = q + epsilon
    return shifted / shifted.sum()


def resample(channel_map: np.ndarray, resolution_scale: str) -> np.ndarray:
    """Resolution knob: mean pooling down, nearest-neighbour up, or global mean."""
    arr = np.asarray(channel_map, dtype=np.float64)
    if resolution_scale == "1":
        return arr
    if resolution_scale == "2":
        return np.repeat(np.repeat(arr, 2, axis=0), 2, axis=1)
    if resolution_scale == "pooled-vector":
        return arr.mean().reshape(1, 1)
    if resolution_scale in ("1/2", "1/4"):
        factor = 2 if resolution_scale == "1/2" else 4
        return _adaptive_mean_pool(arr, factor)
    raise ShapeMismatch(f"unknown resolution scale {resolution_scale!r}")


def _adaptive_mean_pool(arr: np.ndarray, factor: int) -> np.ndarray:
    h, w = arr.shape
    out_h = max(1, -(-h // factor))
    out_w = max(1, -(-w // factor))
    out = np.empty((out_h, out_w), dtype=np.float64)
    row_edges = [(i * h) // out_h for i in range(out_h + 1)]
    col_edges = [(j * w) // out_w for j in range(out_w + 1)]
    for i in range(out_h):
        for j in range(out_w):
            block = arr[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            out[i, j] = block.mean()
    return out


@dataclass(frozen=True)
class RedundancyMatrix:
    """Symmetric pairwise channel redundancy for one layer."""

    values: np.ndarray
    metric: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeMismatch(f"redundancy matrix must be square, got {v.shape}")
        if self.metric not in METRICS:
            raise ShapeMismatch(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]


def pairwise_redundancy(fm: FeatureMapSet, metric: str = "js",
                        resolution_scale: str = "1",
                        epsilon: float = DEFAULT_EPSILON) -> RedundancyMatrix:
    """Evaluate the chosen metric over all unordered channel pairs.

    Maps are resampled first, then normalized (except for ``dot``, which
    works on the raw resampled maps).  The diagonal is set to the metric's
    self value and is never consumed as an edge.
    """
    if metric not in METRICS:
        raise ShapeMismatch(f"unknown metric {metric!r}")
    if resolution_scale not in RESOLUTION_SCALES:
        raise ShapeMismatch(f"unknown resolution scale {resolution_scale!r}")
    c = fm.channels
    resampled = [resample(fm.data[i], resolution_scale) for i in range(c)]
    if metric == "dot":
        prepared = resampled
    else:
        prepared = [normalize_to_distribution(m, epsilon) for m in resampled]

    values = np.zeros((c, c), dtype=np.float64)
    for i in range(c):
        if metric == "dot":
            values[i, i] = float(np.dot(prepared[i].ravel(), prepared[i].ravel()))
        else:
            values[i, i] = LN2
    for i in range(c):
        for j in range(i + 1, c):
            if metric == "js":
                r = js_redundancy(prepared[i], prepared[j])
            else:
                r = variant_redundancy(prepared[i], prepared[j], metric)
            values[i, j] = r
            values[j, i] = r
    return RedundancyMatrix(values=values, metric=metric)
