"""Core domain types: feature maps, edge-weight matrices, decisions, topologies, plans.

Everything here is an immutable value object; arrays are frozen after
construction so instances can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AsymmetryDetected,
    IncompleteCover,
    InvalidAlpha,
    NonFiniteValue,
    NonZeroDiagonal,
    OverlapDetected,
    PruningEngineError,
    ShapeMismatch,
)

METRICS = ("js", "kl", "dice", "dot")
RESOLUTION_SCALES = ("1", "1/2", "1/4", "2", "pooled-vector")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FeatureMapSet:
    """One layer's per-channel spatial activations for a single batch step.

    ``data`` has shape (C, H, W), float64, channel-major then row-major.
    """

    layer_id: str
    channels: int
    height: int
    width: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise ShapeMismatch(
                f"dimensions must be positive, got C={self.channels} "
                f"H={self.height} W={self.width}"
            )
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.size != self.channels * self.height * self.width:
            raise ShapeMismatch(
                f"data has {arr.size} values, expected "
                f"{self.channels * self.height * self.width}"
            )
        arr = arr.reshape(self.channels, self.height, self.width)
        if not np.isfinite(arr).all():
            raise NonFiniteValue(f"layer {self.layer_id!r}: non-finite activation")
        object.__setattr__(self, "data", _freeze(arr))

    def subset(self, channel_indices: Sequence[int]) -> "FeatureMapSet":
        """Restrict to the given channels (surviving-channel streaming)."""
        idx = list(channel_indices)
        return FeatureMapSet(
            layer_id=self.layer_id,
            channels=len(idx),
            height=self.height,
            width=self.width,
            data=self.data[idx].copy(),
        )


@dataclass(frozen=True)
class EdgeWeightMatrix:
    """Symmetric per-layer edge-weight graph accumulated over training steps.

    ``weights`` is n x n float64 with zero diagonal; ``update_count`` is the
    number of EMA updates applied so far.
    """

    layer_id: str
    weights: np.ndarray
    update_count: int
    alpha: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ShapeMismatch(f"weights must be square, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise NonFiniteValue(f"layer {self.layer_id!r}: non-finite edge weight")
        # Violations are rejected, never repaired in place.
        if np.abs(w - w.T).max() > 0.0:
            raise AsymmetryDetected(f"layer {self.layer_id!r}: weights not symmetric")
        if np.abs(np.diagonal(w)).max() > 0.0:
            raise NonZeroDiagonal(f"layer {self.layer_id!r}: diagonal must be zero")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.update_count < 0:
            raise PruningEngineError(f"negative update_count {self.update_count}")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class PruneDecision:
    """Kept/pruned channel split for one layer plus the removal-order trace.

    The trace covers every pruned channel in removal order; decisions from
    the exhaustive solver carry an empty trace since subset enumeration
    has no removal order.
    """

    layer_id: str
    channels: int
    kept: tuple[int, ...]
    pruned: tuple[int, ...]
    removal_trace: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        kept = tuple(sorted(int(i) for i in self.kept))
        pruned = tuple(sorted(int(i) for i in self.pruned))
        trace = tuple((int(k), float(s)) for k, s in self.removal_trace)
        if set(kept) & set(pruned):
            raise OverlapDetected(
                f"layer {self.layer_id!r}: kept and pruned sets intersect"
            )
        if set(kept) | set(pruned) != set(range(self.channels)):
            raise IncompleteCover(
                f"layer {self.layer_id!r}: kept+pruned must cover 0..{self.channels - 1}"
            )
        if trace and (len(trace) != len(pruned) or {k for k, _ in trace} != set(pruned)):
            raise IncompleteCover(
                f"layer {self.layer_id!r}: removal trace must cover every pruned channel"
            )
        object.__setattr__(self, "kept", kept)
        object.__setattr__(self, "pruned", pruned)
        object.__setattr__(self, "removal_trace", trace)


LAYER_KINDS = ("conv", "linear")


@dataclass(frozen=True)
class Layer:
    """One compute layer; linear layers use kernel and output size 1."""

    layer_id: str
    kind: str
    in_channels: int
    out_channels: int
    kernel_h: int = 1
    kernel_w: int = 1
    out_h: int = 1
    out_w: int = 1

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise PruningEngineError(f"unknown layer kind {self.kind!r}")
        for name in ("in_channels", "out_channels", "kernel_h", "kernel_w", "out_h", "out_w"):
            if getattr(self, name) < 1:
                raise PruningEngineError(f"layer {self.layer_id!r}: {name} must be >= 1")

    @property
    def base_flops(self) -> float:
        """Multiply-accumulate count at full width."""
        return float(
            self.out_channels * self.in_channels
            * self.kernel_h * self.kernel_w * self.out_h * self.out_w
        )


@dataclass(frozen=True)
class LayerTopology:
    """Acyclic layer graph with producer -> consumer channel links."""

    layers: tuple[Layer, ...]
    links: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        links = tuple((str(p), str(c)) for p, c in self.links)
        ids = [l.layer_id for l in layers]
        if len(set(ids)) != len(ids):
            raise PruningEngineError("duplicate layer ids in topology")
        by_id = {l.layer_id: l for l in layers}
        for producer, consumer in links:
            if producer not in by_id or consumer not in by_id:
                raise PruningEngineError(f"link {producer!r}->{consumer!r} names unknown layer")
            if by_id[consumer].in_channels != by_id[producer].out_channels:
                raise ShapeMismatch(
                    f"link {producer!r}->{consumer!r}: consumer expects "
                    f"{by_id[consumer].in_channels} input channels, producer "
                    f"emits {by_id[producer].out_channels}"
                )
        _check_acyclic(ids, links)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "links", links)

    def layer(self, layer_id: str) -> Layer:
        for l in self.layers:
            if l.layer_id == layer_id:
                return l
        raise PruningEngineError(f"no layer {layer_id!r} in topology")

    def producers_of(self, consumer_id: str) -> tuple[str, ...]:
        return tuple(p for p, c in self.links if c == consumer_id)


def _check_acyclic(ids: Sequence[str], links: Sequence[tuple[str, str]]) -> None:
    indeg = {i: 0 for i in ids}
    out: dict[str, list[str]] = {i: [] for i in ids}
    for p, c in links:
        indeg[c] += 1
        out[p].append(c)
    queue = [i for i in ids if indeg[i] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in out[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    if seen != len(ids):
        raise PruningEngineError("topology link graph contains a cycle")


@dataclass(frozen=True)
class PruningPlan:
    """Progressive schedule: stage targets are cumulative FLOPs-reduction
    fractions relative to the original network."""

    stage_targets: tuple[float, ...]
    alpha: float = 0.99
    max_channel_sparsity: float = 0.9
    metric: str = "js"
    resolution_scale: str = "1"

    def __post_init__(self) -> None:
        targets = tuple(float(t) for t in self.stage_targets)
        if len(targets) < 1:
            raise PruningEngineError("plan needs at least one stage target")
        for t in targets:
            # 0.0 is accepted as an explicit no-op stage
            if not (0.0 <= t < 1.0):
                raise PruningEngineError(f"stage target {t} outside [0, 1)")
        if any(b <= a for a, b in zip(targets, targets[1:])):
            raise PruningEngineError("stage targets must be strictly increasing")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0.0 < self.max_channel_sparsity <= 1.0):
            raise PruningEngineError(
                f"max_channel_sparsity {self.max_channel_sparsity} outside (0, 1]"
            )
        if self.metric not in METRICS:
            raise PruningEngineError(f"unknown metric {self.metric!r}")
        if self.resolution_scale not in RESOLUTION_SCALES:
            raise PruningEngineError(f"unknown resolution scale {self.resolution_scale!r}")
        object.__setattr__(self, "stage_targets", targets)

    @property
    def t_step(self) -> int:
        return len(self.stage_targets)
