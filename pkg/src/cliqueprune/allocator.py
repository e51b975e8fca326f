"""Network-wide sparsity allocation from per-layer importance traces.

A single score threshold is swept over the pool of recorded removal scores:
each layer prunes as many channels as it has recorded scores at or above
the threshold, taking them in removal order (earliest removals first, which
is the low-importance end of the layer).  The threshold is chosen by
bisection over the observed scores, since the achieved reduction is a step
function of the threshold: the least pruning that still meets the
FLOPs-reduction target wins, subject to the per-layer max-sparsity cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    CountOutOfRange,
    Infeasible,
    PruningEngineError,
    StageOutOfRange,
)
from .model import LayerTopology, PruningPlan

Trace = tuple[tuple[int, float], ...]

# guards ceil() against float noise in (1 - sparsity) * channels
_CEIL_GUARD = 1e-9


@dataclass(frozen=True)
class FlopsModel:
    """Per-layer base costs plus channel-coupling structure.

    ``groups`` maps each layer to its coupling group (layers whose output
    channels are added together and must share one keep set); ``feeds``
    maps each consumer to the group its input channels follow.
    """

    topology: LayerTopology
    base: dict[str, float]
    groups: dict[str, frozenset[str]]
    feeds: dict[str, frozenset[str]]

    @classmethod
    def build(cls, topology: LayerTopology) -> "FlopsModel":
        base = {l.layer_id: l.base_flops for l in topology.layers}
        parent: dict[str, str] = {l.layer_id: l.layer_id for l in topology.layers}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: str, b: str) -> None:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        # producers feeding the same consumer share the consumer's channel
        # space (residual additions), so they must share one keep set
        for layer in topology.layers:
            producers = topology.producers_of(layer.layer_id)
            for first, second in zip(producers, producers[1:]):
                union(first, second)

        members: dict[str, set[str]] = {}
        for layer_id in parent:
            members.setdefault(find(layer_id), set()).add(layer_id)
        groups = {
            layer_id: frozenset(members[find(layer_id)]) for layer_id in parent
        }
        feeds: dict[str, frozenset[str]] = {}
        for layer in topology.layers:
            producers = topology.producers_of(layer.layer_id)
            if producers:
                feeds[layer.layer_id] = groups[producers[0]]
        return cls(topology=topology, base=base, groups=groups, feeds=feeds)


def coupling_groups(topology: LayerTopology) -> tuple[frozenset[str], ...]:
    """Distinct coupled-layer groups, ordered by their smallest member id."""
    model = FlopsModel.build(topology)
    distinct = {g for g in model.groups.values()}
    return tuple(sorted(distinct, key=lambda g: min(g)))


def total_flops(topology: LayerTopology,
                keep_counts: Mapping[str, int] | None = None) -> float:
    """Multiply-accumulate cost of the network at the given keep counts.

    Each layer's base cost scales by (kept_out / out_channels) times
    (kept_in / in_channels), where kept_in follows the producing group
    through the coupling map.  Missing entries mean full width.
    """
    model = FlopsModel.build(topology)
    counts = dict(keep_counts or {})
    for layer in topology.layers:
        count = counts.setdefault(layer.layer_id, layer.out_channels)
        if not (1 <= count <= layer.out_channels):
            raise CountOutOfRange(
                f"layer {layer.layer_id!r}: keep count {count} outside "
                f"[1, {layer.out_channels}]"
            )
    for group in {g for g in model.groups.values() if len(g) > 1}:
        group_counts = {counts[l] for l in group}
        if len(group_counts) > 1:
            raise CountOutOfRange(
                f"coupled layers {sorted(group)} must share one keep count, "
                f"got {sorted(group_counts)}"
            )
    total = 0.0
    for layer in topology.layers:
        out_ratio = counts[layer.layer_id] / layer.out_channels
        feed = model.feeds.get(layer.layer_id)
        if feed is None:
            in_ratio = 1.0
        else:
            in_ratio = counts[min(feed)] / layer.in_channels
        total += model.base[layer.layer_id] * out_ratio * in_ratio
    return total


def plan_stage_targets(plan: PruningPlan, stage: int) -> float:
    """Cumulative FLOPs-reduction target for the given progressive stage."""
    if not (0 <= stage < plan.t_step):
        raise StageOutOfRange(f"stage {stage} outside [0, {plan.t_step})")
    return plan.stage_targets[stage]


def _merge_group_traces(traces: Mapping[str, Trace],
                        groups: Sequence[frozenset[str]]) -> dict[frozenset[str], Trace]:
    """Resolve one trace per coupling group.

    A group with a single supplied trace uses it directly.  When several
    members supply traces they must agree on the removal order, and the
    scores are summed position-wise (the element-wise sum of the member
    traces).
    """
    merged: dict[frozenset[str], Trace] = {}
    for group in groups:
        supplied = [traces[l] for l in sorted(group) if l in traces]
        if not supplied:
            continue
        if len({tuple(k for k, _ in t) for t in supplied}) != 1:
            raise PruningEngineError(
                f"coupled layers {sorted(group)} supplied traces with "
                f"different removal orders"
            )
        order = [k for k, _ in supplied[0]]
        scores = [sum(t[pos][1] for t in supplied) for pos in range(len(order))]
        merged[group] = tuple(zip(order, scores))
    return merged


def threshold_allocate(traces: Mapping[str, Trace], topology: LayerTopology,
                       target_reduction: float,
                       max_sparsity: float = 0.9) -> dict[str, int]:
    """Per-layer keep counts meeting the global FLOPs-reduction target.

    ``traces`` maps layer ids to removal traces over that layer's current
    surviving channels (survivor count = trace length + 1); layers without
    a trace are not prunable and keep full width.  The returned counts are
    absolute kept-channel counts against the topology's original widths.
    """
    if not (0.0 <= target_reduction < 1.0):
        raise PruningEngineError(f"target reduction {target_reduction} outside [0, 1)")
    if not (0.0 < max_sparsity <= 1.0):
        raise PruningEngineError(f"max sparsity {max_sparsity} outside (0, 1]")

    model = FlopsModel.build(topology)
    groups = coupling_groups(topology)
    group_traces = _merge_group_traces(traces, groups)

    survivors: dict[frozenset[str], int] = {}
    prune_cap: dict[frozenset[str], int] = {}
    for group, trace in group_traces.items():
        count = len(trace) + 1
        for layer_id in group:
            out_c = model.topology.layer(layer_id).out_channels
            if count > out_c:
                raise PruningEngineError(
                    f"layer {layer_id!r}: trace implies {count} survivors "
                    f"but the layer has {out_c} channels"
                )
        out_c = min(model.topology.layer(l).out_channels for l in group)
        kept_min = max(1, math.ceil((1.0 - max_sparsity) * out_c - _CEIL_GUARD))
        prune_cap[group] = max(0, count - kept_min)
        survivors[group] = count

    full = total_flops(topology)

    def counts_at(threshold: float) -> dict[str, int]:
        counts: dict[str, int] = {}
        for layer in topology.layers:
            counts[layer.layer_id] = layer.out_channels
        for group, trace in group_traces.items():
            # prune count = scores at/above the cut; pruned channels are
            # taken in removal order
            eligible = sum(1 for _, score in trace if score >= threshold)
            pruned = min(eligible, prune_cap[group])
            for layer_id in group:
                counts[layer_id] = survivors[group] - pruned
        return counts

    def achieved(threshold: float) -> float:
        return 1.0 - total_flops(topology, counts_at(threshold)) / full

    if target_reduction == 0.0:
        return counts_at(math.inf)

    pool = sorted({score for trace in group_traces.values() for _, score in trace})
    if not pool:
        raise Infeasible("no prunable layers supplied, target unreachable")
    if achieved(pool[0]) < target_reduction:
        raise Infeasible(
            f"target {target_reduction} unreachable even at max sparsity "
            f"{max_sparsity} (best {achieved(pool[0]):.4f})"
        )

    # achieved() is nonincreasing in the threshold; find the largest pool
    # value that still meets the target
    lo, hi = 0, len(pool) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if achieved(pool[mid]) >= target_reduction:
            lo = mid
        else:
            hi = mid - 1
    return counts_at(pool[lo])
