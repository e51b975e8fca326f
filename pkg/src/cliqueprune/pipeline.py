"""Progressive pruning pipeline driven by a synthetic feature stream.

Each stage streams a fixed number of feature batches through the
redundancy metric into the per-layer EMA edge graphs, traces every layer's
removal ordering, allocates keep counts against the stage's cumulative
FLOPs target, and shrinks the edge matrices to the survivors.  There are
no weights anywhere: "fine-tuning" between stages is modelled as continued
feature streaming over the surviving channels, nothing more.

The synthetic generator emits one Gaussian blob per channel, so ground
truth redundancy structure is known by construction: coincident blob
centers mean redundant channels, well-separated centers mean independent
ones.  That makes pruning quality checkable without any task metric.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from . import allocator, ema, mewcp
from .errors import MalformedDocument, PruningEngineError, VersionUnsupported
from .formats import FORMAT_VERSION, read_topology, write_topology
from .model import (
    EdgeWeightMatrix,
    FeatureMapSet,
    Layer,
    LayerTopology,
    PruneDecision,
    PruningPlan,
)
from .redundancy import pairwise_redundancy


@dataclass(frozen=True)
class ChannelBlob:
    """Generator parameters for one channel: a Gaussian bump plus noise."""

    center_x: float
    center_y: float
    sigma: float
    amplitude: float = 1.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise PruningEngineError(f"sigma must be positive, got {self.sigma}")
        if self.noise < 0.0:
            raise PruningEngineError(f"noise must be non-negative, got {self.noise}")


@dataclass(frozen=True)
class SyntheticNetSpec:
    """Topology plus per-channel blob generators and the stream seed."""

    topology: LayerTopology
    generators: Mapping[str, tuple[ChannelBlob, ...]]
    seed: int = 42
    steps_per_stage: int = 8

    def __post_init__(self) -> None:
        gens = {k: tuple(v) for k, v in self.generators.items()}
        if self.steps_per_stage < 1:
            raise PruningEngineError("steps_per_stage must be >= 1")
        for layer in self.topology.layers:
            blobs = gens.get(layer.layer_id)
            if blobs is None:
                continue
            if len(blobs) != layer.out_channels:
                raise PruningEngineError(
                    f"layer {layer.layer_id!r}: {len(blobs)} generators for "
                    f"{layer.out_channels} channels"
                )
            for blob in blobs:
                if not (0.0 <= blob.center_x < layer.out_w
                        and 0.0 <= blob.center_y < layer.out_h):
                    raise PruningEngineError(
                        f"layer {layer.layer_id!r}: blob center "
                        f"({blob.center_x}, {blob.center_y}) outside the "
                        f"{layer.out_h}x{layer.out_w} grid"
                    )
        object.__setattr__(self, "generators", gens)

    def generated_layers(self) -> tuple[str, ...]:
        return tuple(
            l.layer_id for l in self.topology.layers if l.layer_id in self.generators
        )


def generate_features(spec: SyntheticNetSpec, step: int) -> dict[str, FeatureMapSet]:
    """Feature maps for every generated layer at the given stream step.

    Seeding is per (seed, layer, step), so output is bit-identical for the
    same arguments regardless of which layers are evaluated or in what
    order.
    """
    out: dict[str, FeatureMapSet] = {}
    for index, layer in enumerate(spec.topology.layers):
        blobs = spec.generators.get(layer.layer_id)
        if blobs is None:
            continue
        h, w = layer.out_h, layer.out_w
        rng = np.random.default_rng([spec.seed, index, step])
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        data = np.empty((len(blobs), h, w), dtype=np.float64)
        for c, blob in enumerate(blobs):
            bump = blob.amplitude * np.exp(
                -((xx - blob.center_x) ** 2 + (yy - blob.center_y) ** 2)
                / (2.0 * blob.sigma ** 2)
            )
            if blob.noise > 0.0:
                bump = bump + blob.noise * rng.standard_normal((h, w))
            else:
                rng.standard_normal((h, w))  # keep the draw sequence aligned
            data[c] = bump
        out[layer.layer_id] = FeatureMapSet(
            layer_id=layer.layer_id, channels=len(blobs), height=h, width=w, data=data
        )
    return out


@dataclass(frozen=True)
class StageReport:
    stage: int
    cumulative_target: float
    achieved_reduction: float
    keep_counts: dict[str, int]
    objectives: dict[str, float]
    wall_seconds: float


@dataclass(frozen=True)
class RunReport:
    stages: tuple[StageReport, ...]
    decisions: tuple[PruneDecision, ...]


def run_pipeline(spec: SyntheticNetSpec, plan: PruningPlan,
                 threads: int = 1) -> RunReport:
    """Stream, accumulate, trace, allocate, and shrink over every stage."""
    topology = spec.topology
    layer_ids = spec.generated_layers()
    groups = [
        g for g in allocator.coupling_groups(topology)
        if any(l in layer_ids for l in g)
    ]
    for group in groups:
        if not all(l in layer_ids for l in group):
            raise PruningEngineError(
                f"coupled layers {sorted(group)} must either all stream "
                f"features or none"
            )

    survivors: dict[str, tuple[int, ...]] = {
        l: tuple(range(topology.layer(l).out_channels)) for l in layer_ids
    }
    states: dict[str, EdgeWeightMatrix] = {
        l: ema.ema_init(topology.layer(l).out_channels, plan.alpha, layer_id=l)
        for l in layer_ids
    }
    removal_log: dict[str, list[tuple[int, float]]] = {l: [] for l in layer_ids}

    full_flops = allocator.total_flops(topology)
    stages: list[StageReport] = []
    global_step = 0

    def accumulate_layer(layer_id: str, fm: FeatureMapSet) -> EdgeWeightMatrix:
        sub = fm.subset(survivors[layer_id])
        r = pairwise_redundancy(sub, plan.metric, plan.resolution_scale)
        return ema.ema_update(states[layer_id], r)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for stage_index in range(plan.t_step):
            started = time.perf_counter()
            for _ in range(spec.steps_per_stage):
                feats = generate_features(spec, global_step)
                global_step += 1
                updated = pool.map(
                    lambda l: accumulate_layer(l, feats[l]), layer_ids
                )
                for layer_id, matrix in zip(layer_ids, updated):
                    states[layer_id] = matrix

            # one trace per coupling group, on the summed member matrices
            traces: dict[str, tuple[tuple[int, float], ...]] = {}
            group_local: dict[frozenset[str], tuple[tuple[int, float], ...]] = {}
            objectives: dict[str, float] = {}
            for group in groups:
                rep = min(group)
                summed = _group_matrix(states, group)
                if summed.n < 2:
                    # a single survivor is not prunable, but the allocator
                    # must still see its reduced width
                    group_local[group] = ()
                    traces[rep] = ()
                    continue
                local = mewcp.importance_trace(summed)
                group_local[group] = local
                traces[rep] = tuple(
                    (survivors[rep][k], s) for k, s in local
                )

            cumulative = allocator.plan_stage_targets(plan, stage_index)
            keep_counts = allocator.threshold_allocate(
                traces, topology, cumulative, plan.max_channel_sparsity
            )

            for group in groups:
                rep = min(group)
                current = survivors[rep]
                num_prune = len(current) - keep_counts.get(rep, len(current))
                local = group_local.get(group, ())
                pruned_local = [k for k, _ in local[:num_prune]]
                for layer_id in group:
                    for k, s in local[:num_prune]:
                        removal_log[layer_id].append((survivors[layer_id][k], s))
                keep_local = sorted(
                    set(range(len(current))) - set(pruned_local)
                )
                summed = _group_matrix(states, group)
                objectives[rep] = float(
                    summed.weights[np.ix_(keep_local, keep_local)].sum()
                )
                for layer_id in group:
                    survivors[layer_id] = tuple(
                        survivors[layer_id][k] for k in keep_local
                    )
                    states[layer_id] = ema.shrink(states[layer_id], keep_local)

            achieved = 1.0 - allocator.total_flops(topology, keep_counts) / full_flops
            stages.append(StageReport(
                stage=stage_index,
                cumulative_target=cumulative,
                achieved_reduction=achieved,
                keep_counts=dict(sorted(keep_counts.items())),
                objectives=dict(sorted(objectives.items())),
                wall_seconds=time.perf_counter() - started,
            ))

    decisions = []
    for layer_id in layer_ids:
        total = topology.layer(layer_id).out_channels
        kept = survivors[layer_id]
        decisions.append(PruneDecision(
            layer_id=layer_id,
            channels=total,
            kept=kept,
            pruned=tuple(sorted(set(range(total)) - set(kept))),
            removal_trace=tuple(removal_log[layer_id]),
        ))
    return RunReport(stages=tuple(stages), decisions=tuple(decisions))


def _group_matrix(states: Mapping[str, EdgeWeightMatrix],
                  group: frozenset[str]) -> EdgeWeightMatrix:
    members = sorted(group)
    rep = states[members[0]]
    if len(members) == 1:
        return rep
    total = rep.weights.copy()
    for other in members[1:]:
        if states[other].n != rep.n:
            raise PruningEngineError(
                f"coupled layers {members} have diverging survivor counts"
            )
        total = total + states[other].weights
    return EdgeWeightMatrix(
        layer_id=rep.layer_id, weights=total,
        update_count=rep.update_count, alpha=rep.alpha,
    )


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------

def write_synthetic_spec(spec: SyntheticNetSpec) -> str:
    topology_doc = json.loads(write_topology(spec.topology))
    return json.dumps({
        "format": "synthetic-spec",
        "version": FORMAT_VERSION,
        "seed": spec.seed,
        "steps_per_stage": spec.steps_per_stage,
        "topology": {"layers": topology_doc["layers"], "links": topology_doc["links"]},
        "generators": {
            layer_id: [
                {
                    "center": [b.center_x, b.center_y],
                    "sigma": b.sigma,
                    "amplitude": b.amplitude,
                    "noise": b.noise,
                }
                for b in blobs
            ]
            for layer_id, blobs in sorted(spec.generators.items())
        },
    }, indent=2, sort_keys=True) + "\n"


def read_synthetic_spec(text: str) -> SyntheticNetSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "synthetic-spec":
        raise MalformedDocument("expected a 'synthetic-spec' document")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionUnsupported("unsupported 'synthetic-spec' document version")
    try:
        topo_doc = dict(doc["topology"])
        topo_doc.setdefault("format", "topology")
        topo_doc.setdefault("version", FORMAT_VERSION)
        topology = read_topology(json.dumps(topo_doc))
        generators = {
            layer_id: tuple(
                ChannelBlob(
                    center_x=float(entry["center"][0]),
                    center_y=float(entry["center"][1]),
                    sigma=float(entry["sigma"]),
                    amplitude=float(entry.get("amplitude", 1.0)),
                    noise=float(entry.get("noise", 0.0)),
                )
                for entry in blobs
            )
            for layer_id, blobs in doc["generators"].items()
        }
        return SyntheticNetSpec(
            topology=topology,
            generators=generators,
            seed=int(doc.get("seed", 42)),
            steps_per_stage=int(doc.get("steps_per_stage", 8)),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedDocument(f"malformed synthetic-spec document: {exc}") from exc


def write_report(report: RunReport) -> str:
    """Canonical report document.

    Wall-clock timings are intentionally not serialized: report files must
    be byte-identical across runs with the same inputs and seed.
    """
    return json.dumps({
        "format": "run-report",
        "version": FORMAT_VERSION,
        "stages": [
            {
                "stage": s.stage,
                "cumulative_target": s.cumulative_target,
                "achieved_reduction": s.achieved_reduction,
                "keep_counts": s.keep_counts,
                "objectives": s.objectives,
            }
            for s in report.stages
        ],
        "final_keep": {
            d.layer_id: list(d.kept) for d in report.decisions
        },
    }, indent=2, sort_keys=True) + "\n"


def read_report(text: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "run-report":
        raise MalformedDocument("expected a 'run-report' document")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionUnsupported("unsupported 'run-report' document version")
    return doc


def coincident_pairs_spec(pairs: int = 4, seed: int = 42, grid: int = 24,
                          sigma: float = 2.0, noise: float = 0.02,
                          steps_per_stage: int = 8) -> SyntheticNetSpec:
    """Single-layer spec whose channels form redundant coincident pairs.

    Channels 2i and 2i+1 share a blob center; distinct pairs sit far apart
    on the grid, so each pair is mutually redundant and everything else is
    not.  Useful as a ground-truth instance: a good spatial-aware run keeps
    exactly one member of every pair at 50% sparsity.
    """
    channels = 2 * pairs
    margin = 3.0 * sigma
    span = grid - 2.0 * margin
    if span <= 0:
        raise PruningEngineError("grid too small for the requested sigma")
    side = int(np.ceil(np.sqrt(pairs)))
    centers = []
    for p in range(pairs):
        gx, gy = p % side, p // side
        centers.append((
            margin + span * (gx / max(1, side - 1) if side > 1 else 0.5),
            margin + span * (gy / max(1, side - 1) if side > 1 else 0.5),
        ))
    blobs = []
    for p in range(pairs):
        cx, cy = centers[p]
        blobs.append(ChannelBlob(center_x=cx, center_y=cy, sigma=sigma, noise=noise))
        blobs.append(ChannelBlob(center_x=cx, center_y=cy, sigma=sigma, noise=noise))
    layer = Layer(
        layer_id="conv0", kind="conv", in_channels=3, out_channels=channels,
        kernel_h=3, kernel_w=3, out_h=grid, out_w=grid,
    )
    topology = LayerTopology(layers=(layer,))
    return SyntheticNetSpec(
        topology=topology, generators={"conv0": tuple(blobs)},
        seed=seed, steps_per_stage=steps_per_stage,
    )
