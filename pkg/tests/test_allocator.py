"""FLOPs model and global-threshold allocation."""

import math

import numpy as np
import pytest

from cliqueprune import (
    Layer,
    LayerTopology,
    PruningPlan,
    coupling_groups,
    plan_stage_targets,
    threshold_allocate,
    total_flops,
)
from cliqueprune.errors import (
    CountOutOfRange,
    Infeasible,
    PruningEngineError,
    StageOutOfRange,
)


def chain(*widths, kernel=3, spatial=8):
    """A straight conv chain with the given output widths."""
    layers = []
    links = []
    in_c = 3
    for i, out_c in enumerate(widths):
        layers.append(Layer(f"c{i}", "conv", in_c, out_c, kernel, kernel,
                            spatial, spatial))
        if i:
            links.append((f"c{i - 1}", f"c{i}"))
        in_c = out_c
    return LayerTopology(layers=tuple(layers), links=tuple(links))


def descending_trace(channels, top=None):
    """Full removal trace with strictly decreasing scores."""
    top = float(top if top is not None else channels)
    return tuple((k, top - k) for k in range(channels - 1))


def scan_allocate(traces, topology, target, max_sparsity):
    """Exhaustive threshold scan; independent of the bisection route."""
    pool = sorted({s for t in traces.values() for _, s in t}, reverse=True)
    full = total_flops(topology)
    for theta in pool:
        counts = {}
        for layer in topology.layers:
            counts[layer.layer_id] = layer.out_channels
        for layer_id, trace in traces.items():
            out_c = topology.layer(layer_id).out_channels
            survivors = len(trace) + 1
            kept_min = max(1, math.ceil((1.0 - max_sparsity) * out_c - 1e-9))
            cap = max(0, survivors - kept_min)
            eligible = sum(1 for _, s in trace if s >= theta)
            counts[layer_id] = survivors - min(eligible, cap)
        if 1.0 - total_flops(topology, counts) / full >= target:
            return counts
    raise Infeasible("scan found no feasible threshold")


class TestTotalFlops:
    def test_full_counts_give_base_total(self):
        topo = chain(8, 16)
        base = sum(l.base_flops for l in topo.layers)
        assert total_flops(topo) == base

    def test_single_conv_half_outputs(self):
        layer = Layer("c", "conv", 4, 4, 1, 1, 2, 2)
        topo = LayerTopology(layers=(layer,))
        assert total_flops(topo, {"c": 2}) == pytest.approx(32.0)

    def test_chained_halving_cuts_both_layers(self):
        topo = chain(8, 8, kernel=1, spatial=2)
        full = total_flops(topo)
        half = total_flops(topo, {"c0": 4})
        # first layer halves via outputs, second halves via coupled inputs
        l0, l1 = topo.layers
        assert half == pytest.approx(l0.base_flops * 0.5 + l1.base_flops * 0.5)
        assert half < full

    def test_count_bounds(self):
        topo = chain(8)
        with pytest.raises(CountOutOfRange):
            total_flops(topo, {"c0": 0})
        with pytest.raises(CountOutOfRange):
            total_flops(topo, {"c0": 9})

    def test_residual_producers_share_counts(self):
        layers = (
            Layer("a", "conv", 3, 8, 3, 3, 8, 8),
            Layer("b", "conv", 3, 8, 3, 3, 8, 8),
            Layer("c", "conv", 8, 4, 3, 3, 8, 8),
        )
        topo = LayerTopology(layers=layers, links=(("a", "c"), ("b", "c")))
        groups = coupling_groups(topo)
        assert frozenset({"a", "b"}) in groups
        with pytest.raises(CountOutOfRange):
            total_flops(topo, {"a": 4, "b": 6})
        ok = total_flops(topo, {"a": 4, "b": 4})
        assert ok < total_flops(topo)


class TestPlanStages:
    def test_two_stage_schedule(self):
        plan = PruningPlan(stage_targets=(0.30, 0.60))
        assert plan_stage_targets(plan, 0) == 0.30
        assert plan_stage_targets(plan, 1) == 0.60

    def test_single_shot_schedule(self):
        plan = PruningPlan(stage_targets=(0.60,))
        assert plan.t_step == 1
        assert plan_stage_targets(plan, 0) == 0.60

    def test_seventy_percent_schedule(self):
        plan = PruningPlan(stage_targets=(0.35, 0.70))
        assert plan_stage_targets(plan, 1) == 0.70

    def test_stage_out_of_range(self):
        plan = PruningPlan(stage_targets=(0.5,))
        with pytest.raises(StageOutOfRange):
            plan_stage_targets(plan, 1)
        with pytest.raises(StageOutOfRange):
            plan_stage_targets(plan, -1)


class TestThresholdAllocate:
    def test_target_zero_keeps_everything(self):
        topo = chain(8, 16)
        counts = threshold_allocate(
            {"c0": descending_trace(8), "c1": descending_trace(16)}, topo, 0.0
        )
        assert counts == {"c0": 8, "c1": 16}

    def test_single_layer_halving(self):
        topo = chain(8)
        counts = threshold_allocate({"c0": descending_trace(8)}, topo, 0.5)
        assert counts == {"c0": 4}

    def test_odd_width_overshoots_within_one_channel(self):
        topo = chain(7)
        counts = threshold_allocate({"c0": descending_trace(7)}, topo, 0.5)
        assert counts == {"c0": 3}  # 3/7 cost, reduction 0.571

    def test_untraced_layers_keep_full_width(self):
        topo = chain(8, 16)
        counts = threshold_allocate({"c0": descending_trace(8)}, topo, 0.2)
        assert counts["c1"] == 16

    def test_sparsity_cap_reabsorbs_into_other_layers(self):
        # same base cost per layer; one layer holds all the high scores, so
        # it hits the 0.9 cap (1 kept of 10) and the rest comes from the other
        topo = LayerTopology(layers=(
            Layer("x", "conv", 4, 10, 1, 1, 4, 4),
            Layer("y", "conv", 4, 10, 1, 1, 4, 4),
        ))
        traces = {
            "x": tuple((k, 0.9 - 0.1 * k) for k in range(9)),     # scores .9 .. .1
            "y": tuple((k, 100.0 - k) for k in range(9)),          # scores 100 .. 92
        }
        counts = threshold_allocate(traces, topo, 0.85, max_sparsity=0.9)
        assert counts["y"] == 1                       # floored at ceil(0.1 * 10)
        assert counts["x"] == 2                       # the remainder: 8 pruned
        scan = scan_allocate(traces, topo, 0.85, 0.9)
        assert counts == scan

    def test_infeasible_when_cap_precludes_target(self):
        topo = chain(8)
        with pytest.raises(Infeasible):
            threshold_allocate({"c0": descending_trace(8)}, topo, 0.9,
                               max_sparsity=0.5)

    def test_no_layer_exceeds_cap(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            widths = [int(rng.integers(4, 22)) for _ in range(int(rng.integers(1, 5)))]
            topo = chain(*widths, spatial=int(rng.integers(2, 9)))
            traces = {
                f"c{i}": tuple((k, float(rng.random())) for k in range(w - 1))
                for i, w in enumerate(widths)
            }
            target = float(rng.uniform(0.05, 0.7))
            try:
                counts = threshold_allocate(traces, topo, target, max_sparsity=0.9)
            except Infeasible:
                continue
            for i, w in enumerate(widths):
                assert counts[f"c{i}"] >= max(1, math.ceil((1 - 0.9) * w - 1e-9))

    def test_achieved_within_one_channel_of_target(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            widths = [int(rng.integers(4, 16)) for _ in range(int(rng.integers(1, 4)))]
            topo = chain(*widths, spatial=int(rng.integers(2, 7)))
            traces = {
                f"c{i}": tuple((k, float(rng.random())) for k in range(w - 1))
                for i, w in enumerate(widths)
            }
            target = float(rng.uniform(0.05, 0.6))
            full = total_flops(topo)
            try:
                counts = threshold_allocate(traces, topo, target, max_sparsity=0.9)
            except Infeasible:
                continue
            achieved = 1.0 - total_flops(topo, counts) / full
            assert achieved >= target - 1e-12
            # slack: the largest single-channel share of the total cost
            slack = 0.0
            for layer in topo.layers:
                if layer.out_channels > 1:
                    probe = {l.layer_id: l.out_channels for l in topo.layers}
                    probe[layer.layer_id] = layer.out_channels - 1
                    slack = max(slack, 1.0 - total_flops(topo, probe) / full)
            assert achieved <= target + slack + 1e-12

    def test_monotone_in_target(self):
        rng = np.random.default_rng(32)
        for _ in range(25):
            widths = [int(rng.integers(4, 14)) for _ in range(3)]
            topo = chain(*widths)
            traces = {
                f"c{i}": tuple((k, float(rng.random())) for k in range(w - 1))
                for i, w in enumerate(widths)
            }
            previous = None
            for target in (0.1, 0.25, 0.4, 0.55, 0.7):
                try:
                    counts = threshold_allocate(traces, topo, target, 0.9)
                except Infeasible:
                    break
                if previous is not None:
                    for key in counts:
                        assert counts[key] <= previous[key]
                previous = counts

    def test_bisection_agrees_with_exhaustive_scan(self):
        rng = np.random.default_rng(33)
        for _ in range(60):
            widths = []
            while sum(widths) < 8 or sum(widths) > 64:
                widths = [int(rng.integers(3, 17)) for _ in range(int(rng.integers(1, 5)))]
            topo = chain(*widths, spatial=int(rng.integers(2, 7)))
            traces = {
                f"c{i}": tuple((k, float(rng.random())) for k in range(w - 1))
                for i, w in enumerate(widths)
            }
            target = float(rng.uniform(0.05, 0.75))
            try:
                fast = threshold_allocate(traces, topo, target, 0.9)
            except Infeasible:
                with pytest.raises(Infeasible):
                    scan_allocate(traces, topo, target, 0.9)
                continue
            assert fast == scan_allocate(traces, topo, target, 0.9)

    def test_coupled_members_share_summed_trace(self):
        layers = (
            Layer("a", "conv", 3, 6, 3, 3, 8, 8),
            Layer("b", "conv", 3, 6, 3, 3, 8, 8),
            Layer("c", "conv", 6, 4, 3, 3, 8, 8),
        )
        topo = LayerTopology(layers=layers, links=(("a", "c"), ("b", "c")))
        order = [4, 2, 0, 3, 1]
        traces = {
            "a": tuple((k, 5.0 - i) for i, k in enumerate(order)),
            "b": tuple((k, 50.0 - i) for i, k in enumerate(order)),
        }
        counts = threshold_allocate(traces, topo, 0.3, 0.9)
        assert counts["a"] == counts["b"]
        assert counts["a"] < 6

    def test_coupled_conflicting_orders_rejected(self):
        layers = (
            Layer("a", "conv", 3, 4, 3, 3, 8, 8),
            Layer("b", "conv", 3, 4, 3, 3, 8, 8),
            Layer("c", "conv", 4, 4, 3, 3, 8, 8),
        )
        topo = LayerTopology(layers=layers, links=(("a", "c"), ("b", "c")))
        traces = {
            "a": ((0, 3.0), (1, 2.0), (2, 1.0)),
            "b": ((2, 3.0), (1, 2.0), (0, 1.0)),
        }
        with pytest.raises(PruningEngineError):
            threshold_allocate(traces, topo, 0.3, 0.9)

    def test_bad_target_rejected(self):
        topo = chain(8)
        for target in (-0.1, 1.0, 1.5):
            with pytest.raises(PruningEngineError):
                threshold_allocate({"c0": descending_trace(8)}, topo, target)
