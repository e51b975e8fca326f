#!/usr/bin/env python3
"""Global-threshold sparsity allocation under a FLOPs budget.

Per-layer keep counts are not chosen independently: all removal scores go
into one pool, a single threshold is swept, and every layer prunes as many
channels as it has scores above the cut (taken in removal order).  Layers
whose channels are cheap get pruned harder; a max-sparsity cap keeps any
single layer from being wiped out.
"""

import numpy as np

from cliqueprune import Layer, LayerTopology, threshold_allocate, total_flops

rng = np.random.default_rng(3)

# a 3-layer conv chain; the middle layer is the most expensive
topology = LayerTopology(
    layers=(
        Layer("stem", "conv", 3, 16, 3, 3, 32, 32),
        Layer("mid", "conv", 16, 32, 3, 3, 16, 16),
        Layer("head", "conv", 32, 8, 1, 1, 16, 16),
    ),
    links=(("stem", "mid"), ("mid", "head")),
)
full = total_flops(topology)
print(f"full network cost: {full:,.0f} multiply-accumulates")
for layer in topology.layers:
    print(f"  {layer.layer_id}: {layer.base_flops:,.0f}")

# synthetic importance traces: one score per removable channel, decreasing
# along the removal order (early removals are the least important)
traces = {
    layer.layer_id: tuple(
        (k, float(s)) for k, s in enumerate(
            np.sort(rng.random(layer.out_channels - 1))[::-1]
        )
    )
    for layer in topology.layers
}

print("\ntarget   stem  mid  head   achieved")
for target in (0.2, 0.4, 0.6, 0.8):
    counts = threshold_allocate(traces, topology, target, max_sparsity=0.9)
    achieved = 1.0 - total_flops(topology, counts) / full
    print(f"{target:5.2f}    {counts['stem']:4d} {counts['mid']:4d} "
          f"{counts['head']:5d}   {achieved:.4f}")

print("\nnote how raising the target never lets any keep count grow, and")
print("every layer retains at least 10% of its channels (cap 0.9).")

# chained layers: halving one layer's outputs also halves its consumer
half_stem = total_flops(topology, {"stem": 8})
print(f"\nhalving only 'stem': cost {half_stem:,.0f} "
      f"({1 - half_stem / full:.1%} saved, 'mid' shrinks through its inputs)")
