#!/usr/bin/env python3
"""The file formats and the command-line workflow, end to end.

A real deployment splits the work across processes: a training job exports
"SIRF" feature dumps, `accumulate` folds them into per-layer "SIRM" edge
matrices, `solve`/`prune` turn those into mask documents.  Everything here
runs through the same CLI entry points, using a temp directory.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from cliqueprune import FeatureMapSet, write_feature_dump, write_topology, write_trace_doc
from cliqueprune.cli import main
from cliqueprune.model import Layer, LayerTopology

rng = np.random.default_rng(11)
root = Path(tempfile.mkdtemp(prefix="cliqueprune-demo-"))
print(f"working in {root}\n")

# 1. simulate a training job exporting dumps for one layer, 5 steps
dumps = []
for step in range(5):
    # channels 0 and 1 share a pattern; 2 and 3 are independent
    base = rng.random((4, 4))
    maps = np.stack([
        base + 0.01 * rng.random((4, 4)),
        base + 0.01 * rng.random((4, 4)),
        rng.random((4, 4)),
        rng.random((4, 4)),
    ])
    fm = FeatureMapSet("conv1", 4, 4, 4, maps)
    path = root / f"conv1_step{step}.sirf"
    path.write_bytes(write_feature_dump(fm))
    dumps.append(str(path))
print(f"wrote {len(dumps)} SIRF dumps")

# 2. accumulate them into an edge matrix
state = root / "state"
main(["accumulate", "--dumps", *dumps, "--state", str(state)])
print(f"state: {sorted(p.name for p in state.iterdir())}")

# 3. solve: prune one channel, greedy; also export the full trace
mask_path = root / "conv1.mask.json"
trace_path = root / "conv1.trace.json"
main(["solve", "--input", str(state / "conv1.sirm"), "--prune", "1",
      "--output", str(mask_path), "--emit-trace", str(trace_path)])
mask = json.loads(mask_path.read_text())
print(f"\nmask after pruning 1 of 4: kept={mask['kept']} pruned={mask['pruned']}")
print("one member of the redundant (0, 1) pair goes first, as expected")

# 4. allocate across a two-layer topology under a 40% FLOPs target
topo = LayerTopology(
    layers=(
        Layer("conv1", "conv", 3, 4, 3, 3, 8, 8),
        Layer("conv2", "conv", 4, 6, 3, 3, 8, 8),
    ),
    links=(("conv1", "conv2"),),
)
topo_path = root / "topology.json"
topo_path.write_text(write_topology(topo))
trace2 = root / "conv2.trace.json"
trace2.write_text(write_trace_doc("conv2", 6, tuple(
    (k, float((5 - k) / 2)) for k in range(5)
)))
masks_dir = root / "masks"
main(["prune", "--traces", str(trace_path), str(trace2),
      "--topology", str(topo_path), "--target", "0.4",
      "--out-dir", str(masks_dir)])
for mask_file in sorted(masks_dir.iterdir()):
    doc = json.loads(mask_file.read_text())
    print(f"{mask_file.name}: kept {doc['kept']}")

print(f"\nall artifacts left in {root} for inspection")
