"""Channel-pruning decision engine.

Turns per-channel feature-map statistics into pruning decisions: spatial
redundancy metrics on probability score maps, EMA-accumulated edge-weight
graphs, greedy and exact clique solvers, and a FLOPs-budgeted global
sparsity allocator, orchestrated by a progressive pipeline.  The engine
emits decisions (masks), never pruned weights.
"""

from . import allocator, ema, errors, formats, mewcp, pipeline, redundancy
from .allocator import FlopsModel, coupling_groups, plan_stage_targets, threshold_allocate, total_flops
from .ema import ema_init, ema_update, shrink
from .formats import (
    read_edge_matrix,
    read_feature_dump,
    read_mask,
    read_plan,
    read_topology,
    read_trace_doc,
    write_edge_matrix,
    write_feature_dump,
    write_mask,
    write_plan,
    write_topology,
    write_trace_doc,
)
from .mewcp import CliqueSolution, edge_sum, ehgp, exact_mewcp, importance_trace, single_prune_closed_form
from .model import (
    EdgeWeightMatrix,
    FeatureMapSet,
    Layer,
    LayerTopology,
    PruneDecision,
    PruningPlan,
)
from .pipeline import (
    ChannelBlob,
    RunReport,
    StageReport,
    SyntheticNetSpec,
    coincident_pairs_spec,
    generate_features,
    read_report,
    read_synthetic_spec,
    run_pipeline,
    write_report,
    write_synthetic_spec,
)
from .redundancy import (
    LN2,
    RedundancyMatrix,
    js_redundancy,
    kl_divergence,
    normalize_to_distribution,
    pairwise_redundancy,
    variant_redundancy,
)

__version__ = "0.1.0"
