"""PyTorch bridge for the cliqueprune decision engine.

Exports batch-averaged feature maps in the "SIRF" dump format and applies
emitted mask documents by physically slicing model channels.  All
redundancy math stays in the engine; this package only moves tensors and
files.
"""

from .errors import (
    AdapterError,
    NonSpatialActivation,
    ShapeConflict,
    UnknownLayer,
    UnresolvedCoupling,
)
from .export import ExportManifest, export_features, random_batches, resolve_layers
from .models import REGISTRY, ConvBn, ConvPoolLinear, Tiny2Conv, build_model
from .surgery import apply_masks, zero_out_equivalence

__version__ = "0.1.0"
