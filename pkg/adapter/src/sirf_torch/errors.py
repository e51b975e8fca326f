"""Adapter-side errors."""


class AdapterError(Exception):
    """Base class for adapter failures."""


class UnknownLayer(AdapterError):
    """A requested layer name does not exist in the model."""


class NonSpatialActivation(AdapterError):
    """A hooked layer emitted something other than a 4-D activation."""


class ShapeConflict(AdapterError):
    """A mask's channel count disagrees with the live module."""


class UnresolvedCoupling(AdapterError):
    """Downstream consumers of a pruned layer cannot be sliced safely."""
