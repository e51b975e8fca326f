"""Exception types raised by the pruning decision engine."""


class PruningEngineError(Exception):
    """Base class for every error the engine raises deliberately."""


class MalformedDocument(PruningEngineError):
    """A structured text document could not be parsed or is missing fields."""


# ---- binary / text ingestion -------------------------------------------

class BadMagic(PruningEngineError):
    """Stream does not start with the expected magic bytes."""


class VersionUnsupported(PruningEngineError):
    """Stream declares a format version this build cannot read."""


class LengthMismatch(PruningEngineError):
    """Payload length disagrees with the declared dimensions."""


class NonFiniteValue(PruningEngineError):
    """A NaN or infinity was found where only finite values are valid."""


class AsymmetryDetected(PruningEngineError):
    """Edge-weight matrix entries a_ij and a_ji differ."""


class NonZeroDiagonal(PruningEngineError):
    """Edge-weight matrix has a non-zero self edge."""


class OverlapDetected(PruningEngineError):
    """Kept and pruned channel sets intersect."""


class IncompleteCover(PruningEngineError):
    """Kept and pruned channel sets do not cover every channel."""


# ---- numeric preconditions ----------------------------------------------

class NonFiniteInput(PruningEngineError):
    """Input array contains NaN or infinity."""


class ShapeMismatch(PruningEngineError):
    """Operands have incompatible shapes."""


class UnsupportedSupport(PruningEngineError):
    """KL divergence undefined: p places mass where q has none."""


class InvalidAlpha(PruningEngineError):
    """EMA coefficient outside the open interval (0, 1)."""


# ---- solver --------------------------------------------------------------

class IndexOutOfRange(PruningEngineError):
    """Node index outside the active set or the matrix."""


class TooLarge(PruningEngineError):
    """Instance exceeds the exhaustive solver's node cap."""


class TooSmall(PruningEngineError):
    """Operation needs at least two nodes."""


class BadCardinality(PruningEngineError):
    """Keep or prune count outside the valid range."""


# ---- allocation -----------------------------------------------------------

class CountOutOfRange(PruningEngineError):
    """A per-layer keep count is outside [1, channel count] or breaks coupling."""


class Infeasible(PruningEngineError):
    """FLOPs target unreachable under the sparsity cap."""


class StageOutOfRange(PruningEngineError):
    """Stage index outside the plan's schedule."""
