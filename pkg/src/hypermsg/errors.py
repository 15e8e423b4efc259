"""Exception types raised across the package.

All errors derive from :class:`HyperMSGError`, which is itself a
``ValueError`` so callers validating user input can catch either.
"""


class HyperMSGError(ValueError):
    pass


# structure
class OutOfRangeNodeId(HyperMSGError):
    pass


class DuplicateNodeInEdge(HyperMSGError):
    pass


class SingletonEdge(HyperMSGError):
    pass


class NodeNotInEdge(HyperMSGError):
    pass


class SizeMismatch(HyperMSGError):
    pass


class InvalidSplitPlan(HyperMSGError):
    pass


class HyperedgeNotPairwise(HyperMSGError):
    pass


class UnknownNodeId(HyperMSGError):
    pass


# numerics
class ShapeMismatch(HyperMSGError):
    pass


class NonFiniteValue(HyperMSGError, FloatingPointError):
    pass


class NotScalarLoss(HyperMSGError):
    pass


class MissingGradient(HyperMSGError):
    pass


# aggregation
class EmptySet(HyperMSGError):
    pass


class ZeroPower(HyperMSGError):
    pass


class EmptyNeighborhood(HyperMSGError):
    pass


class EmptyEmbedding(HyperMSGError):
    pass


# training / io
class NoLabeledNodes(HyperMSGError):
    pass


class InsufficientLabels(HyperMSGError):
    pass


class DimMismatch(HyperMSGError):
    pass


class CheckpointFormatError(HyperMSGError):
    pass
