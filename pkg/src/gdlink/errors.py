"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateNode(PipelineError):
    def __init__(self, external_id: str):
        super().__init__(f"node id {external_id!r} already present")
        self.external_id = external_id


class TypeConstraintViolation(PipelineError):
    """Edge endpoints do not match the relation's required node kinds."""


class SelfLoopRejected(PipelineError):
    """Self edges are not representable; self-loops are added at normalization."""


class InvalidMixingWeights(PipelineError):
    """Relation mixing weights must be nonnegative and sum to one."""


class DimensionMismatch(PipelineError):
    def __init__(self, external_id: str, expected: int, got: int):
        super().__init__(
            f"embedding for {external_id!r} has width {got}, expected {expected}"
        )
        self.external_id = external_id
        self.expected = expected
        self.got = got


class CorruptEmbedding(PipelineError):
    def __init__(self, external_id: str, detail: str = "non-finite or non-numeric value"):
        super().__init__(f"embedding for {external_id!r} is corrupt: {detail}")
        self.external_id = external_id


class MissingEmbedding(PipelineError):
    def __init__(self, external_id: str):
        super().__init__(f"no embedding provided for graph node {external_id!r}")
        self.external_id = external_id


class InsufficientClusters(PipelineError):
    """Fewer than three gene clusters carry edges; a 3-way split is impossible."""


class NegativeSpaceExhausted(PipelineError):
    """Could not draw the requested number of non-edge pairs."""


class ShapeError(PipelineError):
    """Array arguments have inconsistent shapes or lengths."""


class StaleTrace(PipelineError):
    """Forward trace lacks the intermediates needed for the backward pass."""


class NonFiniteGradient(PipelineError):
    """A parameter gradient contained NaN or infinity."""


class EmptyInput(PipelineError):
    """Metric requested on an empty score set."""


class SingleClassInput(PipelineError):
    """Metric requires both classes (or positives) to be present."""


class MissingScoreColumn(PipelineError):
    """A score threshold was requested on an edge file without a score column."""


class ArtifactMismatch(PipelineError):
    """Content hashes of pipeline artifacts disagree."""


class UnknownEntity(PipelineError):
    def __init__(self, external_id: str):
        super().__init__(f"id {external_id!r} is not a node of the graph")
        self.external_id = external_id


class GraphNotFinalized(PipelineError):
    """Operation requires a finalized (immutable) graph."""


class ConfigError(PipelineError):
    """Unknown or malformed configuration key."""
