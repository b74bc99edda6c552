"""Exception hierarchy shared across the package."""


class DebiasVaeError(Exception):
    """Base class for all package errors."""


class FamilyError(DebiasVaeError):
    """Unknown image family or family/spec mismatch."""


class FactorValueError(DebiasVaeError):
    """A factor value is out of range or references an unknown factor."""


class RuleError(DebiasVaeError):
    """A bias rule is malformed (not a bijection, cardinality mismatch)."""


class DatasetFormatError(DebiasVaeError):
    """On-disk dataset payload is structurally broken (magic, truncation, sizes)."""


class DatasetConsistencyError(DebiasVaeError):
    """Dataset files disagree with each other (row counts, factor names)."""


class FeedbackBudgetError(DebiasVaeError):
    """Feedback budget too small for the requested target factors."""


class ConfigError(DebiasVaeError):
    """Invalid training or model configuration."""


class CheckpointVersionError(DebiasVaeError):
    """Checkpoint was written by an incompatible version."""


class NonFiniteLossError(DebiasVaeError):
    """A loss term became NaN or infinite."""


class TrainingDivergedError(DebiasVaeError):
    """Training aborted on a non-finite loss; last good checkpoint is retained."""

    def __init__(self, message: str, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class MetricDegenerateError(DebiasVaeError):
    """A metric cannot be computed on degenerate inputs (e.g. zero-variance codes)."""
