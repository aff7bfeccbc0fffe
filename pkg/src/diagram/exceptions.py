"""Exception hierarchy shared by all diagram modules."""


class DiagramError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(DiagramError):
    """A dataset file is missing, malformed, or inconsistent."""


class TrainingError(DiagramError):
    """Training aborted (non-finite loss, architecture mismatch, ...)."""


class EmbeddingFormatError(DiagramError):
    """An embedding or checkpoint file cannot be decoded."""


class SamplingError(DiagramError):
    """Edge sampling could not satisfy its quota or preconditions."""


class EvaluationError(DiagramError):
    """An evaluation protocol received invalid inputs."""


class FingerprintMismatchError(DiagramError):
    """Stored artifact does not match the dataset it is evaluated against."""
