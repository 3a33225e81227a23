"""Exception vocabulary for the skelfill package.

Every error raised by the library derives from :class:`SkelfillError` so
callers (and the CLI) can map failure classes to exit codes without
matching on message strings.
"""

from __future__ import annotations


class SkelfillError(Exception):
    """Base class for all package-specific errors."""


class MalformedCapture(SkelfillError):
    """Capture text violates the declared record layout.

    ``line`` carries the 1-based line number where parsing failed (one past
    the last line for truncation at end of stream).
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCapture(SkelfillError):
    """Capture contains no bodies at all, so no tensor can be built."""


class AlreadyOccluded(SkelfillError):
    """Dataset already contains missing values; refusing to occlude again."""


class RateOutOfRange(SkelfillError):
    """Occlusion rate or frame fraction outside [0, 1]."""


class JointIndexOutOfRange(SkelfillError):
    """A targeted joint index is empty or not a valid joint of the data."""


class DegenerateGraph(SkelfillError):
    """Skeleton graph has no edges, so degree-based probabilities are undefined."""


class MaskCountOutOfRange(SkelfillError):
    """Requested number of masked joints is not in [1, V]."""


class FrameCountOutOfRange(SkelfillError):
    """Requested number of masked frames is not in [1, T]."""


class FormatError(SkelfillError):
    """A binary or CSV artifact is corrupt, truncated, or mislabeled."""


class IdMismatch(SkelfillError):
    """Sample ids of two artifacts do not agree as a set."""


class KTooLarge(SkelfillError):
    """More clusters requested than there are rows to cluster."""


class DimensionMismatch(SkelfillError):
    """Embedding width differs from the width a model was fitted on."""


class NoOverlap(SkelfillError):
    """Two samples share no jointly-present coordinate, distance undefined."""


class EmptyDonorSet(SkelfillError):
    """No donor is available for a value that must be imputed."""


class LabelMismatch(SkelfillError):
    """Cluster labels are absent or not aligned with the dataset."""


class RecordMismatch(SkelfillError):
    """An occlusion record refers to samples or positions not in the dataset."""


class LengthMismatch(SkelfillError):
    """Two label vectors that must align have different lengths."""


class MissingArtifact(SkelfillError):
    """A pipeline stage input file does not exist yet."""


class ConfigError(SkelfillError):
    """Configuration file or flag value is invalid."""
