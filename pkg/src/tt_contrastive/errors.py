"""
Error classes for the tensorized contrastive-learning engine.

Every error carries an ``exit_code`` so that the command-line front end can
map failures onto the documented process exit codes:

- 2: usage / configuration errors
- 3: data errors (dataset layout, image decoding, report files)
- 4: numeric errors (shapes, domains, timing)
"""

import logging
from typing import Optional, Tuple

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class TTContrastiveError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1

    def __init__(self, message: str):
        """Initialize error."""
        super().__init__(message)
        self.message = message


# ---------------------------------------------------------------------------
# Configuration / usage
# ---------------------------------------------------------------------------

class ConfigError(TTContrastiveError):
    """Invalid configuration value or config file."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, key: Optional[str] = None):
        """
        Initialize configuration error.

        Args:
            message: Error message
            key: Offending configuration key, if known
        """
        super().__init__(message)
        self.key = key


class UsageError(ConfigError):
    """Malformed or contradictory command-line arguments."""


class IndivisibleSplitError(ConfigError):
    """A tensor-train split does not multiply out to the layer dimension."""

    def __init__(self, dim: int, split: Tuple[int, int], which: str = "input"):
        """
        Initialize split error.

        Args:
            dim: Layer dimension the split must factor
            split: The offending (p, q) split
            which: 'input' or 'output'
        """
        super().__init__(
            f"{which} split {split[0]}x{split[1]} does not factor {which} dimension {dim}",
            key=f"{which[:3]}_split",
        )
        self.dim = dim
        self.split = split


# ---------------------------------------------------------------------------
# Numeric errors
# ---------------------------------------------------------------------------

class NumericError(TTContrastiveError):
    """Base class for numerical failures."""

    exit_code = EXIT_NUMERIC


class ShapeMismatchError(NumericError):
    """Operand shapes are incompatible."""

    def __init__(self, message: str, axis_pair: Optional[Tuple[int, int]] = None):
        """
        Initialize shape mismatch error.

        Args:
            message: Error message
            axis_pair: The (x-axis, y-axis) pair that failed, for contractions
        """
        super().__init__(message)
        self.axis_pair = axis_pair


class RankOverflowError(NumericError):
    """A contraction would produce a tensor of too high rank."""

    def __init__(self, rank: int, limit: int):
        super().__init__(f"output rank {rank} exceeds the supported maximum of {limit}")
        self.rank = rank
        self.limit = limit


class DomainError(NumericError):
    """Input outside the mathematical domain of an operation."""


class EmptyTensorError(NumericError):
    """Reduction over an empty tensor."""


class NotScalarError(NumericError):
    """backward() called on a non-scalar tensor."""


class NonPositiveTimeError(NumericError):
    """A timing value that must be positive is not."""


class AllocationError(NumericError):
    """Buffers for a benchmark configuration could not be allocated."""

    def __init__(self, message: str, size: int):
        """
        Initialize allocation error.

        Args:
            message: Error message
            size: The batch size (or element count) that failed
        """
        super().__init__(message)
        self.size = size


# ---------------------------------------------------------------------------
# Data errors
# ---------------------------------------------------------------------------

class DataError(TTContrastiveError):
    """Base class for dataset and file-format failures."""

    exit_code = EXIT_DATA


class DatasetEmptyError(DataError):
    """An operation needs at least one sample."""


class EmptyClassError(DataError):
    """A class directory exists but holds no decodable image."""

    def __init__(self, abbreviation: str, path: str):
        super().__init__(f"class directory '{path}' ({abbreviation}) contains no images")
        self.abbreviation = abbreviation
        self.path = path


class MalformedImageError(DataError):
    """Image bytes do not follow the container format."""

    def __init__(self, message: str, offset: int):
        """
        Initialize malformed image error.

        Args:
            message: Error message
            offset: Byte offset at which decoding failed
        """
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UndecodableImageError(DataError):
    """A file inside the dataset tree could not be decoded."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot decode image '{path}': {reason}")
        self.path = path
        self.reason = reason


class LabelOutOfRangeError(DataError):
    """A class label lies outside 0..num_classes-1."""

    def __init__(self, label: int, num_classes: int):
        super().__init__(f"label {label} outside 0..{num_classes - 1}")
        self.label = label


class ReportError(DataError):
    """Report or artifact could not be written."""


class UnwritablePathError(ReportError):
    """Destination path is not writable."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot write '{path}': {reason}")
        self.path = path


# ---------------------------------------------------------------------------
# Pipeline errors
# ---------------------------------------------------------------------------

class PipelineError(TTContrastiveError):
    """Model graph used in a state the operation does not accept."""

    exit_code = EXIT_NUMERIC


class HeadAlreadySnippedError(PipelineError):
    """snip_and_attach called on a model whose projection head is already cut."""


class MissingClassifierError(PipelineError):
    """Supervised operation on a model without classifier head."""


class CheckpointFormatError(DataError):
    """File is not a readable checkpoint container."""
