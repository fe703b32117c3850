"""Exception types shared across the package.

Exit-code mapping for the CLI lives in ``cli.py``: usage errors -> 1,
data/format errors -> 2, numerical failures -> 3.
"""


class TalkgenError(Exception):
    """Base class for all package errors."""


class ScheduleRangeError(TalkgenError):
    """Timestep outside the noise schedule's valid range."""


class SingularityError(TalkgenError):
    """A schedule value that must stay positive reached zero."""


class DivergenceError(TalkgenError):
    """NaN/Inf appeared in an iterative numerical procedure."""


class ShapeError(TalkgenError):
    """Tensor shape violates an operation's contract."""


class ConditioningError(TalkgenError):
    """A conditioning embedding has the wrong dimensions."""


class VocabularyError(TalkgenError):
    """Token or index outside the known vocabulary/grammar."""


class FormatError(TalkgenError):
    """On-disk container is malformed or has the wrong version."""


class IntegrityError(TalkgenError):
    """On-disk container payload disagrees with its manifest."""


class CheckpointError(TalkgenError):
    """Checkpoint is unreadable or incompatible with the runtime config."""


class TrainingAbortError(TalkgenError):
    """Training produced a non-finite loss component."""
