"""Exception hierarchy for the biolip pipeline.

Every domain failure derives from BiolipError so the CLI can map it to
exit code 1; anything else escaping is a bug.
"""


class BiolipError(Exception):
    """Base class for all domain errors."""


# --- trajectory ingestion ---

class MalformedHeader(BiolipError):
    """First line of a landmark file is not a valid header record."""


class MissingRequiredField(BiolipError):
    """A record lacks a field the format requires."""


class NonMonotoneFrameIndex(BiolipError):
    """Frame indices are not strictly increasing."""


class DegenerateMouthWidth(BiolipError):
    """Inter-commissure distance is at or below the epsilon floor."""


class SequenceRejected(BiolipError):
    """No contiguous valid run long enough to host a single window."""


class AllFramesInvalid(BiolipError):
    """Every frame of the sequence failed validation."""


# --- feature extraction ---

class SequenceTooShort(BiolipError):
    """Sequence shorter than one window."""


# --- model ---

class ShapeMismatch(BiolipError):
    """Input tensor shape disagrees with the model configuration."""


class NonFiniteActivation(BiolipError):
    """A forward pass produced NaN or infinity."""


class StaleCache(BiolipError):
    """backward() called with a cache not produced by a matching train-mode forward."""


# --- training ---

class SingleClassDataset(BiolipError):
    """Both classes are required but only one is present."""


class NonFiniteGradient(BiolipError):
    """An optimizer step received NaN or infinite gradients."""


class DivergedTraining(BiolipError):
    """Training loss became non-finite."""


# --- evaluation ---

class EmptyVideo(BiolipError):
    """A video has no scored windows."""


class SingleClass(BiolipError):
    """ROC analysis needs at least one positive and one negative."""


class ZeroPooledVariance(BiolipError):
    """Effect size undefined: pooled variance is zero."""


class ZeroWithinVariance(BiolipError):
    """ANOVA undefined: within-group variance is zero."""


class SeriesTooShort(BiolipError):
    """Series too short for spectral estimation."""


# --- perturbation ---

class DegenerateRate(BiolipError):
    """Frame-drop rate of 1.0 would delete the whole sequence."""


# --- io ---

class IoFailure(BiolipError):
    """Filesystem operation failed."""
