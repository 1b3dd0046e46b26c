"""Exception types raised across the package."""


class FuseError(Exception):
    """Base class for all package-specific errors."""


# --- preprocessing ---
class UnsupportedFormat(FuseError):
    """Input bytes are not a PNG or JPEG stream."""


class CorruptStream(FuseError):
    """Recognized image format but the stream cannot be decoded."""


class InvalidSigma(FuseError):
    """Gaussian blur sigma must be > 0."""


class InvalidQuality(FuseError):
    """JPEG quality must be an integer in [1, 100]."""


# --- spectral ---
class NonFiniteInput(FuseError):
    """FFT input contains NaN or infinity."""


# --- semantic encoder ---
class ModelNotFound(FuseError):
    """Encoder model file does not exist."""


class SignatureMismatch(FuseError):
    """Encoder graph input/output signature violates the contract."""


class RuntimeFailure(FuseError):
    """Encoder graph execution failed or produced an invalid embedding."""


# --- fusion / classifier ---
class EmptyInput(FuseError):
    """Operation requires a nonempty collection."""


class DimensionMismatch(FuseError):
    """Vector dimensions do not match the configured layout."""


class EmptyBatch(FuseError):
    """Gradient computation requires a nonempty batch."""


class ShapeMismatch(FuseError):
    """Parameter/gradient/optimizer-state shapes disagree."""


# --- checkpoints ---
class VersionMismatch(FuseError):
    """Checkpoint format version is not supported."""


class CorruptCheckpoint(FuseError):
    """Checkpoint file is truncated or fails integrity checks."""


class ConfigHashMismatch(FuseError):
    """Checkpoint was produced under a different feature configuration."""


# --- pipeline / manifests ---
class MalformedRecord(FuseError):
    """Manifest line is not a valid record."""


class MissingField(FuseError):
    """Manifest record lacks a required field."""


class EmptyTrainSet(FuseError):
    """Training requires a nonempty stage-1 train split."""


# --- evaluation ---
class SingleClassInput(FuseError):
    """Average precision needs at least one positive and one negative."""


class UnknownTag(FuseError):
    """Requested generator tag is not present in the reports."""


# --- configuration / CLI ---
class ConfigError(FuseError):
    """Configuration file or option is invalid."""
