"""Exception hierarchy for vitctl."""


class VitctlError(Exception):
    """Base exception for all vitctl errors."""


class ConfigError(VitctlError):
    """Configuration read/write/validation failed."""


class TensorError(VitctlError):
    """A tensor operation could not be carried out."""


class DimensionError(TensorError):
    """Operand shapes are incompatible."""


class NonFiniteError(TensorError):
    """An operation produced NaN or Inf."""


class TapeError(TensorError):
    """Reverse-mode replay was requested on an invalid tape."""


class LabelIndexError(TensorError, IndexError):
    """A class label lies outside [0, M)."""


class CapacityError(VitctlError):
    """Determination-ratio arithmetic outside its domain."""


class DatasetError(VitctlError):
    """Dataset loading, generation or geometry failed."""


class IdxMagicError(DatasetError):
    """IDX file carries an unexpected magic number."""


class IdxTruncatedError(DatasetError):
    """IDX file ends before its header says it should."""


class IdxCountMismatchError(DatasetError):
    """Image and label files disagree on the sample count."""


class CheckpointError(VitctlError):
    """Checkpoint could not be written or read."""


class TrainingError(VitctlError):
    """Training diverged or was fed inconsistent data."""


class SweepError(VitctlError):
    """Sweep orchestration or data-file emission failed."""
