"""Exception hierarchy shared by every stage of the pipeline."""


class V2VBeamError(Exception):
    """Base class for all package errors."""


class InputError(V2VBeamError, ValueError):
    """Rejected input: wrong shape, out-of-range index, NaN, ..."""


class ConfigError(V2VBeamError):
    """Invalid or self-contradicting configuration."""


class DataError(V2VBeamError):
    """Malformed, missing or unusable data (manifests, checkpoints, frames)."""


class NoCandidateError(DataError):
    """Identification requested on a frame with no detections."""


class TrainingDivergenceError(V2VBeamError):
    """A loss or gradient became non-finite during training."""

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter
