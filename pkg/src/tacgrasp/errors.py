"""Exception hierarchy shared by all tacgrasp modules."""


class TacgraspError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(TacgraspError, ValueError):
    """An operation was called with arguments that violate its contract."""


class EstimationError(TacgraspError):
    """Pose estimation failed (empty mask, no valid depth pixels, ...)."""


class NumericError(TacgraspError):
    """A numeric invariant was violated (NaN/Inf in a tensor or gradient)."""


class TrainingError(TacgraspError):
    """Training diverged or could not proceed."""

    def __init__(self, message, epoch_trace=None):
        super().__init__(message)
        self.epoch_trace = epoch_trace or []


class ConfigError(TacgraspError):
    """A run configuration failed validation."""


class IntegrityError(TacgraspError):
    """A dataset on disk is inconsistent with its manifest."""

    def __init__(self, message, missing_paths=None):
        super().__init__(message)
        self.missing_paths = list(missing_paths or [])


class DependencyError(TacgraspError):
    """A required artifact (checkpoint, dataset, report) is missing."""
