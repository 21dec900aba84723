"""Exception hierarchy for smctrack."""


class SmcTrackError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SmcTrackError, ValueError):
    """A value violates a type invariant (non-positive box size, bad score...)."""


class ParseError(SmcTrackError, ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ConfigError(SmcTrackError, ValueError):
    pass


class DegenerateFilterError(SmcTrackError, ArithmeticError):
    """Kalman innovation covariance is singular or the state left its domain."""


class SequencingError(SmcTrackError):
    """Frames were fed to the tracker out of order."""


class DivergenceError(SmcTrackError, ArithmeticError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")


class UndefinedMetricError(SmcTrackError, ZeroDivisionError):
    pass


class InputError(SmcTrackError, ValueError):
    """Evaluation input is inconsistent (duplicate ids, frame-range mismatch)."""
