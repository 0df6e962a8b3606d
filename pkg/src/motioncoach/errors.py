"""Exception hierarchy shared across the package."""


class MotionCoachError(Exception):
    """Base class for every error raised by motioncoach."""


class InvalidInputError(MotionCoachError, ValueError):
    pass


class InsufficientFramesError(InvalidInputError):
    pass


class MissingDataError(InvalidInputError):
    pass


class LearnerTooShortError(InvalidInputError):
    pass


class InvalidConfigError(MotionCoachError, ValueError):
    pass


class SkippedAxisError(InvalidInputError):
    pass


class ParseError(MotionCoachError, ValueError):
    """A motion, dataset, model or config file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ConfigurationError(MotionCoachError):
    """Live completion requested without the required endpoint or credential."""


class ServiceError(MotionCoachError):
    """The completion service failed; ``status`` holds the raw HTTP status if any."""

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message if status is None else f"{message} (status {status})")


class StageError(MotionCoachError):
    """A pipeline stage failed. Carries the stage name and the partial report."""

    def __init__(self, stage: str, cause: Exception, partial: dict | None = None):
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}
        super().__init__(f"stage '{stage}' failed: {cause}")
