"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4. Plain ValueError from contract violations is treated
as a data error when it escapes a pipeline stage.
"""


class ReefsegError(Exception):
    """Base class for reefseg failures."""


class ConfigError(ReefsegError):
    """Invalid pipeline or service configuration.

    Carries the full list of violations so callers can report all of
    them, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(ReefsegError):
    """Unreadable, malformed, or mismatched input data."""


class NumericalError(ReefsegError):
    """A fit produced non-finite values despite regularization."""


class StageError(ReefsegError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")
