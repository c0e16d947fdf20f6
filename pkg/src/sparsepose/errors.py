"""Exception types shared across the package."""


class SparsePoseError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SparsePoseError, ValueError):
    """An argument violates a documented precondition (wrong shape, bad range)."""


class DegenerateInputError(InvalidInputError):
    """Geometrically degenerate input, e.g. two adjacent joints coincide."""


class DataError(SparsePoseError):
    """Non-finite or otherwise unusable numeric data."""


class FormatError(SparsePoseError):
    """A file failed to parse.

    Carries the offending location so callers can report it.
    """

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, frame: int | None = None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if frame is not None:
            loc.append(f"frame {frame}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.frame = frame


class ConfigError(SparsePoseError):
    """A benchmark or service configuration is unusable."""


class IKConvergenceError(SparsePoseError):
    """Damped-Jacobian iteration did not reach tolerance.

    ``best_q`` is the best iterate found, ``residual`` its per-joint
    average position error, ``iterations`` the number of steps taken.
    """

    def __init__(self, message: str, *, best_q, residual: float, iterations: int):
        super().__init__(message)
        self.best_q = best_q
        self.residual = residual
        self.iterations = iterations
