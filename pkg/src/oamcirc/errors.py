"""Exception hierarchy shared by the simulator and the command line."""


class OamcircError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(OamcircError):
    """A configuration document is malformed or inconsistent.

    ``line`` and ``column`` are 1-based and refer to the source text when known.
    """

    def __init__(self, message, key=None, line=None, column=None, source=None):
        self.key = key
        self.line = line
        self.column = column
        self.source = source
        self.message = message
        super().__init__(self._format())

    def _format(self):
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
            if self.column is not None:
                where += f":{self.column}"
        key = f" [{self.key}]" if self.key else ""
        return f"{where}:{key} {self.message}"


class PhysicsError(OamcircError):
    """Numerical or physical failure inside the simulation."""


class GeometryError(PhysicsError, ValueError):
    """Cavity geometry outside the stable region."""


class QuadratureError(PhysicsError):
    """An adaptive radial integral failed to converge."""


class NumericalError(PhysicsError, FloatingPointError):
    """A computed value is not finite."""


class TruncationError(PhysicsError):
    """A mode left the configured (p, l) truncation under the ``fail`` policy."""


class OptimizationError(PhysicsError):
    """The design objective was not finite at some evaluated point."""

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message if point is None else f"{message} at {point}")


class TruncationWarning(UserWarning):
    """Power was discarded by (p, l) truncation beyond the configured threshold."""
