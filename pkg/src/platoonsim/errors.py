"""Exception types raised across the simulator."""


class PlatoonSimError(Exception):
    """Base class for all simulator errors."""


class DomainError(PlatoonSimError, ValueError):
    """A numeric input is non-finite or outside its mathematical domain."""


class ArgumentError(PlatoonSimError, ValueError):
    """An argument violates an operation precondition."""


class CausalityError(PlatoonSimError):
    """An event would be scheduled before the current simulation time."""


class OrderingError(PlatoonSimError):
    """Time went backwards relative to recorded service state."""


class UnavailableFieldError(PlatoonSimError, ValueError):
    """A CAM field carries its 'unavailable' sentinel value."""


class NoPredecessorError(PlatoonSimError, ValueError):
    """The platoon leader has no predecessor to listen to."""


class UndefinedMetricError(PlatoonSimError, ValueError):
    """A metric cannot be computed for the given data (e.g. zero denominator)."""


class ConfigError(PlatoonSimError, ValueError):
    """Scenario configuration failed validation.

    ``path`` names the offending field as a tuple of keys/indices so that
    callers can point the user at the right place in the source file.
    """

    def __init__(self, message: str, path: tuple = ()):
        super().__init__(message)
        self.path = tuple(path)

    def __str__(self) -> str:
        msg = super().__str__()
        if self.path:
            return f"{'.'.join(str(p) for p in self.path)}: {msg}"
        return msg


class SimulationError(PlatoonSimError):
    """A component failed during a run; carries the step index."""

    def __init__(self, step: int, cause: BaseException):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
