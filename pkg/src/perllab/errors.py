"""Exception types shared across the package."""


class PerlLabError(Exception):
    """Base class for all package-specific errors."""


class ArgError(PerlLabError, ValueError):
    """An argument is outside its documented range."""


class EvalError(PerlLabError):
    """A target function produced a non-finite value."""


class DomainError(PerlLabError):
    """Two targets live on incompatible intervals."""


class CapError(PerlLabError):
    """A search exceeded its configured size cap."""


class DivergedError(PerlLabError):
    """An iterative run produced a non-finite gradient or value."""


class StateError(PerlLabError):
    """A kinematic state violates its invariants (e.g. gap <= 0)."""


class CollisionError(PerlLabError):
    """Simulated inter-vehicle gap collapsed to zero."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"gap collapsed at timestep {step}")


class TrainError(PerlLabError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None):
        self.epoch = epoch
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")


class ShapeError(PerlLabError):
    """An input's shape does not match the network spec."""


class SpecError(PerlLabError):
    """A network spec violates its invariants."""


class SchemaError(PerlLabError):
    """A CSV file does not match the expected column schema."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"bad or missing column: {column!r}")


class SamplingError(PerlLabError):
    """Timestamps in a trajectory file are not uniformly sampled."""

    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"non-uniform timestamp at row {row}")


class LengthError(PerlLabError):
    """A record series is too short to build any window."""


class ConfigError(PerlLabError):
    """An experiment config file failed to parse or validate."""


class UnknownKeyError(ConfigError):
    """A config file contains a key the experiment does not define."""

    def __init__(self, key_path: str):
        self.key_path = key_path
        super().__init__(f"unknown config key: {key_path!r}")
