"""Exceptions raised by the laboratory."""

from dataclasses import dataclass


class UDNError(Exception):
    """Base class for every error raised by the package."""


@dataclass(frozen=True)
class FieldError:
    """A single violated invariant, reported by field name."""

    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


class ConfigError(UDNError, ValueError):
    """
    Raised when a simulation configuration violates one or more invariants.

    Every violated field is reported, not just the first one.

    Examples:
        >>> error = ConfigError([FieldError("access_prob", "must be <= 1")])
        >>> print(error)
        invalid configuration: access_prob: must be <= 1
        >>> error.fields
        ['access_prob']
    """

    def __init__(self, errors: list[FieldError]):
        self.errors = list(errors)
        super().__init__(
            "invalid configuration: " + "; ".join(map(str, self.errors))
        )

    @property
    def fields(self) -> list[str]:
        return [error.field for error in self.errors]


class EmptyRealizationError(UDNError, ValueError):
    """Raised when an operation needs at least one link and gets none."""


class HorizonTooShortError(UDNError, ValueError):
    """Raised when a run is too short for a finite-horizon diagnostic."""


class UnknownRegimeError(UDNError, KeyError):
    """Raised when a regime is not one of the tabulated special cases."""


class EngineFault(UDNError, RuntimeError):
    """
    Raised on an internal invariant breach.

    This is never a user error: it signals inconsistent queue state or a
    numerical procedure that lost its bracket.
    """
