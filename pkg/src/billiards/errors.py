"""Exception types shared across the package."""


class BilliardError(Exception):
    """Base class for errors raised by this package."""


class NearTangentRay(BilliardError):
    """A ray or reflection is too close to tangency to resolve.

    When raised while iterating an orbit, ``index`` is the bounce at
    which the step failed.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DegenerateChord(BilliardError):
    """Chord endpoints coincide (length below resolution)."""


class NotAnOrbit(BilliardError):
    """Consecutive points do not satisfy the reflection law."""


class TwistFailure(BilliardError):
    """A cross second-derivative block is numerically singular."""


class ConjugatePointNotFound(BilliardError):
    """No eigenvalue sign change inside the requested search interval."""


class ConfigError(BilliardError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
