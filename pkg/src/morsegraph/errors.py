"""Exception hierarchy shared by all morsegraph modules."""


class MorsegraphError(Exception):
    """Base class for all errors raised by this package."""


class GraphValidationError(MorsegraphError):
    """A graph, potential or exhaustion violates a structural invariant.

    When raised by the JSON loader, ``path`` points at the first offending
    location inside the document (e.g. ``edges[3].w``).
    """

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class ProfileViolationError(MorsegraphError):
    """A mu/w profile produced a nonpositive value."""


class VertexCapError(MorsegraphError):
    """A generator would exceed the configured vertex cap."""


class RegionError(MorsegraphError):
    """A vertex subset argument is empty, not a subset, or otherwise unusable."""


class PositivityError(MorsegraphError):
    """A quantity that must be strictly positive is not; carries the vertex id."""

    def __init__(self, message, vertex=None, value=None):
        self.vertex = vertex
        self.value = value
        super().__init__(message)


class NotPositiveDefiniteError(MorsegraphError):
    """An operator required to be positive definite has an eigenvalue at or
    below the tolerance; carries the offending eigenvalue."""

    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class SingularRestrictionError(MorsegraphError):
    """A Dirichlet restriction (or elimination block) is numerically singular."""


class DomainError(MorsegraphError):
    """Input is outside the operation's mathematical domain (e.g. negative
    potential entries passed to the Green-kernel machinery)."""


class DisconnectedRegionError(MorsegraphError):
    """Ground-state style computation on a disconnected region without
    explicit per-component request."""


class CapExceededError(MorsegraphError):
    """Problem dimension exceeds the dense cap and no iterative mode was requested."""


class CounterMismatchError(MorsegraphError):
    """The dense eigenvalue counter and the inertia counter disagree."""


class CertificateInapplicableError(MorsegraphError):
    """The vector certificate precondition <Hu,u> <= 0 fails; carries the value."""

    def __init__(self, message, measured=None):
        self.measured = measured
        super().__init__(message)


class InsufficientDepthError(MorsegraphError):
    """All bound-state counts in a scaling probe are zero."""


class ConfigError(MorsegraphError):
    """A scenario configuration is malformed; carries a path into the document."""

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
