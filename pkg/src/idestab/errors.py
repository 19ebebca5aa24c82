"""Exception types shared across the package."""


class IdestabError(Exception):
    """Base class for all domain errors raised by this package."""


class SingularAtZero(IdestabError):
    """Raised when the zero-frequency matrix of the system is singular.

    The constant K0 = (integral of F - I)^{-1} does not exist, which means
    s = 0 is an eigenvalue of the system and the stability machinery does
    not apply at this parameter point.
    """


class StepTooCoarse(IdestabError):
    """Raised when the implicit end-weight matrix of a marching scheme is
    numerically singular; a smaller time step fixes it."""


class GridMismatch(IdestabError):
    """Raised when two grid functions (or a grid function and a required
    node set) do not share a compatible grid."""


class OutOfRange(IdestabError):
    """Raised when a function is evaluated outside its tabulated domain."""


class NonDecayingTail(IdestabError):
    """Raised by the direct Lyapunov-matrix construction when the
    fundamental matrix shows no decay over the truncation horizon, so the
    defining improper integral is meaningless."""


class IllConditioned(IdestabError):
    """Raised when the collocation system for the Lyapunov matrix is
    ill-conditioned; the Lyapunov matrix may not exist or not be unique
    (eigenvalues symmetric with respect to zero)."""


class ConfigError(IdestabError):
    """Raised for malformed experiment configuration input; the message
    names the offending field (and line, when the parser provides one)."""
