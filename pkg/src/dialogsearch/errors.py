"""Exception hierarchy shared by all modules.

Every error the package raises deliberately derives from DialogSearchError,
so callers (CLI, HTTP service) can map failures to exit codes / status codes
without catching bare exceptions.
"""


class DialogSearchError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DialogSearchError, ValueError):
    """Caller passed data violating a documented precondition."""


class ModelCoverageError(DialogSearchError, LookupError):
    """A table-backed model has no entry for the requested context/prefix."""


class SelectionError(DialogSearchError):
    """Final-response selection was asked to choose from an empty pool."""


class CapabilityError(DialogSearchError):
    """Request exceeds what an exact method can handle (e.g. grid dimension)."""


class ChainInitError(DialogSearchError):
    """MCMC cannot start: zero posterior density at the initial state."""


class QuotaError(DialogSearchError):
    """Annotator exhausted the per-strategy session quota."""


class SessionStateError(DialogSearchError):
    """Operation not allowed in the session's current state."""


class ProtocolError(DialogSearchError):
    """Annotation submitted in violation of the evaluation protocol."""


class SessionNotFoundError(DialogSearchError, LookupError):
    """No session exists under the requested id."""
