"""Exception hierarchy shared by every module of the package."""


class SpgemmError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInputError(SpgemmError, ValueError):
    """Index out of bounds, unparsable file line, inconsistent arrays."""


class UnsupportedFormatError(SpgemmError, ValueError):
    """A file header that names a storage layout we do not read."""


class ShapeError(SpgemmError, ValueError):
    """Operand dimensions do not agree."""


class SemiringMismatchError(SpgemmError, TypeError):
    """Values created for one semiring were handed to another."""


class UnsupportedSemiringError(SpgemmError, ValueError):
    """The requested operation cannot run under the given semiring."""


class ProtocolError(SpgemmError, RuntimeError):
    """Collective participants disagree on root, sizes or kind."""


class DeadlockError(SpgemmError, RuntimeError):
    """Simulated ranks are waiting on collectives no peer will enter."""

    def __init__(self, message, blocked):
        super().__init__(message)
        self.blocked = blocked


class GridError(SpgemmError, ValueError):
    """Process count is not a perfect square or grids differ."""


class InvalidRangeError(SpgemmError, ValueError):
    """Search interval is empty or reversed."""


class InternalConsistencyError(SpgemmError, RuntimeError):
    """Partial results disagree on the block they belong to."""
