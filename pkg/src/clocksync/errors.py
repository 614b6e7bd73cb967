"""Exception hierarchy shared by every clocksync module."""


class ClocksyncError(Exception):
    """Base class for all errors raised by this package."""


class NonRotation(ClocksyncError, ValueError):
    """A 3x3 matrix is not a proper rotation (orthogonal, det +1)."""


class NotPhaseCovariant(ClocksyncError, ValueError):
    pass


class NotCptp(ClocksyncError, ValueError):
    pass


class TooManyQubits(ClocksyncError, ValueError):
    pass


class IndexOutOfRange(ClocksyncError, IndexError):
    pass


class DimensionMismatch(ClocksyncError, ValueError):
    pass


class MalformedSpec(ClocksyncError, ValueError):
    pass


class OutOfRange(ClocksyncError, ValueError):
    pass


class DegenerateShots(ClocksyncError, RuntimeError):
    """Both quadrature means were exactly zero, even after one resample."""


class FlatFringe(ClocksyncError, ValueError):
    """Neither quadrature has a usable slope at the requested phase."""


class ParseError(ClocksyncError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class MissingField(ClocksyncError, ValueError):
    def __init__(self, fields):
        self.fields = list(fields)
        super().__init__("missing required field(s): " + ", ".join(self.fields))
