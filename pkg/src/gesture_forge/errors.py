"""Exception types raised across the package."""


class GestureError(Exception):
    """Base class for every domain error raised by gesture_forge."""


class DegenerateFrame(GestureError, ValueError):
    pass


class KeyMismatch(GestureError, ValueError):
    pass


class DegenerateAngle(GestureError, ValueError):
    """One or more joint angles have an arm of (near) zero length.

    ``indices`` lists the offending positions when raised from ``angle_set``.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class EmptyMask(GestureError, ValueError):
    pass


class NoBackground(GestureError, ValueError):
    pass


class ZeroBaseline(GestureError, ValueError):
    pass


class UnknownGesture(GestureError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown gesture"


class Divergence(GestureError, ArithmeticError):
    pass


class EmptyClass(GestureError, ValueError):
    pass


class MissingSource(GestureError, KeyError):
    pass


class InsufficientFrames(GestureError, ValueError):
    pass


class RefusedTooOccluded(GestureError):
    """Too many of the newest frames carry no observation to attempt a match."""

    def __init__(self, occluded, limit):
        super().__init__(f"{occluded} fully occluded frames among the newest window (limit {limit})")
        self.occluded = occluded
        self.limit = limit
