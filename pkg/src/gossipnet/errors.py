"""Exception types raised across the package."""


class GossipNetError(Exception):
    """Base class for package errors."""


class ParameterError(GossipNetError, ValueError):
    """Invalid topology, policy or experiment parameters."""


class RangeError(ParameterError):
    """A requested target lies outside the achievable range."""


class SizeError(GossipNetError, ValueError):
    """Instance too large for the requested exact method."""


class UndefinedValueError(GossipNetError, ValueError):
    """A statistic is undefined for the given input."""


class NumericError(GossipNetError, ArithmeticError):
    """Numerical procedure failed to converge or lost accuracy."""
