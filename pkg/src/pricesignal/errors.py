"""Exception hierarchy shared by every module."""


class PriceSignalError(Exception):
    """Base class for all errors raised by this package."""


class MarketError(PriceSignalError, ValueError):
    """A market violates one or more modelling assumptions.

    ``violations`` names every failed assumption, not only the first.
    """

    def __init__(self, message: str, violations: tuple[str, ...] = ()):
        super().__init__(message)
        self.violations = violations or (type(self).__name__,)


class InvalidPrior(MarketError):
    pass


class CostOrder(MarketError):
    pass


class SupportViolation(MarketError):
    pass


class SinglePeakViolation(MarketError):
    pass


class TrivialSeparation(MarketError):
    pass


class ConstantPremium(PriceSignalError, ValueError):
    """Operation needs a strictly increasing quality premium (nu1 > 0)."""


class NoConvergence(PriceSignalError, RuntimeError):
    pass


class NoRoot(PriceSignalError, RuntimeError):
    pass


class OutOfSupport(PriceSignalError, ValueError):
    pass


class PoolingInfeasible(PriceSignalError, ValueError):
    pass


class CaseOverlap(PriceSignalError, ValueError):
    pass


class GridTooCoarse(PriceSignalError, ValueError):
    pass


class ProfileRequired(PriceSignalError, ValueError):
    pass


class MultipleIntervals(PriceSignalError, RuntimeError):
    pass


class ConfigError(PriceSignalError, ValueError):
    """Malformed market config file; message cites key and line."""
