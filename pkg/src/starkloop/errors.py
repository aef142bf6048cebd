"""Exception hierarchy shared by all starkloop modules."""

from __future__ import annotations


class StarkloopError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(StarkloopError, ValueError):
    """An argument lies outside the domain of a model relation."""


class DimensionError(StarkloopError, ValueError):
    """An array has the wrong shape."""


class SolverError(StarkloopError):
    """The constrained harmonic-balance system could not be solved.

    Attributes
    ----------
    condition : float
        Estimated 2-norm condition number of the stacked system.
    """

    def __init__(self, message: str, condition: float = float("nan")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ResidualError(StarkloopError):
    """A solution failed its a-posteriori residual check."""


class HarmonicRangeError(StarkloopError, IndexError):
    """A harmonic index outside the truncation was requested."""


class MetricError(StarkloopError):
    """A derived metric is undefined (e.g. a zero reference phasor)."""


class IntegrationError(StarkloopError):
    """Direct time-domain integration failed."""


class WindowError(StarkloopError, ValueError):
    """A demodulation window does not span an integer number of periods."""


class EstimatorError(StarkloopError, ValueError):
    """An estimator received degenerate input."""


class BranchError(StarkloopError):
    """No injective branch of a response map contains the design level."""


class OptimizationError(StarkloopError):
    """A design objective has no well-defined optimum."""


class DistributionError(StarkloopError, ValueError):
    """A bias distribution cannot be represented with positive nodes."""


class ConfigError(StarkloopError, ValueError):
    """Invalid experiment configuration.

    Attributes
    ----------
    field : str
        Dotted path of the offending configuration field.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class RangeError(StarkloopError, ValueError):
    """A query point lies outside the region where a quantity is defined."""
