"""Exception types shared across the toolkit."""


class SobenchError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(SobenchError, ValueError):
    """Operands have incompatible shapes."""


class ConfigurationError(SobenchError, ValueError):
    """Invalid configuration value, unknown key, or bad parameter combination."""


class EmptyRequest(SobenchError, ValueError):
    """A sampler was asked for zero values."""


class InsufficientSamples(SobenchError, ValueError):
    """Too few samples for the requested estimator."""


class InvalidGradient(SobenchError, ValueError):
    """Gradient passed to an oracle contains NaN."""


class InvalidConstraint(SobenchError, ValueError):
    """Constraint data violates positivity / feasibility requirements."""


class SolverStall(SobenchError, RuntimeError):
    """LP solver exceeded its iteration cap without reaching an optimum."""


class UndefinedMetric(SobenchError, ValueError):
    """Metric is undefined for the given inputs (e.g. zero denominator)."""


class DegeneratePair(SobenchError, ValueError):
    """Correction pair with zero curvature reached the BFGS update."""


class RunAborted(SobenchError, RuntimeError):
    """An optimizer run failed mid-way; the partial trace is attached.

    Attributes:
        partial_record: RunRecord with rows up to the failing step.
    """

    def __init__(self, message, partial_record=None):
        super().__init__(message)
        self.partial_record = partial_record
