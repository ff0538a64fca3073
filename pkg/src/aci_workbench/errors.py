"""Exception hierarchy for the workbench."""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class DimensionError(WorkbenchError, ValueError):
    """Operands have incompatible sizes or variable sets."""


class TruncationError(WorkbenchError):
    """A series coefficient beyond the known precision was requested."""


class WeightHomogeneityError(WorkbenchError):
    """The vector field admits no positive integer weights."""


class BalanceError(WorkbenchError):
    """The leading-order balance equations could not be solved."""


class SpectrumError(WorkbenchError):
    """The Kowalewski matrix violates a structural expectation."""


class FamilyError(WorkbenchError):
    """A resonance compatibility condition failed: not a coherent family."""


class FitError(WorkbenchError):
    """Curve fitting produced no unique relation."""


class CurveError(WorkbenchError):
    """A curve operation was requested on an unsuitable relation."""


class SingularCurveError(WorkbenchError):
    """The curve model has (numerically) repeated branch points."""


class CycleConstructionError(WorkbenchError):
    """Homology cycles cannot be routed between branch points."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None) -> None:
        super().__init__(message)
        self.pair = pair


class QuadratureError(WorkbenchError):
    """Adaptive quadrature failed to converge."""


class PeriodMatrixError(WorkbenchError):
    """A period matrix fails the Riemann bilinear relations."""


class InvolutionError(WorkbenchError):
    """The involution is not defined over the period lattice."""


class NormalFormError(WorkbenchError):
    """The involution cannot be brought to normal form over the integers."""

    def __init__(self, message: str, elementary_divisors: list[int] | None = None) -> None:
        super().__init__(message)
        self.elementary_divisors = elementary_divisors or []


class SplitError(WorkbenchError):
    """The adapted period matrix does not have the expected block structure."""


class PolarizationError(WorkbenchError):
    """No polarization type is defined for the requested data."""


class ParameterError(WorkbenchError):
    """System parameters violate the registry constraints."""


class SeriesDivergenceError(WorkbenchError):
    """A truncated Laurent series is visibly divergent at the requested time."""


class ConfigError(WorkbenchError):
    """The pipeline configuration is malformed."""
