"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`NumericalError`; configuration problems derive from
:class:`ConfigError`. The CLI maps the two families to exit codes 1 and 2.
"""

from __future__ import annotations


class PseudoAbelianError(Exception):
    """Base class. ``module`` and ``operation`` are echoed by the CLI."""

    module = "core"

    def __init__(self, message: str, *, operation: str | None = None, data=None):
        super().__init__(message)
        self.operation = operation
        self.data = data


class NumericalError(PseudoAbelianError):
    pass


class ConfigError(PseudoAbelianError):
    pass


class DomainError(NumericalError, ValueError):
    module = "darboux_core"


class PoleError(NumericalError):
    module = "darboux_core"


class GenericityViolation(NumericalError):
    module = "darboux_core"


class TracerError(NumericalError):
    module = "oval_tracer"


class NoCriticalPoint(TracerError):
    pass


class LevelNotBracketed(TracerError, ValueError):
    pass


class StepCollapse(TracerError):
    pass


class MaxStepsExceeded(TracerError):
    pass


class ProjectionDivergence(TracerError):
    pass


class QuadratureError(NumericalError):
    module = "integrator"


class PoleOnContour(QuadratureError):
    pass


class ToleranceNotMet(QuadratureError):
    pass


class TransportError(NumericalError):
    module = "transport"


class CriticalPointHit(TransportError):
    pass


class MarkersLeftDomain(TransportError):
    pass


class CycleNotInBidisc(TransportError):
    pass


class CompensatorError(NumericalError):
    module = "compensator"


class NoConvergence(CompensatorError):
    pass


class SingularArgument(CompensatorError, ValueError):
    pass


class LeftChartDomain(CompensatorError):
    pass


class DifferenceError(NumericalError):
    module = "difference_lab"


class DomainViolation(DifferenceError, ValueError):
    pass


class Divergence(DifferenceError):
    pass


class DecayAssumptionViolated(DifferenceError):
    pass


class InsufficientExpansionOrder(DifferenceError, ValueError):
    pass


class ZeroCountError(NumericalError):
    module = "zero_counter"


class ZeroOnContour(ZeroCountError):
    pass


class UndersampledPhase(ZeroCountError):
    pass


class NonIntegerWinding(ZeroCountError):
    pass


class MonotonicityFailure(ZeroCountError):
    pass


class FitError(ZeroCountError):
    pass
