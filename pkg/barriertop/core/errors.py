from typing import Any, Dict, Optional


class BarrierTopError(Exception):
    """Base error. Carries a human readable detail and optional context."""

    exit_code = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extra = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.detail} ({extra})"


class ConfigError(BarrierTopError):
    exit_code = 2


class NumericalError(BarrierTopError):
    exit_code = 1


# model
class SectorViolation(NumericalError):
    pass


class PoleProximity(NumericalError):
    pass


class DegenerateMaximum(NumericalError):
    pass


# lattice
class ForbiddenRadius(NumericalError):
    pass


# operator
class InvalidScaling(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SectorUncovered(NumericalError):
    pass


class ContourTooClose(NumericalError):
    pass


class QuadratureDivergence(NumericalError):
    pass


# geometry
class DimensionUnsupported(NumericalError):
    pass


class StepFailure(NumericalError):
    pass


class WindowTooShort(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class LongRangeUnsupported(NumericalError):
    pass


class TailDivergence(NumericalError):
    pass


# curves
class PrescriptionNotInKernel(NumericalError):
    pass


class TruncationTooLow(NumericalError):
    pass


class ContractionViolated(NumericalError):
    pass


class TailTruncationError(NumericalError):
    pass


class PrescriptionDrift(NumericalError):
    pass


# projection
class RankDeficiency(NumericalError):
    pass


class NormalizationDegenerate(NumericalError):
    pass


class InconsistentFactorization(NumericalError):
    pass


class WindowInClassicallyForbiddenRegion(NumericalError):
    pass


# dynamics
class NonSimpleResonance(NumericalError):
    pass


class NoExponentialRegime(NumericalError):
    pass


# scattering
class MatchingRadiusTooSmall(NumericalError):
    pass


class StiffnessFailure(NumericalError):
    pass


class MethodDisagreement(NumericalError):
    pass


class PoleMissed(NumericalError):
    pass


# Non-fatal conditions, recorded in the run manifest
class BarrierTopWarning(UserWarning):
    pass


class ResolutionWarning(BarrierTopWarning):
    pass


class SingularResolventWarning(BarrierTopWarning):
    pass
