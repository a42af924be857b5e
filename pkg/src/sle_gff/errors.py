"""Exception types raised across the package."""


class SleGffError(Exception):
    """Base class for all errors raised by this package."""


class DomainMismatch(SleGffError):
    pass


class SingularEvaluation(SleGffError):
    pass


class TruncationFailure(SleGffError):
    pass


class CoincidentPoints(SleGffError):
    pass


class UnsupportedProfile(SleGffError):
    pass


class ExtrapolationDivergence(SleGffError):
    pass


class SolverNonConvergence(SleGffError):
    pass


class StepTooLarge(SleGffError):
    pass


class ModulusExhausted(SleGffError):
    pass


class InverseDivergence(SleGffError):
    pass


class SelfIntersection(SleGffError):
    pass


class CapacityStall(SleGffError):
    pass


class HullTooLarge(SleGffError):
    pass


class CollisionWithForcePoint(SleGffError):
    pass


class ThetaOutOfRange(SleGffError):
    pass


class MarkedPointCollision(SleGffError):
    pass


class DriftBlowup(SleGffError):
    pass


class SwallowedPoint(SleGffError):
    pass


class BranchAmbiguity(SleGffError):
    pass


class DerivativeUnderflow(SleGffError):
    pass


class FDStepInvalid(SleGffError):
    pass


class DegenerateStopping(SleGffError):
    pass


class FactorizationFailure(SleGffError):
    pass


class NoInterface(SleGffError):
    pass


class RasterizationConflict(SleGffError):
    pass


class ConfigInvalid(SleGffError):
    pass
