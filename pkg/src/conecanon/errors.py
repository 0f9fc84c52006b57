"""Exception hierarchy shared by every module."""


class ConeError(Exception):
    """Base class for all package errors."""


class MalformedSpec(ConeError):
    pass


class DimensionMismatch(ConeError):
    pass


class UnsupportedDual(ConeError):
    pass


class SliceUnbounded(ConeError):
    pass


class NonInteriorPoint(ConeError):
    pass


class SingularMatrix(ConeError):
    pass


class IllConditionedMetric(ConeError):
    pass


class DegenerateHessian(ConeError):
    pass


class NonConvexWitness(ConeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DomainMismatch(ConeError):
    pass


class UnboundedDomain(ConeError):
    pass


class RankDeficient(ConeError):
    pass


class NoConvergence(ConeError):
    pass


class NonConvexIterate(ConeError):
    pass


class UnliftablePoint(ConeError):
    pass


class NoInscribedSimplex(ConeError):
    pass


class RayMiss(ConeError):
    pass


class OutsideRegion(ConeError):
    pass


class Infeasible(ConeError):
    pass


class Unbounded(ConeError):
    pass


class SingularKKT(ConeError):
    pass
