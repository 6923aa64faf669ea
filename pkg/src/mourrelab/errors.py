"""Exception hierarchy shared by every module of the package."""


class MourreLabError(Exception):
    """Base class for all package errors."""


class NonSquare(MourreLabError):
    pass


class AsymmetryExceedsTolerance(MourreLabError):
    def __init__(self, measured, tol):
        self.measured = measured
        self.tol = tol
        super().__init__(
            f"relative asymmetry {measured:.3e} exceeds tolerance {tol:.3e}"
        )


class EigensolverFailure(MourreLabError):
    pass


class FunctionUndefinedAtEigenvalue(MourreLabError):
    pass


class RealShift(MourreLabError):
    """Raised when a resolvent is requested on the real axis."""


class DimensionMismatch(MourreLabError):
    pass


class BadScale(MourreLabError):
    pass


class BadExponent(MourreLabError):
    pass


class InsufficientDerivatives(MourreLabError):
    pass


class BadSymbolOrder(MourreLabError):
    pass


class QuadratureNotConverged(MourreLabError):
    """Carries the best iterate so callers may still use it."""

    def __init__(self, message, result=None, certificate=None):
        super().__init__(message)
        self.result = result
        self.certificate = certificate


class OrderViolation(MourreLabError):
    pass


class DegenerateFit(MourreLabError):
    pass


class HypothesisViolated(MourreLabError):
    pass


class NonInvariantProjection(MourreLabError):
    pass


class SymbolNotVanishingAtZero(MourreLabError):
    pass


class EtaBelowFloor(MourreLabError):
    pass


class TooSmall(MourreLabError):
    pass


class LengthMismatch(MourreLabError):
    pass


class DependentVectors(MourreLabError):
    pass


class IntervalViolation(MourreLabError):
    pass


class RegistryMiss(MourreLabError):
    pass


class ParseError(MourreLabError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class VerdictFailure(MourreLabError):
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("verdict failures: " + ", ".join(self.failures))
