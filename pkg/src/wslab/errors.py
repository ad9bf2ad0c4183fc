"""Exception hierarchy shared by all wslab modules."""


class WaveguideError(Exception):
    """Base class for every error raised by wslab."""


# geometry
class NonPositiveCurvature(WaveguideError):
    pass


class GridTooCoarse(WaveguideError):
    pass


class OutOfDomain(WaveguideError):
    pass


class DegenerateJacobian(WaveguideError):
    pass


class HypothesisViolated(WaveguideError):
    def __init__(self, message, quantity=None, value=None):
        super().__init__(message)
        self.quantity = quantity
        self.value = value


# cross-section / meshing
class MeshFailure(WaveguideError):
    pass


class ExtrapolationUnstable(WaveguideError):
    pass


# linear algebra
class SolverNoConvergence(WaveguideError):
    pass


class FactorizationFailure(WaveguideError):
    pass


class ZeroVector(WaveguideError):
    pass


# assembly
class DimensionMismatch(WaveguideError):
    pass


class NegativeWeight(WaveguideError):
    pass


# analysis
class NoCertificateFound(WaveguideError):
    pass


class InvariantCrossSection(WaveguideError):
    pass


class OverlappingPartition(WaveguideError):
    pass


# cli
class ConfigError(WaveguideError):
    pass


class NumericalFailure(WaveguideError):
    pass


class TheoremCheckFailed(WaveguideError):
    def __init__(self, message, check=None):
        super().__init__(message)
        self.check = check
