"""Exception hierarchy shared by all fbms modules."""


class FBMSError(Exception):
    """Base class for every error raised by fbms."""


class MeshError(FBMSError):
    pass


class ParseError(MeshError):
    pass


class NonManifoldError(MeshError):
    pass


class ClosedSurfaceError(MeshError):
    pass


class OrientationError(MeshError):
    pass


class DegenerateTriangleError(MeshError):
    pass


class TopologyError(FBMSError):
    pass


class ResolutionError(FBMSError, ValueError):
    pass


class FrameError(FBMSError, ValueError):
    pass


class OffBoundaryError(FBMSError, ValueError):
    pass


class TangencyError(FBMSError, ValueError):
    pass


class ValidationError(FBMSError):
    """Surface is not a free-boundary minimal surface within tolerance."""


class AdmissibilityError(FBMSError, ValueError):
    pass


class SolveError(FBMSError):
    pass


class ConvergenceError(FBMSError):
    pass


class DimensionError(FBMSError, ValueError):
    pass


class GridError(FBMSError, ValueError):
    pass


class SizeError(FBMSError, ValueError):
    pass


class ZeroFieldError(FBMSError, ValueError):
    pass


class ParameterError(FBMSError, ValueError):
    pass


class RankError(FBMSError, ValueError):
    pass


class SignError(FBMSError, ValueError):
    pass


class InputMismatchError(FBMSError, ValueError):
    pass


class ConfigError(FBMSError):
    pass


class AmbiguityWarning(UserWarning):
    """An eigenvalue sits close to the zero-classification threshold."""


class TruncationWarning(UserWarning):
    pass
