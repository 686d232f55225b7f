"""Exception hierarchy shared by the lab modules and mapped to exit codes by the app."""


class LabError(Exception):
    """Base class for every error raised by the lab."""


class ParameterError(LabError, ValueError):
    """A parameter violates a documented range invariant."""


class DomainError(LabError, ValueError):
    """An evaluator was called outside its domain (z <= 0, x = 0, zero norm)."""


class ConfigError(LabError):
    """Invalid run configuration. `key` is the dotted path of the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class EigenSolveError(LabError):
    """Eigensolver failure: non-convergence, residual above tolerance or boundary decay violation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class QuadratureError(LabError):
    """Time quadrature did not converge before the node cap, or a Sobolev norm failed its Plancherel check."""

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates or ()


class PaddingError(LabError):
    """Field support touches the boundary of its FFT box."""

    def __init__(self, message, boundary_ratio=None):
        super().__init__(message)
        self.boundary_ratio = boundary_ratio


class BoxTruncationError(LabError):
    """Evolved field reached the box boundary."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class CacheFormatError(LabError):
    """Malformed cache header, payload size mismatch or checksum mismatch."""


class ArchiveError(LabError):
    """The run archive is missing, malformed or does not hold the requested entry."""
