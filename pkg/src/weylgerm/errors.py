"""Exception hierarchy shared by all modules."""


class WeylGermError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(WeylGermError):
    """A numerical procedure failed (CLI exit code 3)."""


class CausticError(NumericalError):
    """A determinant that must not vanish did vanish (focal point / caustic)."""


class BranchError(NumericalError):
    """Square-root branch could not be tracked continuously; refine the path."""


class InconclusiveError(NumericalError):
    """A limiting procedure did not stabilise."""


class SymplecticDefectError(NumericalError):
    """Matrix too far from the symplectic group to be projected back."""


class EscapeError(NumericalError):
    """Trajectory left the admissible region of phase space."""


class StepUnderflowError(NumericalError):
    """Adaptive step size dropped below the minimum."""


class ConvergenceError(NumericalError):
    """Resolution doubling / step halving changed the result by more than tol."""


class GridError(NumericalError):
    """Wavefunction does not fit the grid (edge decay, coverage, Nyquist)."""


class ParseError(WeylGermError, ValueError):
    """Malformed symbol text; ``pos`` is the 0-based character offset."""

    def __init__(self, message, pos):
        super().__init__(f"{message} (at position {pos})")
        self.message = message
        self.pos = pos


class ConfigError(WeylGermError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class LagrangianError(WeylGermError, ValueError):
    """Curve data violate dS/dalpha = p0 dq0/dalpha beyond the curve tolerance."""
