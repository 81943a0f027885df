"""Exception hierarchy shared across the package."""


class RobinRecoverError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(RobinRecoverError, ValueError):
    """Invalid argument, configuration value, or input field."""


class AdmissibilityError(ParameterError):
    """Robin coefficient violates the positivity requirement."""


class FileFormatError(ParameterError):
    """Malformed mesh or data file.  Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class MeshValidationError(ParameterError):
    """Mesh violates a structural invariant (tags, orientation, normals)."""


class TopologyError(ParameterError):
    """Tagged boundary part is not a single closed polyline."""


class AssemblyError(RobinRecoverError):
    """Finite-element assembly failure (degenerate element)."""


class SolverError(RobinRecoverError, RuntimeError):
    """Linear-algebra failure: factorization breakdown or singular system."""


class DegeneracyError(SolverError):
    """Bordered system is singular; the principal eigenvalue is not simple
    enough at the discrete level."""


class ConvergenceError(SolverError):
    """Iteration budget exhausted before reaching tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ReconstructionError(SolverError):
    """Reconstruction aborted mid-run.  Carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
