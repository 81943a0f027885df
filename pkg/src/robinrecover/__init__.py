"""Mixed Dirichlet-Robin eigensolver and Robin coefficient recovery.

The package solves the Laplace eigenvalue problem with a Robin
condition on an inaccessible boundary part and a homogeneous Dirichlet
condition on an accessible part, and reconstructs the Robin coefficient
from the principal eigenvalue plus the Neumann trace of the principal
eigenfunction on the accessible part, by adjoint gradient descent with
optional Tikhonov regularization.
"""

__version__ = "0.1.0"

from .eigen import EigenPair, lowest_eigenvalues, principal_eigenpair
from .exceptions import (
    AdmissibilityError,
    AssemblyError,
    ConvergenceError,
    DegeneracyError,
    FileFormatError,
    MeshValidationError,
    ParameterError,
    ReconstructionError,
    RobinRecoverError,
    SolverError,
    TopologyError,
)
from .fields import BoundaryField, RobinField, ScalarField
from .fem import (
    apply_dirichlet,
    assemble_boundary_mass,
    assemble_mass,
    assemble_robin_boundary_mass,
    assemble_stiffness,
    boundary_inner,
    boundary_l2_norm,
    domain_inner,
    neumann_trace,
)
from .inverse import (
    BOUNDARY_L2,
    DISCRETE_C1,
    ReconstructionConfig,
    ReconstructionTrace,
    RobinReconstructor,
    evaluate_functional,
    functional_gradient,
    reconstruct,
    relative_l2_error,
)
from .mesh import (
    GAMMA,
    GAMMA_D,
    TriMesh,
    boundary_arc_parameterization,
    build_annulus_mesh,
    load_mesh,
    save_mesh,
)
from .radial import RadialSolution, dirichlet_annulus_eigenvalue, radial_principal
from .sensitivity import (
    AdjointState,
    SensitivityResult,
    eigenvalue_derivative,
    sensitivity_trace,
    solve_adjoint,
    solve_sensitivity,
)
from .spectral import (
    SpectralData,
    add_noise,
    calibrated_noise,
    load_spectral_data,
    periodic_interp,
    save_spectral_data,
    synthesize_data,
    transfer_to_mesh,
)
from .targets import BUILTIN_TARGETS, resolve_target

__all__ = [name for name in dir() if not name.startswith("_")]
