"""Sensitivity and adjoint solves around the principal eigenpair.

Both problems involve the operator ``K + B(h) - lam M`` on the
Dirichlet-constrained space, which is singular because lam is an
eigenvalue.  A scalar Lagrange-multiplier border enforcing
M-orthogonality to the eigenfunction makes the system nonsingular
whenever the eigenvalue is simple, which is the discrete counterpart of
the Fredholm solvability of the continuous problems.

The bordered matrix is symmetric by construction.  For the sensitivity
problem the right-hand side is M-orthogonal to the eigenfunction, so
the multiplier vanishes up to roundoff; for the adjoint problem the
multiplier absorbs the incompatibility of the Dirichlet data and is
reported as part of the solution.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import DegeneracyError, ParameterError, SolverError
from .fields import BoundaryField, RobinField, ScalarField
from .fem import boundary_inner, neumann_trace, workspace
from .mesh import GAMMA, GAMMA_D

_MU_TOL = 1e-8
_RESIDUAL_TOL = 1e-9


@dataclass
class SensitivityResult:
    """Directional derivative of the principal eigenpair.

    ``u_prime`` vanishes on the Dirichlet nodes and is M-orthogonal to
    the eigenfunction; ``lambda_prime`` is the eigenvalue derivative.
    """

    lambda_prime: float
    u_prime: ScalarField


@dataclass
class AdjointState:
    """Adjoint field for the misfit functional.

    ``phi`` equals the prescribed Dirichlet data on the GAMMA_D nodes
    and is M-orthogonal to the eigenfunction.  ``multiplier`` is the
    Lagrange multiplier of the orthogonality border.
    """

    phi: ScalarField
    multiplier: float


def eigenvalue_derivative(mesh, eig, xi):
    """Derivative of the principal eigenvalue in the direction xi.

    Equals the boundary integral of ``xi * u^2`` over GAMMA for the
    normalized eigenfunction u.
    """
    _check_direction(mesh, xi)
    return boundary_inner(mesh, GAMMA, eig.u, eig.u, xi)


def _check_direction(mesh, xi):
    if not isinstance(xi, BoundaryField) or xi.tag != GAMMA:
        raise ParameterError("xi must be a boundary field on GAMMA")
    if xi.mesh is not mesh:
        raise ParameterError("xi lives on a different mesh")


def _check_coefficient(mesh, h):
    if not isinstance(h, RobinField) or h.mesh is not mesh:
        raise ParameterError("h must be a RobinField on the given mesh")
    if not h.admissible:
        raise ParameterError("h must be admissible")


class _BorderedSystem:
    """Factorized bordered operator for one (h, eigenpair) configuration."""

    def __init__(self, mesh, h, eig):
        ws = workspace(mesh)
        self.ws = ws
        self.dmap = ws.dirichlet
        self.C = ws.operator(h) - eig.lam * ws.M
        self.Mu = ws.M @ eig.u.values
        free = self.dmap.free
        C_ff = self.C[free][:, free]
        border = sp.csr_matrix(
            (self.Mu[free], (np.zeros(free.size, dtype=np.int64), np.arange(free.size))),
            shape=(1, free.size),
        )
        S = sp.bmat([[C_ff, border.T], [border, None]], format="csc")
        try:
            self.lu = spla.splu(S)
        except RuntimeError as exc:
            raise DegeneracyError(
                "bordered system is singular (eigenvalue not simple enough): %s" % exc
            )
        self.S = S

    def solve(self, rhs_free, border_rhs):
        rhs = np.append(rhs_free, border_rhs)
        sol = self.lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise DegeneracyError("bordered solve produced non-finite values")
        defect = self.S @ sol - rhs
        scale = max(float(np.linalg.norm(rhs)), 1.0)
        if float(np.linalg.norm(defect)) > _RESIDUAL_TOL * scale:
            raise SolverError(
                "bordered solve residual %g above tolerance"
                % (float(np.linalg.norm(defect)) / scale)
            )
        return sol[:-1], float(sol[-1])


def solve_sensitivity(mesh, h, eig, xi):
    """Directional derivative (u', lambda') of the eigenpair at h.

    Solves the bordered system

        [A - lam M,  M u] [u']   [lambda' M u - B(xi) u]
        [(M u)^T,      0] [mu] = [0]

    on the free nodes, where A = K + B(h).  The border enforces the
    M-orthogonality of u' to u; the multiplier must vanish because the
    right-hand side is M-orthogonal to u by the definition of lambda'.
    """
    _check_coefficient(mesh, h)
    _check_direction(mesh, xi)
    ws = workspace(mesh)
    u = eig.u.values
    B_xi = ws.robin_mass(xi)
    # Using the quadratic form keeps the right-hand side M-orthogonal to u
    # at machine precision; it equals eigenvalue_derivative up to roundoff.
    lambda_prime = float(u @ (B_xi @ u))
    rhs_full = lambda_prime * (ws.M @ u) - B_xi @ u
    system = _BorderedSystem(mesh, h, eig)
    x, mu = system.solve(rhs_full[system.dmap.free], 0.0)
    if abs(mu) > _MU_TOL:
        raise SolverError(
            "sensitivity multiplier %g exceeds %g; eigenpair inconsistent"
            % (mu, _MU_TOL)
        )
    return SensitivityResult(lambda_prime, ScalarField(mesh, system.dmap.expand(x)))


def solve_adjoint(mesh, h, eig, g_data):
    """Adjoint state driven by the Neumann misfit as Dirichlet data.

    The misfit ``neumann_trace(u) - g_data`` is lifted nodally into the
    mesh (its value on the GAMMA_D nodes, zero elsewhere), and the
    homogeneous remainder solves the same bordered operator as the
    sensitivity problem.  The returned field carries the prescribed
    boundary values exactly and is M-orthogonal to the eigenfunction.
    """
    _check_coefficient(mesh, h)
    if not isinstance(g_data, BoundaryField) or g_data.tag != GAMMA_D:
        raise ParameterError("g_data must be a boundary field on GAMMA_D")
    if g_data.mesh is not mesh:
        raise ParameterError("g_data lives on a different mesh")

    trace = neumann_trace(mesh, eig.u, eig.lam, h)
    d = trace.values - g_data.values
    lifting = np.zeros(mesh.n_vertices)
    lifting[trace.node_ids] = d

    system = _BorderedSystem(mesh, h, eig)
    rhs_full = -(system.C @ lifting)
    border_rhs = -float(system.Mu @ lifting)
    x, mu = system.solve(rhs_full[system.dmap.free], border_rhs)
    phi = system.dmap.expand(x)
    phi[trace.node_ids] = d
    return AdjointState(ScalarField(mesh, phi), mu)


def sensitivity_trace(mesh, h, eig, xi, sens):
    """Variational Neumann trace of the sensitivity field on GAMMA_D.

    Recovered from the weak-form residual of the sensitivity equation
    tested with the GAMMA_D nodal bases, mirroring ``neumann_trace``.
    """
    _check_coefficient(mesh, h)
    _check_direction(mesh, xi)
    ws = workspace(mesh)
    u = eig.u.values
    up = sens.u_prime.values
    C = ws.operator(h) - eig.lam * ws.M
    residual = C @ up - sens.lambda_prime * (ws.M @ u) + ws.robin_mass(xi) @ u
    return ws.flux_from_residual(residual)
