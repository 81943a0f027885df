"""Reconstruction of the Robin coefficient from spectral data.

The misfit functional tracks the Neumann trace on the accessible
boundary and the principal eigenvalue:

    F(h) = 1/2 ||dnu(u(h)) - g||^2_{L2(GAMMA_D)} + 1/2 |lam(h) - lam|^2
           + eta/2 ||h||^2_{L2(GAMMA)},

and its gradient has the boundary representation

    G = u * phi + (lam(h) - lam) * u^2 + eta * h       on GAMMA,

with phi the adjoint state driven by the Neumann misfit.  The descent
iteration h_{k+1} = h_k + tau * delta_k with delta_k = -G(h_k) runs with
a fixed step size until the chosen norm of delta_k drops below the
tolerance or the iteration budget is exhausted.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .eigen import principal_eigenpair
from .exceptions import ParameterError, ReconstructionError, SolverError
from .fields import BoundaryField, RobinField
from .fem import boundary_inner, boundary_l2_norm, neumann_trace, workspace
from .mesh import GAMMA, boundary_arc_parameterization
from .sensitivity import solve_adjoint
from .spectral import SpectralData, periodic_interp, transfer_to_mesh

BOUNDARY_L2 = "boundary_l2"
DISCRETE_C1 = "discrete_c1"
_NORMS = (BOUNDARY_L2, DISCRETE_C1)

H_MIN = 1e-6


@dataclass
class ReconstructionConfig:
    """Fixed-step gradient descent parameters.

    ``gradient_norm`` selects the stopping norm for the descent
    direction: plain boundary L2, or the discrete C1 surrogate (max of
    the nodal sup and the edgewise tangential difference quotients),
    which is the default.
    """

    tau: float = 0.5
    tol: float = 1e-5
    eta: float = 0.0
    max_iter: int = 500
    gradient_norm: str = DISCRETE_C1

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ParameterError("tau must be positive")
        if not self.tol > 0.0:
            raise ParameterError("tol must be positive")
        if self.eta < 0.0:
            raise ParameterError("eta must be nonnegative")
        if int(self.max_iter) < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.gradient_norm not in _NORMS:
            raise ParameterError(
                "gradient_norm must be one of %s" % (_NORMS,)
            )


@dataclass
class ReconstructionTrace:
    """Per-iteration record of a descent run."""

    h_iterates: list = field(default_factory=list)
    functional: list = field(default_factory=list)
    gradient_norms: list = field(default_factory=list)
    eigenvalues: list = field(default_factory=list)
    rel_errors: list = field(default_factory=list)
    clamped: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.functional)

    def write_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("iter,F,grad_norm,lambda,rel_err\n")
            for k in range(self.iterations):
                err = self.rel_errors[k]
                fh.write(
                    "%d,%s,%s,%s,%s\n"
                    % (
                        k,
                        repr(float(self.functional[k])),
                        repr(float(self.gradient_norms[k])),
                        repr(float(self.eigenvalues[k])),
                        "" if err is None else repr(float(err)),
                    )
                )


def direction_norm(mesh, values, kind):
    """Norm of a GAMMA nodal field per the configured convention."""
    fld = values if isinstance(values, BoundaryField) else BoundaryField(mesh, GAMMA, values)
    if kind == BOUNDARY_L2:
        return boundary_l2_norm(mesh, GAMMA, fld)
    if kind != DISCRETE_C1:
        raise ParameterError("unknown norm %r" % (kind,))
    rows = mesh.edges_with_tag(GAMMA)
    edges = mesh.boundary_edges[rows]
    lengths = mesh.edge_lengths(rows)
    full = fld.as_full_vector()
    slopes = np.abs(full[edges[:, 1]] - full[edges[:, 0]]) / lengths
    return max(float(np.max(np.abs(fld.values))), float(np.max(slopes)))


def _check_problem(mesh, h, data):
    if not isinstance(h, RobinField) or h.mesh is not mesh:
        raise ParameterError("h must be a RobinField on the reconstruction mesh")
    if not h.admissible:
        raise ParameterError("h must be admissible")
    if not isinstance(data, SpectralData):
        raise ParameterError("data must be SpectralData")


class _Objective:
    """Shared pipeline for functional and gradient evaluations at one mesh."""

    def __init__(self, mesh, data, eta):
        self.mesh = mesh
        self.data = data
        self.eta = float(eta)
        self.ws = workspace(mesh)
        self.g_obs = transfer_to_mesh(data, mesh)
        self.gamma_nodes = self.ws.gamma_nodes

    def forward(self, h, u0=None, tol=1e-10, max_iter=1000):
        eig = principal_eigenpair(self.mesh, h, tol=tol, max_iter=max_iter, u0=u0)
        g_h = neumann_trace(self.mesh, eig.u, eig.lam, h)
        misfit = BoundaryField(self.mesh, self.g_obs.tag, g_h.values - self.g_obs.values)
        value = (
            0.5 * boundary_inner(self.mesh, misfit.tag, misfit, misfit)
            + 0.5 * (eig.lam - self.data.lam) ** 2
            + 0.5 * self.eta * boundary_inner(self.mesh, GAMMA, h, h)
        )
        return eig, value

    def gradient(self, h, eig):
        adjoint = solve_adjoint(self.mesh, h, eig, self.g_obs)
        u_g = eig.u.values[self.gamma_nodes]
        phi_g = adjoint.phi.values[self.gamma_nodes]
        values = u_g * phi_g + (eig.lam - self.data.lam) * u_g * u_g + self.eta * h.values
        return RobinField(self.mesh, values, admissible=False)


def evaluate_functional(mesh, h, data, eta=0.0):
    """Regularized Neumann tracking functional at h."""
    _check_problem(mesh, h, data)
    _, value = _Objective(mesh, data, eta).forward(h)
    return value


def functional_gradient(mesh, h, data, eta=0.0):
    """Boundary representation of the functional gradient at h.

    The descent direction of the reconstruction algorithm is the
    negation of the returned field.
    """
    _check_problem(mesh, h, data)
    objective = _Objective(mesh, data, eta)
    eig, _ = objective.forward(h)
    return objective.gradient(h, eig)


def reconstruct(mesh, data, h0, config, h_true_fn=None):
    """Fixed-step adjoint gradient descent from h0.

    Each iteration records the coefficient, functional value, direction
    norm, eigenvalue, and (when ``h_true_fn`` is given) the relative L2
    error against the ground truth evaluated at the GAMMA nodes.  If an
    update would leave the admissible set, the offending nodal values
    are clamped to ``H_MIN`` and the event is recorded.

    Returns the final coefficient and the trace.  Solver failures abort
    with ReconstructionError carrying the partial trace.
    """
    _check_problem(mesh, h0, data)
    if not isinstance(config, ReconstructionConfig):
        raise ParameterError("config must be a ReconstructionConfig")

    objective = _Objective(mesh, data, config.eta)
    trace = ReconstructionTrace()
    h = h0
    u_warm = None
    true_values = None
    if h_true_fn is not None:
        nodes = objective.gamma_nodes
        true_values = h_true_fn(mesh.vertices[nodes, 0], mesh.vertices[nodes, 1])

    for _ in range(int(config.max_iter)):
        try:
            eig, value = objective.forward(h, u0=u_warm)
            grad = objective.gradient(h, eig)
        except SolverError as exc:
            raise ReconstructionError(
                "solver failed at iteration %d: %s" % (trace.iterations, exc),
                trace=trace,
            )
        delta = -grad.values
        norm = direction_norm(mesh, grad, config.gradient_norm)

        trace.h_iterates.append(h.values.copy())
        trace.functional.append(value)
        trace.gradient_norms.append(norm)
        trace.eigenvalues.append(eig.lam)
        if true_values is None:
            trace.rel_errors.append(None)
        else:
            trace.rel_errors.append(_relative_l2(mesh, h.values, true_values))

        updated = h.values + config.tau * delta
        clamp = updated < H_MIN
        if np.any(clamp):
            updated = np.where(clamp, H_MIN, updated)
        trace.clamped.append(bool(np.any(clamp)))
        h = h.replace_values(updated, admissible=True)
        u_warm = eig.u

        if norm <= config.tol:
            trace.converged = True
            break

    return h, trace


def _relative_l2(mesh, rec_values, true_values):
    diff = BoundaryField(mesh, GAMMA, rec_values - true_values)
    ref = BoundaryField(mesh, GAMMA, true_values)
    denom = boundary_l2_norm(mesh, GAMMA, ref)
    if denom == 0.0:
        raise ParameterError("ground truth has zero L2 norm")
    return boundary_l2_norm(mesh, GAMMA, diff) / denom


def relative_l2_error(mesh, h_rec, h_true_fn):
    """Relative L2(GAMMA) error of a reconstruction against a closed form.

    The ground truth is evaluated at the GAMMA nodes of the
    reconstruction mesh, so no cross-mesh interpolation enters the
    metric.
    """
    if not isinstance(h_rec, BoundaryField) or h_rec.tag != GAMMA:
        raise ParameterError("h_rec must be a boundary field on GAMMA")
    nodes = h_rec.node_ids
    true_values = h_true_fn(mesh.vertices[nodes, 0], mesh.vertices[nodes, 1])
    return _relative_l2(mesh, h_rec.values, np.asarray(true_values, dtype=float))


class RobinReconstructor(BaseEstimator):
    """Estimator-style wrapper around the descent reconstruction.

    Parameters mirror ReconstructionConfig plus the reconstruction mesh
    and the initial guess (a constant or a RobinField).  After ``fit``
    the reconstructed coefficient is available as ``coefficient_`` and
    can be evaluated at arbitrary boundary angles with ``predict``.
    """

    def __init__(
        self,
        mesh=None,
        tau=0.5,
        eta=0.0,
        tol=1e-5,
        max_iter=500,
        gradient_norm=DISCRETE_C1,
        h0=1.0,
    ):
        self.mesh = mesh
        self.tau = tau
        self.eta = eta
        self.tol = tol
        self.max_iter = max_iter
        self.gradient_norm = gradient_norm
        self.h0 = h0

    def _config(self):
        return ReconstructionConfig(
            tau=self.tau,
            tol=self.tol,
            eta=self.eta,
            max_iter=self.max_iter,
            gradient_norm=self.gradient_norm,
        )

    def fit(self, data, h_true_fn=None):
        """Run the reconstruction on one spectral measurement."""
        if self.mesh is None:
            raise ParameterError("a reconstruction mesh is required")
        if isinstance(self.h0, RobinField):
            h0 = self.h0
        else:
            h0 = RobinField.constant(self.mesh, float(self.h0))
        coefficient, trace = reconstruct(
            self.mesh, data, h0, self._config(), h_true_fn=h_true_fn
        )
        self.coefficient_ = coefficient
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        self.lambda_ = trace.eigenvalues[-1] if trace.eigenvalues else None
        return self

    def predict(self, theta):
        """Reconstructed coefficient evaluated at boundary angles."""
        if not hasattr(self, "coefficient_"):
            raise ParameterError("call fit before predict")
        param = boundary_arc_parameterization(self.mesh, GAMMA)
        nodes = np.array([n for n, _ in param])
        angles = np.array([t for _, t in param])
        full = self.coefficient_.as_full_vector()
        return periodic_interp(angles, full[nodes], np.asarray(theta, dtype=float))

    def score(self, data):
        """Negated functional value at the fitted coefficient."""
        if not hasattr(self, "coefficient_"):
            raise ParameterError("call fit before score")
        return -evaluate_functional(self.mesh, self.coefficient_, data, eta=self.eta)
