"""Principal eigenpairs of the constrained Robin pencil.

The discrete problem is ``(K + B(h)) u = lam M u`` on the nodes not
constrained by the Dirichlet part.  For admissible (positive) h the
operator is symmetric positive definite, so plain inverse iteration with
shift zero converges to the smallest eigenvalue.  The operator is
factorized once per coefficient and reused across iterations.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import (
    AdmissibilityError,
    ConvergenceError,
    ParameterError,
    SolverError,
)
from .fields import RobinField, ScalarField
from .fem import workspace

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


@dataclass
class EigenPair:
    """Converged eigenpair of the constrained pencil.

    ``u`` is normalized to ``u' M u = 1`` and sign-fixed so that its
    M-weighted mean is positive; the principal eigenfunction then has no
    interior sign change.  ``residual_norm`` is relative to
    ``norm(lam * M u)`` on the constrained space.
    """

    lam: float
    u: ScalarField
    residual_norm: float
    iterations: int


def _check_inputs(h, tol, max_iter):
    if not isinstance(h, RobinField):
        raise ParameterError("h must be a RobinField")
    if not h.admissible or np.any(h.values <= 0.0):
        raise AdmissibilityError("eigensolve requires an admissible (positive) h")
    if not tol > 0.0:
        raise ParameterError("tol must be positive")
    if int(max_iter) < 1:
        raise ParameterError("max_iter must be at least 1")


def _factorize(A_ff):
    try:
        return spla.splu(A_ff.tocsc())
    except RuntimeError as exc:
        raise SolverError("factorization of the constrained operator failed: %s" % exc)


def _m_norm(M_ff, v):
    return float(np.sqrt(v @ (M_ff @ v)))


def _inverse_iteration(A_ff, M_ff, lu, v0, tol, max_iter, deflate=()):
    """Inverse power iteration in the M inner product.

    ``deflate`` holds previously found eigenvectors; the iterate is kept
    M-orthogonal to them so the iteration converges to the smallest
    remaining eigenvalue.
    """
    v = v0.copy()
    for w in deflate:
        v -= (w @ (M_ff @ v)) * w
    nv = _m_norm(M_ff, v)
    if not nv > 0.0:
        raise SolverError("initial vector is M-orthogonal to the search space")
    v /= nv
    lam = float(v @ (A_ff @ v))
    residual = np.inf
    for iteration in range(1, int(max_iter) + 1):
        v_new = lu.solve(M_ff @ v)
        for w in deflate:
            v_new -= (w @ (M_ff @ v_new)) * w
        nv = _m_norm(M_ff, v_new)
        if not np.isfinite(nv) or nv == 0.0:
            raise SolverError("inverse iteration produced a non-finite iterate")
        v_new /= nv
        lam_new = float(v_new @ (A_ff @ v_new))
        r = A_ff @ v_new - lam_new * (M_ff @ v_new)
        scale = float(np.linalg.norm(lam_new * (M_ff @ v_new)))
        residual = float(np.linalg.norm(r)) / scale if scale > 0.0 else np.inf
        converged = abs(lam_new - lam) <= tol * abs(lam_new) and residual <= tol
        v, lam = v_new, lam_new
        if converged:
            return lam, v, residual, iteration
    raise ConvergenceError(
        "inverse iteration did not reach tol=%g in %d iterations (residual %g)"
        % (tol, max_iter, residual),
        residual=residual,
    )


def principal_eigenpair(mesh, h, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, u0=None):
    """Smallest eigenpair of ``(K + B(h)) u = lam M u`` on the free nodes.

    Parameters
    ----------
    mesh : TriMesh
    h : RobinField
        Admissible Robin coefficient.
    tol : float
        Relative tolerance on the Rayleigh-quotient change and on the
        eigen-residual.
    max_iter : int
        Iteration budget; exceeding it raises ConvergenceError carrying
        the last residual.
    u0 : ScalarField, optional
        Warm-start vector.  The default is the constant 1 on the free
        nodes, which is deterministic and never M-orthogonal to the
        positive principal mode.
    """
    _check_inputs(h, tol, max_iter)
    ws = workspace(mesh)
    dmap = ws.dirichlet
    A_ff = (ws.operator(h))[dmap.free][:, dmap.free]
    M_ff = ws.M_ff
    lu = _factorize(A_ff)
    if u0 is None:
        v0 = np.ones(dmap.free.size)
    else:
        if not isinstance(u0, ScalarField) or u0.mesh is not mesh:
            raise ParameterError("u0 must be a ScalarField on the same mesh")
        v0 = dmap.restrict(u0.values)
    lam, v, residual, iterations = _inverse_iteration(A_ff, M_ff, lu, v0, tol, max_iter)
    # Exact M-normalization and positive-mean sign convention.
    v = v / _m_norm(M_ff, v)
    if float(np.sum(M_ff @ v)) < 0.0:
        v = -v
    return EigenPair(lam, ScalarField(mesh, dmap.expand(v)), residual, iterations)


def lowest_eigenvalues(mesh, h, k, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """The k smallest eigenpairs, ascending, via M-orthogonal deflation.

    Returns a list of EigenPair whose eigenvectors are pairwise
    M-orthogonal.  Intended for small k (spectral-gap checks); use the
    principal solver for k = 1.
    """
    if int(k) < 1:
        raise ParameterError("k must be at least 1")
    _check_inputs(h, tol, max_iter)
    ws = workspace(mesh)
    dmap = ws.dirichlet
    A_ff = (ws.operator(h))[dmap.free][:, dmap.free]
    M_ff = ws.M_ff
    lu = _factorize(A_ff)
    found = []
    pairs = []
    rng = np.random.default_rng(0)
    for index in range(int(k)):
        if index == 0:
            v0 = np.ones(dmap.free.size)
        else:
            # Deterministic seeded start with guaranteed overlap after deflation.
            v0 = rng.standard_normal(dmap.free.size)
        lam, v, residual, iterations = _inverse_iteration(
            A_ff, M_ff, lu, v0, tol, max_iter, deflate=found
        )
        v = v / _m_norm(M_ff, v)
        if float(np.sum(M_ff @ v)) < 0.0:
            v = -v
        found.append(v)
        pairs.append(EigenPair(lam, ScalarField(mesh, dmap.expand(v)), residual, iterations))
    pairs.sort(key=lambda p: p.lam)
    return pairs
