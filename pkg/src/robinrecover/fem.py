"""P1 finite-element assembly on tagged triangulations.

Domain matrices (stiffness, mass) use exact integration formulas for
linear elements.  Boundary matrices and boundary inner products use a
2-point Gauss rule per edge, which is exact for the cubic integrands
that arise from products of three P1 factors.

All assembled matrices are exactly symmetric: symmetric entry pairs are
inserted with identical floating-point values, and an off-diagonal entry
receives at most two element contributions, so the duplicate summation
commutes bitwise.
"""

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import AssemblyError, ParameterError, SolverError
from .fields import BoundaryField, RobinField, ScalarField
from .mesh import GAMMA, GAMMA_D

# 2-point Gauss-Legendre rule on [0, 1]: exact through cubics.
_GAUSS_S = (0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0)))
_GAUSS_W = (0.5, 0.5)

_DEGENERATE_AREA = 1e-14


def _triangle_geometry(mesh):
    tri = mesh.triangles
    x = mesh.vertices[:, 0][tri]
    y = mesh.vertices[:, 1][tri]
    # Gradient coefficients of the barycentric basis: grad phi_a = (b_a, c_a) / (2A).
    b = np.stack((y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]))
    c = np.stack((x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]))
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    if np.any(area < _DEGENERATE_AREA):
        bad = int(np.argmin(area))
        raise AssemblyError(
            "degenerate triangle %d with area %g" % (bad, float(area[bad]))
        )
    return b, c, area


def assemble_stiffness(mesh):
    """Stiffness matrix K with K[i, j] = integral of grad(phi_i) . grad(phi_j)."""
    b, c, area = _triangle_geometry(mesh)
    tri = mesh.triangles
    rows, cols, data = [], [], []
    for a in range(3):
        for d in range(3):
            rows.append(tri[:, a])
            cols.append(tri[:, d])
            data.append((b[a] * b[d] + c[a] * c[d]) / (4.0 * area))
    K = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    return K.tocsr()


def assemble_mass(mesh):
    """Mass matrix M with M[i, j] = integral of phi_i * phi_j (exact P1 formula)."""
    _, _, area = _triangle_geometry(mesh)
    tri = mesh.triangles
    rows, cols, data = [], [], []
    for a in range(3):
        for d in range(3):
            rows.append(tri[:, a])
            cols.append(tri[:, d])
            data.append(area / 12.0 * (2.0 if a == d else 1.0))
    M = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    return M.tocsr()


def _edge_endpoint_values(mesh, tag, arg, edges):
    """Per-edge endpoint values of a quadrature factor.

    Accepts None (constant 1), a number, a ScalarField, a BoundaryField
    on the same tag, or a full-length nodal vector.
    """
    if arg is None:
        ones = np.ones(edges.shape[0])
        return ones, ones
    if isinstance(arg, (int, float)):
        vals = np.full(edges.shape[0], float(arg))
        return vals, vals.copy()
    if isinstance(arg, ScalarField):
        if arg.mesh is not mesh:
            raise ParameterError("field lives on a different mesh")
        full = arg.values
    elif isinstance(arg, BoundaryField):
        if arg.mesh is not mesh:
            raise ParameterError("boundary field lives on a different mesh")
        if arg.tag != tag:
            raise ParameterError(
                "boundary field is on part %s, expected %s" % (arg.tag, tag)
            )
        full = arg.as_full_vector()
    else:
        full = np.asarray(arg, dtype=float)
        if full.shape != (mesh.n_vertices,):
            raise ParameterError("expected a nodal vector of length %d" % mesh.n_vertices)
    return full[edges[:, 0]], full[edges[:, 1]]


def assemble_boundary_mass(mesh, tag, weight=None):
    """Boundary mass matrix on a tagged part, optionally weighted.

    Entry (i, j) is the integral over the tagged polyline of
    ``weight * phi_i * phi_j`` with the weight interpolated linearly
    along each edge.  Supported only on the tagged nodes.
    """
    rows_idx = mesh.edges_with_tag(tag)
    edges = mesh.boundary_edges[rows_idx]
    lengths = mesh.edge_lengths(rows_idx)
    w0, w1 = _edge_endpoint_values(mesh, tag, weight, edges)

    b00 = np.zeros(edges.shape[0])
    b11 = np.zeros(edges.shape[0])
    b01 = np.zeros(edges.shape[0])
    for s, w in zip(_GAUSS_S, _GAUSS_W):
        wq = w * (w0 * (1.0 - s) + w1 * s)
        b00 += wq * (1.0 - s) * (1.0 - s)
        b11 += wq * s * s
        b01 += wq * s * (1.0 - s)
    b00 *= lengths
    b11 *= lengths
    b01 *= lengths

    i, j = edges[:, 0], edges[:, 1]
    B = sp.coo_matrix(
        (
            np.concatenate((b00, b11, b01, b01)),
            (np.concatenate((i, j, i, j)), np.concatenate((i, j, j, i))),
        ),
        shape=(mesh.n_vertices, mesh.n_vertices),
    )
    return B.tocsr()


def assemble_robin_boundary_mass(mesh, weight):
    """Robin boundary matrix: GAMMA boundary mass weighted by the coefficient."""
    if not isinstance(weight, BoundaryField):
        raise ParameterError("weight must be a boundary field on GAMMA")
    return assemble_boundary_mass(mesh, GAMMA, weight)


@dataclass(frozen=True)
class DirichletSystem:
    """Reduction of a nodal system by eliminating tagged Dirichlet nodes.

    ``matrix`` is the free-free block, ``coupling`` the free-constrained
    block used to lift nonhomogeneous Dirichlet data.
    """

    matrix: sp.csr_matrix
    coupling: sp.csr_matrix
    free: np.ndarray
    constrained: np.ndarray
    n_full: int

    def restrict(self, full):
        full = np.asarray(full, dtype=float)
        return full[self.free]

    def expand(self, reduced, boundary_values=None):
        """Scatter a reduced vector to full indexing.

        Constrained entries are zero unless ``boundary_values`` (one per
        constrained node, in ``self.constrained`` order) is given.
        """
        full = np.zeros(self.n_full)
        full[self.free] = reduced
        if boundary_values is not None:
            full[self.constrained] = boundary_values
        return full


def apply_dirichlet(matrix, mesh, tag=GAMMA_D):
    """Eliminate the rows/columns of the tagged nodes from a nodal system."""
    n = mesh.n_vertices
    if matrix.shape != (n, n):
        raise ParameterError(
            "system is %s, expected (%d, %d)" % (matrix.shape, n, n)
        )
    constrained = mesh.boundary_nodes(tag)
    mask = np.ones(n, dtype=bool)
    mask[constrained] = False
    free = np.flatnonzero(mask)
    matrix = matrix.tocsr()
    reduced = matrix[free][:, free]
    coupling = matrix[free][:, constrained]
    return DirichletSystem(reduced, coupling, free, constrained, n)


def domain_inner(mesh, u, v):
    """L2(Omega) inner product of two P1 fields via the mass matrix."""
    u = _as_scalar_values(mesh, u)
    v = _as_scalar_values(mesh, v)
    return float(u @ (workspace(mesh).M @ v))


def _as_scalar_values(mesh, arg):
    if isinstance(arg, ScalarField):
        if arg.mesh is not mesh:
            raise ParameterError("field lives on a different mesh")
        return arg.values
    if isinstance(arg, (int, float)):
        return np.full(mesh.n_vertices, float(arg))
    vals = np.asarray(arg, dtype=float)
    if vals.shape != (mesh.n_vertices,):
        raise ParameterError("expected a nodal vector of length %d" % mesh.n_vertices)
    return vals


def boundary_inner(mesh, tag, a, b, weight=None):
    """Integral of ``a * b * weight`` over a tagged boundary polyline.

    All factors are interpolated linearly along each edge; the 2-point
    Gauss rule integrates the resulting cubic exactly.
    """
    rows_idx = mesh.edges_with_tag(tag)
    edges = mesh.boundary_edges[rows_idx]
    lengths = mesh.edge_lengths(rows_idx)
    a0, a1 = _edge_endpoint_values(mesh, tag, a, edges)
    b0, b1 = _edge_endpoint_values(mesh, tag, b, edges)
    w0, w1 = _edge_endpoint_values(mesh, tag, weight, edges)
    total = np.zeros(edges.shape[0])
    for s, w in zip(_GAUSS_S, _GAUSS_W):
        aq = a0 * (1.0 - s) + a1 * s
        bq = b0 * (1.0 - s) + b1 * s
        wq = w0 * (1.0 - s) + w1 * s
        total += w * aq * bq * wq
    return float(np.sum(total * lengths))


def boundary_l2_norm(mesh, tag, a):
    return float(np.sqrt(max(boundary_inner(mesh, tag, a, a), 0.0)))


class FemWorkspace:
    """Cached per-mesh assembly shared by the solvers.

    Holds the stiffness and mass matrices, the Dirichlet reduction for
    the GAMMA_D part, and the factorized GAMMA_D boundary mass used for
    variational flux recovery.  Matrices are read-only once built.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.K = assemble_stiffness(mesh)
        self.M = assemble_mass(mesh)
        self.gamma_nodes = mesh.boundary_nodes(GAMMA)
        self.gamma_d_nodes = mesh.boundary_nodes(GAMMA_D)
        self.dirichlet = apply_dirichlet(self.K, mesh, GAMMA_D)
        self.M_ff = self.M[self.dirichlet.free][:, self.dirichlet.free]
        B_D = assemble_boundary_mass(mesh, GAMMA_D)
        self._B_D_sub = B_D[self.gamma_d_nodes][:, self.gamma_d_nodes].tocsc()
        if self._B_D_sub.shape[0] == 0:
            raise SolverError("GAMMA_D part is empty; boundary mass is singular")
        self._B_D_lu = spla.splu(self._B_D_sub)

    def robin_mass(self, weight):
        return assemble_boundary_mass(self.mesh, GAMMA, weight)

    def operator(self, h):
        """System matrix K + B(h) of the Robin eigenproblem."""
        return self.K + self.robin_mass(h)

    def flux_from_residual(self, residual):
        """Variational Neumann trace on GAMMA_D from a weak-form residual.

        Solves ``B_D g = r`` where r collects the residual entries at
        the GAMMA_D nodes.
        """
        residual = np.asarray(residual, dtype=float)
        g = self._B_D_lu.solve(residual[self.gamma_d_nodes])
        return BoundaryField(self.mesh, GAMMA_D, g)


_workspaces = weakref.WeakKeyDictionary()


def workspace(mesh):
    ws = _workspaces.get(mesh)
    if ws is None:
        ws = FemWorkspace(mesh)
        _workspaces[mesh] = ws
    return ws


def neumann_trace(mesh, u, lam, h):
    """Consistent-flux normal derivative of an eigenfunction on GAMMA_D.

    The flux is recovered variationally from the weak-form residual
    ``K u + B(h) u - lam M u`` tested with the GAMMA_D nodal bases, so
    it is the L2(GAMMA_D) representation consumed by the misfit
    functional.
    """
    if not isinstance(u, ScalarField) or u.mesh is not mesh:
        raise ParameterError("u must be a ScalarField on the given mesh")
    if not isinstance(h, RobinField) or h.mesh is not mesh:
        raise ParameterError("h must be a RobinField on the given mesh")
    ws = workspace(mesh)
    residual = ws.K @ u.values + ws.robin_mass(h) @ u.values - lam * (ws.M @ u.values)
    return ws.flux_from_residual(residual)
