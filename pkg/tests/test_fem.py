import math

import numpy as np
import pytest
import scipy.sparse as sp

from robinrecover import (
    AssemblyError,
    ParameterError,
    RobinField,
    ScalarField,
    apply_dirichlet,
    assemble_boundary_mass,
    assemble_mass,
    assemble_robin_boundary_mass,
    assemble_stiffness,
    boundary_inner,
    domain_inner,
    neumann_trace,
    radial_principal,
)
from robinrecover.fem import workspace
from robinrecover.fields import BoundaryField
from robinrecover.mesh import GAMMA, GAMMA_D, make_mesh


def right_triangle_mesh():
    vertices = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    triangles = [(0, 1, 2)]
    edges = [(0, 1), (1, 2), (2, 0)]
    tags = [GAMMA, GAMMA_D, GAMMA_D]
    return make_mesh(vertices, triangles, edges, tags)


def test_stiffness_annihilates_constants(mesh_64_16):
    K = assemble_stiffness(mesh_64_16)
    residual = K @ np.ones(mesh_64_16.n_vertices)
    assert np.max(np.abs(residual)) <= 1e-12


def test_stiffness_hand_value_right_triangle():
    mesh = right_triangle_mesh()
    K = assemble_stiffness(mesh)
    # Hat of the right-angle vertex has |grad|^2 = 2 over area 1/2.
    assert K[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_stiffness_energy_of_linear_field(mesh_64_16):
    # The gradient of u(x, y) = x is a unit vector, so u'Ku is the mesh area,
    # which approaches 3*pi under refinement.
    K = assemble_stiffness(mesh_64_16)
    u = mesh_64_16.vertices[:, 0]
    energy = float(u @ (K @ u))
    assert energy == pytest.approx(mesh_64_16.area(), rel=1e-12)
    assert abs(energy - 3.0 * math.pi) < 0.05


def test_mass_partition_of_unity(mesh_64_16):
    M = assemble_mass(mesh_64_16)
    ones = np.ones(mesh_64_16.n_vertices)
    assert float(ones @ (M @ ones)) == pytest.approx(mesh_64_16.area(), abs=1e-12)


def test_mass_element_matrix():
    mesh = right_triangle_mesh()
    M = assemble_mass(mesh).toarray()
    area = 0.5
    expected = area / 12.0 * np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]])
    assert np.allclose(M, expected, rtol=0, atol=1e-16)


def test_mass_positive_definite(mesh_8_2):
    M = assemble_mass(mesh_8_2).toarray()
    smallest = np.linalg.eigvalsh(M)[0]
    assert smallest > 0.0


def test_assembled_matrices_bitwise_symmetric(mesh_64_16):
    h = RobinField.from_function(mesh_64_16, lambda x, y: 1.0 + 0.5 * x * y)
    for A in (
        assemble_stiffness(mesh_64_16),
        assemble_mass(mesh_64_16),
        assemble_robin_boundary_mass(mesh_64_16, h),
    ):
        assert abs(A - A.T).max() == 0.0


def test_assembly_matches_reference_loop(mesh_8_2):
    """Vectorized assembly agrees with a naive per-element reference."""
    K = assemble_stiffness(mesh_8_2).toarray()
    M = assemble_mass(mesh_8_2).toarray()
    n = mesh_8_2.n_vertices
    K_ref = np.zeros((n, n))
    M_ref = np.zeros((n, n))
    for tri in mesh_8_2.triangles:
        p = mesh_8_2.vertices[tri]
        b = np.array([p[1, 1] - p[2, 1], p[2, 1] - p[0, 1], p[0, 1] - p[1, 1]])
        c = np.array([p[2, 0] - p[1, 0], p[0, 0] - p[2, 0], p[1, 0] - p[0, 0]])
        area = 0.5 * (b[0] * c[1] - b[1] * c[0])
        for a in range(3):
            for d in range(3):
                K_ref[tri[a], tri[d]] += (b[a] * b[d] + c[a] * c[d]) / (4 * area)
                M_ref[tri[a], tri[d]] += area / 12.0 * (2.0 if a == d else 1.0)
    assert np.allclose(K, K_ref, rtol=1e-14, atol=1e-16)
    assert np.allclose(M, M_ref, rtol=1e-14, atol=1e-18)


def test_degenerate_triangle_rejected():
    vertices = [(0.0, 0.0), (1.0, 0.0), (0.5, 1e-16), (0.5, -1.0)]
    triangles = [(0, 1, 2), (1, 0, 3)]
    edges = [(0, 2), (2, 1), (1, 3), (3, 0)]
    tags = [GAMMA, GAMMA, GAMMA_D, GAMMA_D]
    mesh = make_mesh(vertices, triangles, edges, tags)
    with pytest.raises(AssemblyError):
        assemble_stiffness(mesh)


def test_robin_boundary_mass_zero_weight(mesh_8_2):
    B = assemble_robin_boundary_mass(
        mesh_8_2, RobinField.constant(mesh_8_2, 0.0, admissible=False)
    )
    assert B.nnz == 0 or abs(B).max() == 0.0


def test_robin_boundary_mass_partition_of_unity(mesh_64_16):
    B = assemble_robin_boundary_mass(mesh_64_16, RobinField.constant(mesh_64_16, 1.0))
    ones = np.ones(mesh_64_16.n_vertices)
    length = boundary_inner(mesh_64_16, GAMMA, 1.0, 1.0)
    assert float(ones @ (B @ ones)) == pytest.approx(length, abs=1e-12)


def test_boundary_mass_single_edge_element():
    mesh = right_triangle_mesh()
    B = assemble_boundary_mass(mesh, GAMMA).toarray()
    # Single GAMMA edge (0, 1) of length 1.
    expected = np.zeros((3, 3))
    expected[np.ix_([0, 1], [0, 1])] = 1.0 / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(B, expected, rtol=0, atol=1e-15)


def test_boundary_mass_supported_on_tagged_nodes(mesh_8_2):
    B = assemble_robin_boundary_mass(mesh_8_2, RobinField.constant(mesh_8_2, 2.0))
    gamma = set(mesh_8_2.boundary_nodes(GAMMA))
    rows, cols = B.nonzero()
    assert set(rows).issubset(gamma) and set(cols).issubset(gamma)


def test_incomplete_weight_rejected(mesh_8_2):
    nodes = mesh_8_2.boundary_nodes(GAMMA)
    mapping = {int(n): 1.0 for n in nodes[:-1]}
    with pytest.raises(ParameterError):
        BoundaryField.from_node_values(mesh_8_2, GAMMA, mapping)


def test_apply_dirichlet_reduction(mesh_8_2):
    K = assemble_stiffness(mesh_8_2)
    system = apply_dirichlet(K, mesh_8_2)
    assert system.matrix.shape == (16, 16)
    expanded = system.expand(np.arange(16, dtype=float))
    assert np.all(expanded[system.constrained] == 0.0)
    assert np.array_equal(expanded[system.free], np.arange(16, dtype=float))


def test_apply_dirichlet_lifting_identity(mesh_8_2):
    K = assemble_stiffness(mesh_8_2)
    system = apply_dirichlet(K, mesh_8_2)
    data = np.linspace(1.0, 2.0, system.constrained.size)
    lifted = system.expand(np.zeros(system.free.size), boundary_values=data)
    assert np.array_equal(lifted[system.constrained], data)


def test_apply_dirichlet_rejects_wrong_shape(mesh_8_2):
    with pytest.raises(ParameterError):
        apply_dirichlet(sp.eye(5).tocsr(), mesh_8_2)


def test_domain_inner_area(mesh_64_16):
    assert domain_inner(mesh_64_16, 1.0, 1.0) == pytest.approx(
        mesh_64_16.area(), rel=1e-13
    )


def test_boundary_inner_lengths(mesh_64_16):
    gamma_len = boundary_inner(mesh_64_16, GAMMA, 1.0, 1.0)
    n = 64
    assert gamma_len == pytest.approx(2 * n * math.sin(math.pi / n), rel=1e-13)


def test_boundary_inner_weight_bilinearity(mesh_64_16, eig_64_16):
    u = eig_64_16.u
    c = 2.75
    weighted = boundary_inner(
        mesh_64_16, GAMMA, u, u, RobinField.constant(mesh_64_16, c)
    )
    plain = boundary_inner(mesh_64_16, GAMMA, u, u)
    assert weighted == pytest.approx(c * plain, rel=1e-12)


def test_inner_products_reject_foreign_mesh(mesh_8_2, mesh_32_8):
    field = ScalarField.ones(mesh_32_8)
    with pytest.raises(ParameterError):
        domain_inner(mesh_8_2, field, field)
    with pytest.raises(ParameterError):
        boundary_inner(mesh_8_2, GAMMA, field, 1.0)


def test_neumann_trace_zero_field(mesh_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    g = neumann_trace(mesh_64_16, ScalarField.zeros(mesh_64_16), 4.0, h)
    assert np.max(np.abs(g.values)) == 0.0


def test_eigen_residual_vanishes_off_gamma_d(mesh_64_16, eig_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    ws = workspace(mesh_64_16)
    u = eig_64_16.u.values
    residual = ws.K @ u + ws.robin_mass(h) @ u - eig_64_16.lam * (ws.M @ u)
    free = ws.dirichlet.free
    scale = float(np.linalg.norm(eig_64_16.lam * (ws.M @ u)))
    assert np.max(np.abs(residual[free])) <= 1e-9 * scale
    assert np.max(np.abs(residual[ws.gamma_d_nodes])) > 1e-3


def test_neumann_trace_constant_coefficient(mesh_64_16, eig_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    g = neumann_trace(mesh_64_16, eig_64_16.u, eig_64_16.lam, h)
    mean = float(np.mean(g.values))
    spread = float(np.max(g.values) - np.min(g.values))
    assert spread <= 0.01 * abs(mean)
    oracle = radial_principal(1.0)
    assert abs(mean - oracle.du_at_outer) <= 0.02 * abs(oracle.du_at_outer)


def test_discrete_green_identity(mesh_64_16, eig_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    ws = workspace(mesh_64_16)
    rng = np.random.default_rng(1)
    v = rng.uniform(-1.0, 1.0, mesh_64_16.n_vertices)
    v[ws.gamma_d_nodes] = 0.0
    u = eig_64_16.u.values
    lhs = (
        float(v @ (ws.K @ u))
        + boundary_inner(mesh_64_16, GAMMA, eig_64_16.u, ScalarField(mesh_64_16, v), h)
        - eig_64_16.lam * float(v @ (ws.M @ u))
    )
    assert abs(lhs) <= 1e-10


def test_rayleigh_quotient_matches_eigenvalue(mesh_64_16, eig_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    ws = workspace(mesh_64_16)
    u = eig_64_16.u.values
    rq = (float(u @ (ws.K @ u)) + float(u @ (ws.robin_mass(h) @ u))) / float(
        u @ (ws.M @ u)
    )
    assert rq == pytest.approx(eig_64_16.lam, rel=1e-10)
