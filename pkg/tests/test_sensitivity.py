import math

import numpy as np
import pytest

from robinrecover import (
    BoundaryField,
    RobinField,
    boundary_inner,
    domain_inner,
    eigenvalue_derivative,
    neumann_trace,
    principal_eigenpair,
    sensitivity_trace,
    solve_adjoint,
    solve_sensitivity,
    synthesize_data,
    transfer_to_mesh,
)
from robinrecover.fem import workspace
from robinrecover.mesh import GAMMA, GAMMA_D
from robinrecover.sensitivity import _BorderedSystem
from robinrecover.verify import fourier_direction


@pytest.fixture(scope="module")
def setup(mesh_64_16, eig_64_16):
    h = RobinField.constant(mesh_64_16, 1.0)
    xi = fourier_direction(mesh_64_16, seed=7)
    return mesh_64_16, h, eig_64_16, xi


def test_derivative_of_zero_direction(setup):
    mesh, h, eig, _ = setup
    xi0 = RobinField.constant(mesh, 0.0, admissible=False)
    assert eigenvalue_derivative(mesh, eig, xi0) == 0.0


def test_derivative_linear_in_direction(setup):
    mesh, h, eig, _ = setup
    c = 3.25
    xic = RobinField.constant(mesh, c, admissible=False)
    plain = boundary_inner(mesh, GAMMA, eig.u, eig.u)
    assert eigenvalue_derivative(mesh, eig, xic) == pytest.approx(c * plain, rel=1e-12)


def test_derivative_matches_finite_differences(setup):
    mesh, h, eig, xi = setup
    lp = eigenvalue_derivative(mesh, eig, xi)
    errors = []
    for eps in (1e-2, 1e-3, 1e-4):
        pert = principal_eigenpair(mesh, h.replace_values(h.values + eps * xi.values))
        errors.append(abs((pert.lam - eig.lam) / eps - lp) / abs(lp))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 0.02


def test_sensitivity_zero_direction(setup):
    mesh, h, eig, _ = setup
    xi0 = RobinField.constant(mesh, 0.0, admissible=False)
    sens = solve_sensitivity(mesh, h, eig, xi0)
    assert sens.lambda_prime == 0.0
    assert np.max(np.abs(sens.u_prime.values)) <= 1e-14


def test_sensitivity_constraints(setup):
    mesh, h, eig, xi = setup
    sens = solve_sensitivity(mesh, h, eig, xi)
    assert abs(domain_inner(mesh, eig.u, sens.u_prime)) <= 1e-10
    gamma_d = mesh.boundary_nodes(GAMMA_D)
    assert np.all(sens.u_prime.values[gamma_d] == 0.0)


def test_sensitivity_exact_scaling(setup):
    mesh, h, eig, xi = setup
    sens1 = solve_sensitivity(mesh, h, eig, xi)
    sens2 = solve_sensitivity(
        mesh, h, eig, xi.replace_values(2.0 * xi.values, admissible=False)
    )
    assert sens2.lambda_prime == pytest.approx(2.0 * sens1.lambda_prime, rel=1e-12)
    assert np.allclose(
        sens2.u_prime.values, 2.0 * sens1.u_prime.values, rtol=1e-12, atol=1e-15
    )


def test_taylor_remainder_first_order(setup):
    mesh, h, eig, xi = setup
    sens = solve_sensitivity(mesh, h, eig, xi)
    ws = workspace(mesh)
    K, Bh, M = ws.K, ws.robin_mass(h), ws.M

    def v_norm(v):
        return math.sqrt(float(v @ (K @ v) + v @ (Bh @ v)))

    ratios = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        pert = principal_eigenpair(mesh, h.replace_values(h.values + eps * xi.values))
        u_pert = pert.u.values.copy()
        if float(eig.u.values @ (M @ u_pert)) < 0.0:
            u_pert = -u_pert
        ratios.append(v_norm(u_pert - eig.u.values - eps * sens.u_prime.values) / eps)
    assert all(ratios[i + 1] < ratios[i] for i in range(3))
    assert ratios[0] / ratios[-1] >= 5.0


def test_eigenvalue_remainder_second_order(setup):
    mesh, h, eig, xi = setup
    lp = eigenvalue_derivative(mesh, eig, xi)
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        pert = principal_eigenpair(mesh, h.replace_values(h.values + eps * xi.values))
        ratios.append(abs(pert.lam - eig.lam - eps * lp) / eps)
    assert all(ratios[i + 1] < ratios[i] for i in range(3))


def test_bordered_matrix_symmetric(setup):
    mesh, h, eig, _ = setup
    system = _BorderedSystem(mesh, h, eig)
    assert abs(system.S - system.S.T).max() == 0.0


def test_adjoint_zero_misfit(setup):
    mesh, h, eig, _ = setup
    g_exact = neumann_trace(mesh, eig.u, eig.lam, h)
    adj = solve_adjoint(mesh, h, eig, g_exact)
    assert np.max(np.abs(adj.phi.values)) == 0.0
    assert adj.multiplier == 0.0


def test_adjoint_constraints(setup):
    mesh, h, eig, _ = setup
    trace = neumann_trace(mesh, eig.u, eig.lam, h)
    g_data = BoundaryField(mesh, GAMMA_D, trace.values * 1.1)
    adj = solve_adjoint(mesh, h, eig, g_data)
    assert abs(domain_inner(mesh, eig.u, adj.phi)) <= 1e-10
    d = trace.values - g_data.values
    assert np.array_equal(adj.phi.values[trace.node_ids], d)


def test_adjoint_linearity(setup):
    mesh, h, eig, _ = setup
    trace = neumann_trace(mesh, eig.u, eig.lam, h)
    shift = np.sin(np.linspace(0.0, 2.0, trace.values.size))
    g1 = BoundaryField(mesh, GAMMA_D, trace.values - shift)
    g2 = BoundaryField(mesh, GAMMA_D, trace.values - 2.0 * shift)
    adj1 = solve_adjoint(mesh, h, eig, g1)
    adj2 = solve_adjoint(mesh, h, eig, g2)
    assert np.allclose(adj2.phi.values, 2.0 * adj1.phi.values, rtol=1e-12, atol=1e-15)


def test_duality_identity(setup):
    """Boundary misfit paired with the sensitivity flux equals the
    GAMMA pairing of xi, u, and the adjoint state."""
    mesh, h, eig, xi = setup
    data = synthesize_data(mesh, h)
    g_obs = transfer_to_mesh(data, mesh)
    rng = np.random.default_rng(11)
    g_data = BoundaryField(
        mesh, GAMMA_D, g_obs.values * (1.0 + 0.1 * rng.uniform(-1, 1, g_obs.values.size))
    )
    sens = solve_sensitivity(mesh, h, eig, xi)
    adj = solve_adjoint(mesh, h, eig, g_data)
    flux = sensitivity_trace(mesh, h, eig, xi, sens)
    trace = neumann_trace(mesh, eig.u, eig.lam, h)
    misfit = BoundaryField(mesh, GAMMA_D, trace.values - g_data.values)
    lhs = boundary_inner(mesh, GAMMA_D, misfit, flux)
    rhs = boundary_inner(mesh, GAMMA, eig.u, adj.phi, xi)
    assert abs(lhs - rhs) <= 1e-6 * abs(rhs)
