"""Self-contained verification suites for the solver stack.

Each suite returns a list of CheckResult rows.  The suites are the
machine-checkable core of the solver guarantees: agreement of the 2D
eigensolver with the independent radial oracle, agreement of the
adjoint gradient with finite differences of the functional, the duality
identity linking the boundary misfit pairing to the interior adjoint
pairing, and the first-order Taylor behavior of the eigenpair under
coefficient perturbations.
"""

import math
from dataclasses import dataclass

import numpy as np

from .eigen import principal_eigenpair
from .fields import BoundaryField, RobinField
from .fem import boundary_inner, neumann_trace, workspace
from .inverse import evaluate_functional, functional_gradient
from .mesh import GAMMA, GAMMA_D, build_annulus_mesh
from .radial import radial_principal
from .sensitivity import (
    eigenvalue_derivative,
    sensitivity_trace,
    solve_adjoint,
    solve_sensitivity,
)
from .spectral import synthesize_data, transfer_to_mesh


@dataclass
class CheckResult:
    suite: str
    name: str
    value: float
    bound: float
    passed: bool

    def row(self):
        return "%s,%s,%s,%s,%s" % (
            self.suite,
            self.name,
            repr(float(self.value)),
            repr(float(self.bound)),
            "pass" if self.passed else "fail",
        )


def fourier_direction(mesh, seed, amplitude=1.0):
    """Smooth random boundary direction: random Fourier modes 0 to 3."""
    rng = np.random.default_rng(seed)
    nodes = mesh.boundary_nodes(GAMMA)
    th = np.arctan2(mesh.vertices[nodes, 1], mesh.vertices[nodes, 0])
    values = rng.uniform(-1.0, 1.0) * np.ones_like(th)
    for k in range(1, 4):
        values += rng.uniform(-1.0, 1.0) * np.cos(k * th)
        values += rng.uniform(-1.0, 1.0) * np.sin(k * th)
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        values[:] = 1.0
        scale = 1.0
    return RobinField(mesh, amplitude * values / scale, admissible=False)


def oracle_suite(meshes=((64, 16), (96, 24), (128, 32)), bound=5e-3):
    """FEM principal eigenvalue vs the radial oracle for constant h."""
    results = []
    exact = radial_principal(1.0).lam
    for n_circum, n_radial in meshes:
        mesh = build_annulus_mesh(1.0, 2.0, n_circum, n_radial)
        eig = principal_eigenpair(mesh, RobinField.constant(mesh, 1.0))
        rel = abs(eig.lam - exact) / exact
        results.append(
            CheckResult(
                "oracle",
                "lambda_fem_%dx%d_vs_radial" % (n_circum, n_radial),
                rel,
                bound,
                rel < bound,
            )
        )
    return results


def gradient_suite(seed=3, n_directions=5, eps=1e-4, bound=1e-2, eta=1e-4):
    """Adjoint gradient vs central finite differences of the functional."""
    gen = build_annulus_mesh(1.0, 2.0, 80, 20)
    mesh = build_annulus_mesh(1.0, 2.0, 96, 24)
    h_true = RobinField.from_function(gen, lambda x, y: 1.0 + 0.3 * np.sin(np.arctan2(y, x)))
    data = synthesize_data(gen, h_true)
    h = RobinField.constant(mesh, 1.0)
    results = []
    for rule, rule_eta in (("plain", 0.0), ("regularized", eta)):
        grad = functional_gradient(mesh, h, data, eta=rule_eta)
        for i in range(n_directions):
            xi = fourier_direction(mesh, seed + i)
            pairing = boundary_inner(mesh, GAMMA, grad, xi)
            f_plus = evaluate_functional(
                mesh, h.replace_values(h.values + eps * xi.values), data, eta=rule_eta
            )
            f_minus = evaluate_functional(
                mesh, h.replace_values(h.values - eps * xi.values), data, eta=rule_eta
            )
            fd = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(pairing - fd) / max(abs(fd), 1e-30)
            results.append(
                CheckResult(
                    "gradient",
                    "fd_vs_adjoint_%s_dir%d" % (rule, i),
                    rel,
                    bound,
                    rel < bound,
                )
            )
    return results


def adjoint_suite(seed=11, bound=1e-6):
    """Duality identity: boundary misfit pairing equals the GAMMA pairing."""
    mesh = build_annulus_mesh(1.0, 2.0, 64, 16)
    h = RobinField.from_function(mesh, lambda x, y: 1.2 + 0.2 * x * y)
    eig = principal_eigenpair(mesh, h)
    data = synthesize_data(mesh, h)
    rng = np.random.default_rng(seed)
    g_obs = transfer_to_mesh(data, mesh)
    results = []
    for i in range(3):
        perturbed = g_obs.values * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, g_obs.values.size))
        g_data = BoundaryField(mesh, GAMMA_D, perturbed)
        xi = fourier_direction(mesh, seed + 17 * i)
        sens = solve_sensitivity(mesh, h, eig, xi)
        adj = solve_adjoint(mesh, h, eig, g_data)
        flux = sensitivity_trace(mesh, h, eig, xi, sens)
        trace = neumann_trace(mesh, eig.u, eig.lam, h)
        misfit = type(g_obs)(mesh, GAMMA_D, trace.values - g_data.values)
        lhs = boundary_inner(mesh, GAMMA_D, misfit, flux)
        rhs = boundary_inner(mesh, GAMMA, eig.u, adj.phi, xi)
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-30)
        results.append(
            CheckResult("adjoint", "duality_identity_%d" % i, rel, bound, rel < bound)
        )
    return results


def taylor_suite(seed=5, eps_sweep=(1e-1, 1e-2, 1e-3, 1e-4), drop=5.0):
    """First-order expansions of the eigenpair: remainders shrink with eps.

    Checks that the V-norm eigenfunction remainder ratio and the
    eigenvalue remainder ratio decrease monotonically over the sweep and
    that the eigenfunction ratio drops by at least ``drop`` end to end.
    """
    mesh = build_annulus_mesh(1.0, 2.0, 64, 16)
    h = RobinField.constant(mesh, 1.0)
    eig = principal_eigenpair(mesh, h)
    xi = fourier_direction(mesh, seed)
    sens = solve_sensitivity(mesh, h, eig, xi)
    lam_prime = eigenvalue_derivative(mesh, eig, xi)
    ws = workspace(mesh)
    K, Bh, M = ws.K, ws.robin_mass(h), ws.M

    def v_norm(vec):
        return math.sqrt(float(vec @ (K @ vec) + vec @ (Bh @ vec)))

    u_ratios = []
    lam_ratios = []
    for eps in eps_sweep:
        hp = h.replace_values(h.values + eps * xi.values)
        pert = principal_eigenpair(mesh, hp)
        u_pert = pert.u.values.copy()
        if float(eig.u.values @ (M @ u_pert)) < 0.0:
            u_pert = -u_pert
        remainder = u_pert - eig.u.values - eps * sens.u_prime.values
        u_ratios.append(v_norm(remainder) / eps)
        lam_ratios.append(abs(pert.lam - eig.lam - eps * lam_prime) / eps)

    results = []
    u_mono = all(u_ratios[i + 1] < u_ratios[i] for i in range(len(u_ratios) - 1))
    lam_mono = all(lam_ratios[i + 1] < lam_ratios[i] for i in range(len(lam_ratios) - 1))
    u_drop = u_ratios[0] / u_ratios[-1]
    results.append(
        CheckResult("taylor", "u_remainder_monotone", float(u_mono), 1.0, u_mono)
    )
    results.append(
        CheckResult("taylor", "u_remainder_drop", u_drop, drop, u_drop >= drop)
    )
    results.append(
        CheckResult("taylor", "lambda_remainder_monotone", float(lam_mono), 1.0, lam_mono)
    )
    return results


SUITES = {
    "oracle": oracle_suite,
    "gradient": gradient_suite,
    "adjoint": adjoint_suite,
    "taylor": taylor_suite,
}


def run_suites(names, seed=None):
    results = []
    for name in names:
        suite = SUITES[name]
        if seed is not None and name in ("gradient", "adjoint", "taylor"):
            results.extend(suite(seed=seed))
        else:
            results.extend(suite())
    return results
