"""Independent 1D validator for constant coefficients on the annulus.

For a radially symmetric configuration (constant Robin coefficient on
the inner circle, Dirichlet on the outer circle) the principal
eigenpair reduces to a 1D problem in the radius:

    -(1/r) (r u')' = lam u   on (r_inner, r_outer),
    h u - u' = 0             at r_inner  (outward normal is -e_r),
    u = 0                    at r_outer.

This module solves that reduction with second-order finite differences
(ghost point at the Robin end) plus Richardson extrapolation, entirely
independent of the 2D finite-element code, so it can serve as a
brute-force oracle.  A Bessel cross-product bisection, evaluated by
power series, cross-checks the Dirichlet limit (h -> infinity).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, ParameterError

_EULER_GAMMA = 0.5772156649015328606


@dataclass
class RadialSolution:
    """Radial principal eigenpair.

    ``u`` is normalized so that ``2*pi * integral(r * u^2 dr) = 1``,
    matching the 2D normalization for radially symmetric functions.
    ``du_at_outer`` is the radial derivative at the outer circle, which
    equals the outward normal derivative there.
    """

    lam: float
    r: np.ndarray
    u: np.ndarray
    du_at_outer: float


def _solve_grid(h_const, r_inner, r_outer, n, tol=1e-13, max_iter=200):
    """Principal eigenpair of the FD discretization on n intervals."""
    delta = (r_outer - r_inner) / n
    r = r_inner + delta * np.arange(n + 1)
    r_minus = r[:n] - 0.5 * delta
    r_plus = r[:n] + 0.5 * delta

    diag = (r_minus + r_plus) / (r[:n] * delta**2)
    lower = -r_minus[1:] / (r[1:n] * delta**2)
    upper = -r_plus[:-1] / (r[: n - 1] * delta**2)
    # Robin row via the ghost point u(-1) = u(1) - 2*delta*h*u(0).
    diag = diag.copy()
    diag[0] += 2.0 * h_const * r_minus[0] / (r[0] * delta)
    upper = upper.copy()
    upper[0] = -(r_minus[0] + r_plus[0]) / (r[0] * delta**2)

    A = sp.diags((lower, diag, upper), (-1, 0, 1), format="csc")
    lu = spla.splu(A)

    weights = np.full(n, delta)
    weights[0] = 0.5 * delta  # trapezoid; the Dirichlet end contributes nothing

    def wip(u, v):
        return float(np.sum(weights * r[:n] * u * v))

    def wnorm(v):
        # 2D normalization restricted to radial functions: 2*pi*int(r u^2) = 1.
        return math.sqrt(2.0 * math.pi * wip(v, v))

    def rayleigh(v):
        return wip(v, A @ v) / wip(v, v)

    v = np.ones(n)
    v /= wnorm(v)
    lam = rayleigh(v)
    hits = 0
    for _ in range(max_iter):
        w = lu.solve(v)
        w /= wnorm(w)
        lam_new = rayleigh(w)
        # The operator scales like 1/delta^2, so an eigen-residual floor sits
        # far above machine precision; the Rayleigh-quotient change is the
        # meaningful stopping test.  Require it twice in a row.
        hits = hits + 1 if abs(lam_new - lam) <= tol * abs(lam_new) else 0
        v, lam = w, lam_new
        if hits >= 2:
            break
    else:
        raise ConvergenceError("radial oracle inverse iteration did not converge")
    if v[n // 2] < 0.0:
        v = -v
    u = np.append(v, 0.0)
    du_outer = (-4.0 * u[n - 1] + u[n - 2]) / (2.0 * delta)
    return lam, r, u, du_outer


@lru_cache(maxsize=64)
def radial_principal(h_const, r_inner=1.0, r_outer=2.0, n_grid=2000):
    """Radial principal eigenpair with Richardson-extrapolated eigenvalue.

    Solves on ``n_grid`` and ``2 * n_grid`` intervals and removes the
    leading second-order error from both the eigenvalue and the outer
    normal derivative.  The returned profile is the fine-grid one.
    """
    if not h_const > 0.0:
        raise ParameterError("h_const must be positive")
    if not (0.0 < r_inner < r_outer):
        raise ParameterError("require 0 < r_inner < r_outer")
    n_grid = int(n_grid)
    if n_grid < 1000:
        raise ParameterError("n_grid must be at least 1000")

    lam_c, _, _, du_c = _solve_grid(h_const, r_inner, r_outer, n_grid)
    lam_f, r, u, du_f = _solve_grid(h_const, r_inner, r_outer, 2 * n_grid)
    lam = (4.0 * lam_f - lam_c) / 3.0
    du = (4.0 * du_f - du_c) / 3.0

    if np.any(u[:-1] <= 0.0):
        raise ConvergenceError("radial oracle profile is not positive")
    return RadialSolution(lam, r, u, du)


def robin_residual(sol, h_const):
    """Defect of the Robin condition h*u - u' at the inner radius."""
    delta = sol.r[1] - sol.r[0]
    du_inner = (-3.0 * sol.u[0] + 4.0 * sol.u[1] - sol.u[2]) / (2.0 * delta)
    return float(h_const * sol.u[0] - du_inner)


def bessel_j0(x):
    """J0 by power series; accurate in double precision for |x| <= 12."""
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    for m in range(1, 80):
        term *= -q / (m * m)
        total += term
        if abs(term) <= 1e-18 * max(abs(total), 1e-30):
            break
    return total


def bessel_y0(x):
    """Y0 by power series; accurate in double precision for 0 < x <= 12."""
    if not x > 0.0:
        raise ParameterError("Y0 series requires x > 0")
    q = 0.25 * x * x
    term = 1.0
    harmonic = 0.0
    total = 0.0
    for m in range(1, 80):
        term *= -q / (m * m)
        harmonic += 1.0 / m
        total -= term * harmonic
        if abs(term) <= 1e-18:
            break
    return (2.0 / math.pi) * ((math.log(0.5 * x) + _EULER_GAMMA) * bessel_j0(x) + total)


def dirichlet_annulus_eigenvalue(r_inner=1.0, r_outer=2.0):
    """Principal Dirichlet-Dirichlet annulus eigenvalue via Bessel roots.

    Returns ``k**2`` for the first root k of the cross product
    ``J0(k a) Y0(k b) - J0(k b) Y0(k a)``, located by bisection on the
    series-evaluated functions.  Used only as a cross-check of the
    finite-difference oracle in the stiff-coefficient limit.
    """
    if not (0.0 < r_inner < r_outer):
        raise ParameterError("require 0 < r_inner < r_outer")

    def cross(k):
        return bessel_j0(k * r_inner) * bessel_y0(k * r_outer) - bessel_j0(
            k * r_outer
        ) * bessel_y0(k * r_inner)

    step = 0.01
    k_lo = step
    f_lo = cross(k_lo)
    k_hi = None
    k = k_lo
    for _ in range(5000):
        k += step
        f = cross(k)
        if f_lo * f <= 0.0:
            k_hi = k
            break
        k_lo, f_lo = k, f
    if k_hi is None:
        raise ConvergenceError("no sign change found for the Bessel cross product")
    for _ in range(200):
        mid = 0.5 * (k_lo + k_hi)
        fm = cross(mid)
        if f_lo * fm <= 0.0:
            k_hi = mid
        else:
            k_lo, f_lo = mid, fm
        if k_hi - k_lo < 1e-14 * k_hi:
            break
    k_root = 0.5 * (k_lo + k_hi)
    return k_root * k_root
