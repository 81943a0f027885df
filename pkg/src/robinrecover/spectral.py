"""Spectral data: synthesis, uniform noise injection, mesh transfer, file I/O.

A measurement is the pair (lambda, g): the principal eigenvalue and the
Neumann trace of the principal eigenfunction on the accessible boundary
part, sampled at the GAMMA_D nodes and keyed by polar angle.  Keying by
angle makes the data mesh-independent, so it can be generated on one
mesh and consumed on another (the standard guard against the inverse
crime of reconstructing on the generation mesh).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .eigen import principal_eigenpair
from .exceptions import FileFormatError, ParameterError
from .fields import BoundaryField, RobinField
from .fem import neumann_trace
from .mesh import GAMMA_D, boundary_arc_parameterization

_TWO_PI = 2.0 * math.pi
_RNG_ID = "pcg64"


@dataclass(frozen=True)
class SpectralData:
    """Measured pair (lambda, g) with g sampled by boundary arc angle.

    ``provenance`` is ``"clean"`` for synthesized data or ``"noisy"``
    for data that passed through ``add_noise``; noisy data records the
    drawn half-width ``eps0``, the ``seed``, and the realized relative
    noise ``eps_lambda`` shared by the eigenvalue perturbation.
    """

    lam: float
    theta: np.ndarray
    g: np.ndarray
    provenance: str = "clean"
    eps0: float = 0.0
    seed: int = 0
    eps_lambda: float = 0.0

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta, dtype=float)
        g = np.ascontiguousarray(self.g, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "g", g)
        if not self.lam > 0.0:
            raise ParameterError("eigenvalue must be positive")
        if theta.size < 3:
            raise ParameterError("spectral data needs at least 3 samples")
        if theta.shape != g.shape:
            raise ParameterError("theta and g must have matching shapes")
        if np.any(np.diff(theta) <= 0.0):
            raise ParameterError("theta samples must be strictly increasing")
        if theta[0] < 0.0 or theta[-1] >= _TWO_PI:
            raise ParameterError("theta samples must lie in [0, 2*pi)")
        if self.provenance not in ("clean", "noisy"):
            raise ParameterError("provenance must be 'clean' or 'noisy'")
        theta.setflags(write=False)
        g.setflags(write=False)


def _theta_l2_sq(theta, values):
    """Exact integral of the squared periodic P1 interpolant in theta."""
    a = values
    b = np.roll(values, -1)
    gaps = np.diff(theta, append=theta[0] + _TWO_PI)
    return float(np.sum(gaps * (a * a + a * b + b * b) / 3.0))


def theta_l2_norm(theta, values):
    return math.sqrt(max(_theta_l2_sq(np.asarray(theta), np.asarray(values)), 0.0))


def synthesize_data(gen_mesh, h_true, tol=1e-10, max_iter=1000):
    """Solve the forward eigenproblem and sample the Neumann trace.

    Returns clean spectral data keyed by the GAMMA_D node angles of the
    generation mesh.
    """
    if not isinstance(h_true, RobinField):
        raise ParameterError("h_true must be a RobinField")
    eig = principal_eigenpair(gen_mesh, h_true, tol=tol, max_iter=max_iter)
    trace = neumann_trace(gen_mesh, eig.u, eig.lam, h_true)
    full = trace.as_full_vector()
    param = boundary_arc_parameterization(gen_mesh, GAMMA_D)
    nodes = np.array([n for n, _ in param])
    theta = np.array([t for _, t in param])
    return SpectralData(eig.lam, theta, full[nodes])


def add_noise(data, eps0, seed):
    """Inject uniform relative noise into a clean measurement.

    Each sample receives an i.i.d. draw from ``U(-eps0, eps0)`` scaled
    by the L2-average magnitude of g over the boundary, so the realized
    relative L2 noise equals the RMS of the draw and stays below eps0.
    The eigenvalue is perturbed multiplicatively by that same realized
    level, making the two noise levels comparable.
    """
    if data.provenance != "clean":
        raise ParameterError("noise can only be added to clean data")
    if eps0 < 0.0:
        raise ParameterError("eps0 must be nonnegative")
    seed = int(seed)
    if eps0 == 0.0:
        return replace(data, provenance="noisy", eps0=0.0, seed=seed, eps_lambda=0.0)

    rng = np.random.default_rng(seed)
    eps = rng.uniform(-eps0, eps0, size=data.g.size)
    g_avg = math.sqrt(_theta_l2_sq(data.theta, data.g) / _TWO_PI)
    g_noisy = data.g + eps * g_avg
    realized = math.sqrt(
        _theta_l2_sq(data.theta, g_noisy - data.g) / _theta_l2_sq(data.theta, data.g)
    )
    return SpectralData(
        data.lam * (1.0 + realized),
        data.theta,
        g_noisy,
        provenance="noisy",
        eps0=float(eps0),
        seed=seed,
        eps_lambda=realized,
    )


def calibrated_noise(data, target_level, seed):
    """Noise injection hitting an exact realized relative level.

    The realized level is linear in eps0 for a fixed seed, so one probe
    draw determines the half-width that lands exactly on the target.
    """
    if target_level < 0.0:
        raise ParameterError("target_level must be nonnegative")
    if target_level == 0.0:
        return add_noise(data, 0.0, seed)
    probe = add_noise(data, 1.0, seed)
    if probe.eps_lambda == 0.0:
        raise ParameterError("degenerate draw; choose another seed")
    return add_noise(data, target_level / probe.eps_lambda, seed)


def periodic_interp(theta_samples, values, query):
    """Linear interpolation of angle-keyed samples, periodic in 2*pi.

    Queries that coincide with sample knots reproduce the sample values
    exactly.
    """
    theta_samples = np.asarray(theta_samples, dtype=float)
    values = np.asarray(values, dtype=float)
    if theta_samples.size == 0:
        raise ParameterError("empty sample list")
    query = np.asarray(query, dtype=float) % _TWO_PI
    theta_ext = np.append(theta_samples, theta_samples[0] + _TWO_PI)
    values_ext = np.append(values, values[0])
    shifted = np.where(query < theta_samples[0], query + _TWO_PI, query)
    return np.interp(shifted, theta_ext, values_ext)


def transfer_to_mesh(data, target_mesh):
    """Interpolate the g samples onto the GAMMA_D nodes of another mesh."""
    param = boundary_arc_parameterization(target_mesh, GAMMA_D)
    nodes = np.array([n for n, _ in param])
    theta = np.array([t for _, t in param])
    values = periodic_interp(data.theta, data.g, theta)
    # BoundaryField expects values aligned with the sorted node ids.
    order = np.argsort(nodes)
    return BoundaryField(target_mesh, GAMMA_D, values[order])


def save_spectral_data(data, path):
    """Write a measurement as CSV with provenance header comments."""
    with open(path, "w", newline="\n") as fh:
        fh.write("# lambda %s\n" % repr(float(data.lam)))
        if data.provenance == "clean":
            fh.write("# provenance clean\n")
        else:
            fh.write(
                "# provenance noisy eps0=%s seed=%d eps_lambda=%s rng=%s\n"
                % (repr(float(data.eps0)), data.seed, repr(float(data.eps_lambda)), _RNG_ID)
            )
        fh.write("theta,g\n")
        for t, v in zip(data.theta, data.g):
            fh.write("%s,%s\n" % (repr(float(t)), repr(float(v))))


def load_spectral_data(path):
    """Read a measurement written by ``save_spectral_data``."""
    lam = None
    provenance = "clean"
    eps0 = 0.0
    seed = 0
    eps_lambda = 0.0
    theta = []
    g = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if not parts:
                    continue
                if parts[0] == "lambda":
                    try:
                        lam = float(parts[1])
                    except (IndexError, ValueError):
                        raise FileFormatError("bad lambda header", line=lineno)
                elif parts[0] == "provenance":
                    if len(parts) < 2 or parts[1] not in ("clean", "noisy"):
                        raise FileFormatError("bad provenance header", line=lineno)
                    provenance = parts[1]
                    for item in parts[2:]:
                        if "=" not in item:
                            continue
                        key, value = item.split("=", 1)
                        if key == "eps0":
                            eps0 = float(value)
                        elif key == "seed":
                            seed = int(value)
                        elif key == "eps_lambda":
                            eps_lambda = float(value)
                continue
            if line == "theta,g":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FileFormatError("expected 'theta,g' row", line=lineno)
            try:
                theta.append(float(parts[0]))
                g.append(float(parts[1]))
            except ValueError:
                raise FileFormatError("bad numeric value %r" % line, line=lineno)
    if lam is None:
        raise FileFormatError("missing '# lambda' header", line=1)
    if len(theta) < 3:
        raise FileFormatError("fewer than 3 samples", line=1)
    return SpectralData(
        lam,
        np.array(theta),
        np.array(g),
        provenance=provenance,
        eps0=eps0,
        seed=seed,
        eps_lambda=eps_lambda,
    )
