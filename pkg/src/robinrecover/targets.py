"""Built-in target coefficients and loading of sampled targets.

Targets are callables ``fn(x, y)`` defined on the GAMMA circle.  The
only built-in is ``paper4``; arbitrary targets enter as CSV files with
``theta,h`` rows that are interpolated periodically in the angle.
"""

import numpy as np

from .exceptions import FileFormatError, ParameterError
from .spectral import periodic_interp


def _paper4(x, y):
    return 1.0 + x * y / 2.0 - x * x * y / 5.0


BUILTIN_TARGETS = {"paper4": _paper4}


def load_sampled_target(path):
    """Target from a CSV of ``theta,h`` rows, periodic in the angle."""
    theta = []
    values = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line == "theta,h":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FileFormatError("expected 'theta,h' row", line=lineno)
            try:
                theta.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError:
                raise FileFormatError("bad numeric value %r" % line, line=lineno)
    if len(theta) < 3:
        raise FileFormatError("need at least 3 samples", line=1)
    theta = np.asarray(theta)
    values = np.asarray(values)
    order = np.argsort(theta)
    theta, values = theta[order], values[order]
    if np.any(np.diff(theta) <= 0.0):
        raise FileFormatError("duplicate theta samples", line=1)

    def fn(x, y):
        angles = np.arctan2(y, x)
        return periodic_interp(theta, values, angles)

    return fn


def resolve_target(spec):
    """Map a CLI target spec to a callable: builtin name or CSV path."""
    if spec in BUILTIN_TARGETS:
        return BUILTIN_TARGETS[spec]
    import os

    if os.path.exists(spec):
        return load_sampled_target(spec)
    raise ParameterError(
        "unknown target %r (builtin names: %s, or a theta,h CSV path)"
        % (spec, ", ".join(sorted(BUILTIN_TARGETS)))
    )
