"""Nodal fields on a mesh and on tagged boundary parts."""

import numpy as np

from .exceptions import AdmissibilityError, ParameterError
from .mesh import GAMMA


class ScalarField:
    """One real value per mesh vertex (a P1 finite-element function)."""

    def __init__(self, mesh, values):
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ParameterError(
                "field has %d values for a mesh with %d vertices"
                % (values.size, mesh.n_vertices)
            )
        self.mesh = mesh
        self.values = values

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def ones(cls, mesh):
        return cls(mesh, np.ones(mesh.n_vertices))

    @classmethod
    def from_function(cls, mesh, fn):
        x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
        return cls(mesh, fn(x, y))


class BoundaryField:
    """One real value per node of a tagged boundary part.

    ``node_ids`` is always the full sorted node set of the tagged part;
    constructors reject incomplete value sets.
    """

    def __init__(self, mesh, tag, values):
        node_ids = mesh.boundary_nodes(tag)
        values = np.ascontiguousarray(values, dtype=float)
        if values.shape != node_ids.shape:
            raise ParameterError(
                "boundary part %s has %d nodes, got %d values"
                % (tag, node_ids.size, values.size)
            )
        self.mesh = mesh
        self.tag = tag
        self.node_ids = node_ids
        self.values = values

    @classmethod
    def constant(cls, mesh, tag, value):
        n = mesh.boundary_nodes(tag).size
        return cls(mesh, tag, np.full(n, float(value)))

    @classmethod
    def from_function(cls, mesh, tag, fn):
        """Sample ``fn(x, y)`` at the tagged boundary nodes."""
        nodes = mesh.boundary_nodes(tag)
        x, y = mesh.vertices[nodes, 0], mesh.vertices[nodes, 1]
        return cls(mesh, tag, fn(x, y))

    @classmethod
    def from_node_values(cls, mesh, tag, mapping):
        """Build from a {node_id: value} mapping covering every tagged node."""
        nodes = mesh.boundary_nodes(tag)
        missing = [int(n) for n in nodes if int(n) not in mapping]
        if missing:
            raise ParameterError(
                "missing value for %s node %d" % (tag, missing[0])
            )
        return cls(mesh, tag, [mapping[int(n)] for n in nodes])

    @classmethod
    def from_scalar_field(cls, field, tag):
        """Nodal trace of a ScalarField on the tagged part."""
        nodes = field.mesh.boundary_nodes(tag)
        return cls(field.mesh, tag, field.values[nodes])

    def as_full_vector(self):
        """Values scattered into a mesh-length vector, zero elsewhere."""
        full = np.zeros(self.mesh.n_vertices)
        full[self.node_ids] = self.values
        return full

    def value_at(self, node_id):
        pos = np.searchsorted(self.node_ids, node_id)
        if pos >= self.node_ids.size or self.node_ids[pos] != node_id:
            raise ParameterError("node %d is not on part %s" % (node_id, self.tag))
        return float(self.values[pos])


class RobinField(BoundaryField):
    """Robin coefficient (or a perturbation direction) on the GAMMA part.

    When ``admissible`` is set the values must be strictly positive.
    Perturbation directions are built with ``admissible=False``.
    """

    def __init__(self, mesh, values, admissible=True):
        super().__init__(mesh, GAMMA, values)
        self.admissible = bool(admissible)
        if self.admissible and np.any(self.values <= 0.0):
            raise AdmissibilityError(
                "Robin coefficient must be strictly positive (min %g)"
                % float(np.min(self.values))
            )

    @classmethod
    def constant(cls, mesh, value, admissible=True):
        n = mesh.boundary_nodes(GAMMA).size
        return cls(mesh, np.full(n, float(value)), admissible=admissible)

    @classmethod
    def from_function(cls, mesh, fn, admissible=True):
        nodes = mesh.boundary_nodes(GAMMA)
        x, y = mesh.vertices[nodes, 0], mesh.vertices[nodes, 1]
        return cls(mesh, fn(x, y), admissible=admissible)

    def replace_values(self, values, admissible=None):
        if admissible is None:
            admissible = self.admissible
        return RobinField(self.mesh, values, admissible=admissible)
