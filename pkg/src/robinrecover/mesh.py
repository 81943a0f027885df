"""Conforming 2D triangulations with tagged boundary parts.

Boundary edges are split into two tagged parts: ``GAMMA`` (the
inaccessible part carrying the Robin condition) and ``GAMMA_D`` (the
accessible part carrying the homogeneous Dirichlet condition).  Each
boundary edge stores the outward unit normal of its adjacent triangle.

Meshes are immutable after construction and safe to share between
threads.  The only built-in generator is the structured annulus mesher;
general meshes enter through the text file format (see ``save_mesh`` /
``load_mesh``).
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    FileFormatError,
    MeshValidationError,
    ParameterError,
    TopologyError,
)

GAMMA = "GAMMA"
GAMMA_D = "GAMMA_D"
TAGS = (GAMMA, GAMMA_D)

_FORMAT_HEADER = "robinmesh 1"


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : (n, 2) float array
        Vertex coordinates.
    triangles : (m, 3) int array
        Vertex indices per triangle, counterclockwise.
    boundary_edges : (b, 2) int array
        Vertex index pairs of boundary edges.
    boundary_tags : (b,) str array
        Tag per boundary edge, one of ``GAMMA`` or ``GAMMA_D``.
    boundary_normals : (b, 2) float array
        Outward unit normal per boundary edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    boundary_normals: np.ndarray

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        """Signed areas of all triangles (positive for valid meshes)."""
        p = self.vertices[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def area(self):
        return float(np.sum(self.triangle_areas()))

    def edges_with_tag(self, tag):
        """Boundary edge rows carrying ``tag`` as an index array."""
        _check_tag(tag)
        return np.flatnonzero(self.boundary_tags == tag)

    def boundary_nodes(self, tag):
        """Sorted unique vertex indices of the tagged boundary part."""
        rows = self.edges_with_tag(tag)
        return np.unique(self.boundary_edges[rows])

    def edge_lengths(self, rows=None):
        edges = self.boundary_edges if rows is None else self.boundary_edges[rows]
        d = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])


def _check_tag(tag):
    if tag not in TAGS:
        raise ParameterError("unknown boundary tag %r" % (tag,))


def _freeze(mesh):
    for arr in (
        mesh.vertices,
        mesh.triangles,
        mesh.boundary_edges,
        mesh.boundary_tags,
        mesh.boundary_normals,
    ):
        arr.setflags(write=False)
    return mesh


def _outward_normals(vertices, triangles, boundary_edges, owners):
    """Unit normals of boundary edges pointing out of their owning triangle."""
    p0 = vertices[boundary_edges[:, 0]]
    p1 = vertices[boundary_edges[:, 1]]
    t = p1 - p0
    lengths = np.hypot(t[:, 0], t[:, 1])
    if np.any(lengths <= 0.0):
        raise MeshValidationError("boundary edge of zero length")
    n = np.column_stack((t[:, 1], -t[:, 0])) / lengths[:, None]
    centroids = vertices[triangles[owners]].mean(axis=1)
    mid = 0.5 * (p0 + p1)
    flip = np.einsum("ij,ij->i", n, mid - centroids) < 0.0
    n[flip] *= -1.0
    return n


def _topological_boundary(triangles):
    """Edges owned by exactly one triangle, as {frozenset: triangle row}."""
    count = {}
    owner = {}
    for it, tri in enumerate(triangles):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            count[key] = count.get(key, 0) + 1
            owner[key] = it
    boundary = {k: owner[k] for k, c in count.items() if c == 1}
    if any(c > 2 for c in count.values()):
        raise MeshValidationError("non-manifold edge (owned by more than two triangles)")
    return boundary


def make_mesh(vertices, triangles, boundary_edges, boundary_tags):
    """Build and validate a TriMesh from raw arrays.

    Normals are computed here from the adjacent triangles, so they stay
    consistent with the connectivity by construction.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
    boundary_tags = np.asarray(boundary_tags, dtype="U8")

    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshValidationError("vertices must be an (n, 2) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshValidationError("triangles must be an (m, 3) array")
    if boundary_edges.shape[0] != boundary_tags.shape[0]:
        raise MeshValidationError("one tag required per boundary edge")
    n = vertices.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
        raise MeshValidationError("triangle references a nonexistent vertex")
    if boundary_edges.size and (boundary_edges.min() < 0 or boundary_edges.max() >= n):
        raise MeshValidationError("boundary edge references a nonexistent vertex")

    mesh = TriMesh(
        vertices,
        triangles,
        boundary_edges,
        boundary_tags,
        np.zeros((boundary_edges.shape[0], 2)),
    )
    areas = mesh.triangle_areas()
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshValidationError(
            "triangle %d has non-positive area %g" % (bad, areas[bad])
        )

    topo = _topological_boundary(triangles)
    tagged = {}
    for row, (i, j) in enumerate(boundary_edges):
        key = (min(i, j), max(i, j))
        if key in tagged:
            raise MeshValidationError("boundary edge (%d, %d) listed twice" % (i, j))
        if key not in topo:
            raise MeshValidationError(
                "edge (%d, %d) is tagged but not a topological boundary edge" % (i, j)
            )
        tagged[key] = row
    missing = set(topo) - set(tagged)
    if missing:
        i, j = sorted(missing)[0]
        raise MeshValidationError(
            "topological boundary edge (%d, %d) carries no tag" % (i, j)
        )
    for tag in TAGS:
        if not np.any(boundary_tags == tag):
            raise MeshValidationError("boundary part %s is empty" % tag)
    unknown = set(np.unique(boundary_tags)) - set(TAGS)
    if unknown:
        raise MeshValidationError("unknown boundary tag %r" % (unknown.pop(),))

    owners = np.array([topo[(min(i, j), max(i, j))] for i, j in boundary_edges])
    normals = _outward_normals(vertices, triangles, boundary_edges, owners)
    mesh = TriMesh(vertices, triangles, boundary_edges, boundary_tags, normals)
    return _freeze(mesh)


def build_annulus_mesh(r_inner, r_outer, n_circum, n_radial):
    """Structured triangulation of the annulus between two circles.

    The inner circle is tagged ``GAMMA``, the outer circle ``GAMMA_D``.
    Vertices lie exactly on the circles of radius
    ``r_inner + k * (r_outer - r_inner) / n_radial``.

    Parameters
    ----------
    r_inner, r_outer : float
        Circle radii, ``0 < r_inner < r_outer``.
    n_circum : int
        Number of circumferential segments, at least 8.
    n_radial : int
        Number of radial layers, at least 2.
    """
    if not (r_inner > 0.0 and r_outer > 0.0):
        raise ParameterError("radii must be positive")
    if not r_inner < r_outer:
        raise ParameterError(
            "r_inner (%g) must be smaller than r_outer (%g)" % (r_inner, r_outer)
        )
    n_circum = int(n_circum)
    n_radial = int(n_radial)
    if n_circum < 8:
        raise ParameterError("n_circum must be at least 8")
    if n_radial < 2:
        raise ParameterError("n_radial must be at least 2")

    thetas = 2.0 * math.pi * np.arange(n_circum) / n_circum
    radii = r_inner + (r_outer - r_inner) * np.arange(n_radial + 1) / n_radial
    vertices = np.empty(((n_radial + 1) * n_circum, 2))
    for k, r in enumerate(radii):
        base = k * n_circum
        vertices[base : base + n_circum, 0] = r * np.cos(thetas)
        vertices[base : base + n_circum, 1] = r * np.sin(thetas)

    def vid(k, j):
        return k * n_circum + (j % n_circum)

    triangles = np.empty((2 * n_radial * n_circum, 3), dtype=np.int64)
    row = 0
    for k in range(n_radial):
        for j in range(n_circum):
            a = vid(k, j)
            b = vid(k + 1, j)
            c = vid(k + 1, j + 1)
            d = vid(k, j + 1)
            triangles[row] = (a, b, c)
            triangles[row + 1] = (a, c, d)
            row += 2

    edges = []
    tags = []
    for j in range(n_circum):
        edges.append((vid(0, j), vid(0, j + 1)))
        tags.append(GAMMA)
    for j in range(n_circum):
        edges.append((vid(n_radial, j), vid(n_radial, j + 1)))
        tags.append(GAMMA_D)

    return make_mesh(vertices, triangles, np.array(edges), tags)


def boundary_arc_parameterization(mesh, tag):
    """Nodes of a tagged boundary circle keyed by polar angle.

    Returns a list of ``(node_index, theta)`` pairs sorted by the angle
    ``theta = atan2(y, x)`` mapped to ``[0, 2*pi)``.  The tagged part
    must form a single closed polyline.
    """
    rows = mesh.edges_with_tag(tag)
    edges = mesh.boundary_edges[rows]
    adjacency = {}
    for i, j in edges:
        adjacency.setdefault(int(i), []).append(int(j))
        adjacency.setdefault(int(j), []).append(int(i))
    for node, nbrs in adjacency.items():
        if len(nbrs) != 2:
            raise TopologyError(
                "boundary part %s is not a closed loop at node %d" % (tag, node)
            )
    start = min(adjacency)
    visited = {start}
    prev, cur = start, adjacency[start][0]
    while cur != start:
        visited.add(cur)
        a, b = adjacency[cur]
        prev, cur = cur, (b if a == prev else a)
    if visited != set(adjacency):
        raise TopologyError("boundary part %s has more than one loop" % tag)

    out = []
    for node in adjacency:
        x, y = mesh.vertices[node]
        theta = math.atan2(y, x)
        if theta < 0.0:
            theta += 2.0 * math.pi
        out.append((node, theta))
    out.sort(key=lambda item: item[1])
    return out


def save_mesh(mesh, path):
    """Write a mesh in the line-oriented text format.

    Coordinates are written with ``repr`` so that a load reproduces them
    exactly.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write(_FORMAT_HEADER + "\n")
        fh.write("vertices %d\n" % mesh.n_vertices)
        for x, y in mesh.vertices:
            fh.write("%s %s\n" % (repr(float(x)), repr(float(y))))
        fh.write("triangles %d\n" % mesh.n_triangles)
        for i, j, k in mesh.triangles:
            fh.write("%d %d %d\n" % (i, j, k))
        fh.write("boundary %d\n" % mesh.boundary_edges.shape[0])
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write("%d %d %s\n" % (i, j, tag))


def load_mesh(path):
    """Read a mesh from the text format, validating all invariants."""
    with open(path, "r") as fh:
        lines = fh.readlines()

    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            lineno = pos + 1
            raw = lines[pos].strip()
            pos += 1
            if raw and not raw.startswith("#"):
                return lineno, raw
        return None, None

    lineno, header = next_line()
    if header != _FORMAT_HEADER:
        raise FileFormatError(
            "expected header %r, got %r" % (_FORMAT_HEADER, header), line=lineno or 1
        )

    def section(name):
        lineno, raw = next_line()
        if raw is None:
            raise FileFormatError("missing %r section" % name, line=len(lines))
        parts = raw.split()
        if len(parts) != 2 or parts[0] != name:
            raise FileFormatError("expected %r section header" % name, line=lineno)
        try:
            count = int(parts[1])
        except ValueError:
            raise FileFormatError("bad %s count %r" % (name, parts[1]), line=lineno)
        if count < 0:
            raise FileFormatError("negative %s count" % name, line=lineno)
        return count

    n = section("vertices")
    vertices = np.empty((n, 2))
    for row in range(n):
        lineno, raw = next_line()
        if raw is None:
            raise FileFormatError("unexpected end of file in vertices", line=len(lines))
        parts = raw.split()
        if len(parts) != 2:
            raise FileFormatError("expected 'x y'", line=lineno)
        try:
            vertices[row] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise FileFormatError("bad coordinate %r" % (raw,), line=lineno)

    m = section("triangles")
    triangles = np.empty((m, 3), dtype=np.int64)
    for row in range(m):
        lineno, raw = next_line()
        if raw is None:
            raise FileFormatError("unexpected end of file in triangles", line=len(lines))
        parts = raw.split()
        if len(parts) != 3:
            raise FileFormatError("expected 'i j k'", line=lineno)
        try:
            idx = [int(p) for p in parts]
        except ValueError:
            raise FileFormatError("bad vertex index in %r" % (raw,), line=lineno)
        if any(i < 0 or i >= n for i in idx):
            raise FileFormatError(
                "triangle references nonexistent vertex in %r" % (raw,), line=lineno
            )
        triangles[row] = idx

    b = section("boundary")
    edges = np.empty((b, 2), dtype=np.int64)
    tags = []
    for row in range(b):
        lineno, raw = next_line()
        if raw is None:
            raise FileFormatError("unexpected end of file in boundary", line=len(lines))
        parts = raw.split()
        if len(parts) != 3:
            raise FileFormatError("expected 'i j TAG'", line=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise FileFormatError("bad vertex index in %r" % (raw,), line=lineno)
        if not (0 <= i < n and 0 <= j < n):
            raise FileFormatError(
                "boundary edge references nonexistent vertex in %r" % (raw,),
                line=lineno,
            )
        if parts[2] not in TAGS:
            raise FileFormatError("unknown tag %r" % (parts[2],), line=lineno)
        edges[row] = (i, j)
        tags.append(parts[2])

    lineno, extra = next_line()
    if extra is not None:
        raise FileFormatError("trailing content %r" % (extra,), line=lineno)

    return make_mesh(vertices, triangles, edges, tags)
