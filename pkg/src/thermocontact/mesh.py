"""Triangular meshes of the body with marked boundary parts.

The body occupies a polygon in the plane.  Its boundary facets (edges) are
tagged ``GAMMA1`` (clamped), ``GAMMA2`` (traction) or ``GAMMAC`` (contact
with the rigid support).  The contact part must be a straight segment; its
vertices are ordered along the segment and form a 1D mesh of their own.

An ASCII exchange format is supported by :func:`read_ascii` and
:func:`write_ascii`::

    # comment lines start with '#'
    vertices <n>
    <x> <y>                      (n lines)
    cells <m>
    <i> <j> <k>                  (m lines, 0-based vertex indices)
    facets <q>
    <i> <j> <marker>             (q lines, marker in Gamma1/Gamma2/GammaC)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateCell, EmptyRequiredPart, InvalidExtents

DIM = 2

GAMMA1 = "Gamma1"
GAMMA2 = "Gamma2"
GAMMAC = "GammaC"
MARKERS = (GAMMA1, GAMMA2, GAMMAC)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    cells: np.ndarray  # (nc, 3), counter-clockwise
    boundary_facets: np.ndarray  # (nf, 2)
    facet_markers: tuple = ()  # one marker per boundary facet, or empty if unmarked
    contact_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    outward_normal: np.ndarray = field(default_factory=lambda: np.zeros((0, DIM)))
    contact_cells: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_contact(self) -> int:
        return len(self.contact_nodes)

    @property
    def is_marked(self) -> bool:
        return len(self.facet_markers) == len(self.boundary_facets) > 0

    def cell_areas(self) -> np.ndarray:
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def facets_with(self, marker: str) -> np.ndarray:
        mask = np.array([m == marker for m in self.facet_markers], dtype=bool)
        return self.boundary_facets[mask] if mask.size else np.zeros((0, 2), dtype=int)

    def nodes_on(self, marker: str) -> np.ndarray:
        return np.unique(self.facets_with(marker))

    def contact_coordinate(self) -> np.ndarray:
        """Arc-length coordinate of the contact nodes along the contact line."""
        p = self.vertices[self.contact_nodes]
        if len(p) == 0:
            return np.zeros(0)
        t = np.array([-self.outward_normal[0, 1], self.outward_normal[0, 0]])
        s = (p - p[0]) @ t
        return s - s.min()

    def contact_cell_lengths(self) -> np.ndarray:
        p = self.vertices[self.contact_nodes]
        e = p[self.contact_cells[:, 1]] - p[self.contact_cells[:, 0]]
        return np.hypot(e[:, 0], e[:, 1])


def _boundary_facets(cells: np.ndarray) -> np.ndarray:
    edges = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    # Keep the orientation induced by the (counter-clockwise) cell.
    return edges[counts[inv] == 1]


def _check_cells(vertices, cells):
    p = vertices[cells]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise DegenerateCell(f"cell {bad} has nonpositive area {area[bad]:.3e}")


def from_arrays(vertices, cells) -> Mesh:
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=int)
    _check_cells(vertices, cells)
    return Mesh(vertices, cells, _boundary_facets(cells))


def build_structured_rect(nx: int, ny: int, extents=((0.0, 1.0), (0.0, 1.0))) -> Mesh:
    """Uniform ``nx`` x ``ny`` grid of squares, each split along its diagonal."""
    if nx < 1 or ny < 1:
        raise InvalidExtents("nx and ny must be at least 1")
    (x0, x1), (y0, y1) = extents
    if not (x1 > x0 and y1 > y0):
        raise InvalidExtents(f"degenerate rectangle {extents!r}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    cells = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return from_arrays(vertices, cells)


def rect_rule(extents=((0.0, 1.0), (0.0, 1.0)), bottom=GAMMAC, top=GAMMA1, left=GAMMA2, right=GAMMA2):
    """Marker rule for a rectangle, keyed on which side a facet midpoint is on."""
    (x0, x1), (y0, y1) = extents
    tol = 1e-10 * max(x1 - x0, y1 - y0)

    def rule(mid):
        x, y = mid
        if abs(y - y0) < tol:
            return bottom
        if abs(y - y1) < tol:
            return top
        if abs(x - x0) < tol:
            return left
        if abs(x - x1) < tol:
            return right
        raise ValueError(f"facet midpoint {mid} is not on the rectangle boundary")

    return rule


def mark_boundary(mesh: Mesh, rule: Callable[[np.ndarray], str]) -> Mesh:
    """Tag every boundary facet via ``rule(midpoint)`` and build the contact structure."""
    facets = mesh.boundary_facets
    mids = 0.5 * (mesh.vertices[facets[:, 0]] + mesh.vertices[facets[:, 1]])
    markers = tuple(rule(m) for m in mids)
    for m in markers:
        if m not in MARKERS:
            raise ValueError(f"unknown boundary marker {m!r}")
    return _with_markers(mesh, markers)


def _with_markers(mesh: Mesh, markers: tuple) -> Mesh:
    if GAMMA1 not in markers:
        raise EmptyRequiredPart("Gamma1 must contain at least one facet")
    if GAMMAC not in markers:
        raise EmptyRequiredPart("GammaC must contain at least one facet")

    facets = mesh.boundary_facets
    cfacets = facets[np.array([m == GAMMAC for m in markers])]
    p = mesh.vertices
    # Outward normal of a counter-clockwise boundary edge (a -> b) is (dy, -dx).
    e = p[cfacets[:, 1]] - p[cfacets[:, 0]]
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    normals /= np.hypot(normals[:, 0], normals[:, 1])[:, None]
    n = normals[0]
    if np.max(np.abs(normals - n)) > 1e-10:
        raise ValueError("GammaC must be a flat (collinear) part of the boundary")
    nodes = np.unique(cfacets)
    off = (p[nodes] - p[nodes[0]]) @ n
    if np.max(np.abs(off)) > 1e-10 * max(1.0, np.ptp(p)):
        raise ValueError("GammaC vertices are not collinear")

    tangent = np.array([-n[1], n[0]])
    order = np.argsort((p[nodes] - p[nodes[0]]) @ tangent, kind="stable")
    contact_nodes = nodes[order]
    local = {int(v): k for k, v in enumerate(contact_nodes)}
    ccells = np.array([[local[int(a)], local[int(b)]] for a, b in cfacets], dtype=int)
    ccells = np.sort(ccells, axis=1)
    ccells = ccells[np.argsort(ccells[:, 0], kind="stable")]
    normal = np.tile(n, (len(contact_nodes), 1))
    return Mesh(
        mesh.vertices,
        mesh.cells,
        facets,
        markers,
        contact_nodes,
        normal,
        ccells,
    )


def trace_map(mesh: Mesh) -> dict:
    """Contact-node index -> bulk vertex index, in contact ordering."""
    return {k: int(v) for k, v in enumerate(mesh.contact_nodes)}


def read_ascii(path) -> Mesh:
    with open(path) as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    it = iter(lines)

    def section(name):
        head = next(it).split()
        if head[0] != name or len(head) != 2:
            raise ValueError(f"expected '{name} <count>', got {' '.join(head)!r}")
        return int(head[1])

    nv = section("vertices")
    vertices = np.array([[float(t) for t in next(it).split()] for _ in range(nv)])
    nc = section("cells")
    cells = np.array([[int(t) for t in next(it).split()] for _ in range(nc)], dtype=int)
    nf = section("facets")
    tagged = {}
    for _ in range(nf):
        a, b, m = next(it).split()
        tagged[tuple(sorted((int(a), int(b))))] = m
    mesh = from_arrays(vertices, cells)
    try:
        markers = tuple(tagged[tuple(sorted(map(int, f)))] for f in mesh.boundary_facets)
    except KeyError as exc:
        raise ValueError(f"boundary facet {exc.args[0]} has no marker") from None
    for m in markers:
        if m not in MARKERS:
            raise ValueError(f"unknown boundary marker {m!r}")
    return _with_markers(mesh, markers)


def write_ascii(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for c in mesh.cells:
            fh.write(f"{c[0]} {c[1]} {c[2]}\n")
        fh.write(f"facets {len(mesh.boundary_facets)}\n")
        for (a, b), m in zip(mesh.boundary_facets, mesh.facet_markers):
            fh.write(f"{a} {b} {m}\n")
