"""Structured triangulations of axis-aligned rectangles and interface pairing.

Meshes are built as uniform grids of rectangular cells, each split into two
triangles along the lower-left to upper-right diagonal.  Every boundary edge
carries a tag naming its physical role; the interface between the fluid and
the poroelastic mesh is tagged ``interface`` on both sides and paired edge by
edge.  Mesh objects are immutable after construction and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOUNDARY_TAGS = (
    "dirichlet_velocity",
    "neumann_traction",
    "pressure_dirichlet",
    "pressure_noflow",
    "interface",
    "symmetry",
    "inlet",
    "outlet",
    "external",
)

SIDES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    """Rejected mesh input (bad geometry, bad tags)."""


class IncompatibleMeshError(MeshError):
    """Two meshes do not share a geometrically matching interface."""


@dataclass(frozen=True)
class BoundaryTag:
    """Validated name of a boundary-segment role."""

    name: str

    def __post_init__(self):
        if self.name not in BOUNDARY_TAGS:
            raise MeshError(f"unknown boundary tag {self.name!r}")


@dataclass(eq=False)
class Mesh2D:
    """Conforming triangulation of an axis-aligned rectangle.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex triples
    edges : (ne, 2) int array
        All unique edges as sorted vertex pairs (interior and boundary).
    tri_edges : (nt, 3) int array
        Global edge index of the local edges (0,1), (1,2), (2,0).
    boundary_edges : (nb,) int array, indices into ``edges``
    boundary_tri : (nb,) int array, owning triangle of each boundary edge
    boundary_local : (nb,) int array, local edge index inside the owner
    boundary_tag : (nb,) array of tag names
    h_max : float, maximum edge length (diagonals included)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_tri: np.ndarray
    boundary_local: np.ndarray
    boundary_tag: np.ndarray
    h_max: float
    rect: tuple = field(default=None)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def triangle_areas(self) -> np.ndarray:
        """Signed areas; positive for counterclockwise triangles."""
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_edges_of(self, tags) -> np.ndarray:
        """Positions (into the boundary arrays) of edges carrying any of ``tags``."""
        if isinstance(tags, str):
            tags = (tags,)
        mask = np.isin(self.boundary_tag, list(tags))
        return np.nonzero(mask)[0]

    def edge_outward_normal(self, b_idx: int) -> np.ndarray:
        """Unit outward normal of the boundary edge at position ``b_idx``."""
        a, b = self.edges[self.boundary_edges[b_idx]]
        tri = self.triangles[self.boundary_tri[b_idx]]
        (c,) = (v for v in tri if v != a and v != b)
        t = self.vertices[b] - self.vertices[a]
        n = np.array([t[1], -t[0]])
        n /= np.hypot(*n)
        if np.dot(n, self.vertices[c] - self.vertices[a]) > 0.0:
            n = -n
        return n


_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def build_rect_mesh(rect, h, side_tags) -> Mesh2D:
    """Triangulate the rectangle ``(x0, x1) x (y0, y1)`` with target size ``h``.

    Parameters
    ----------
    rect : (x0, x1, y0, y1)
    h : float
        Target cell size; the grid uses ``ceil(extent / h)`` cells per axis.
    side_tags : mapping side -> tag name, sides ``left right bottom top``

    Returns
    -------
    Mesh2D
    """
    x0, x1, y0, y1 = map(float, rect)
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"rectangle has non-positive extent: {rect}")
    if not h > 0.0:
        raise MeshError(f"mesh size must be positive, got {h}")
    missing = set(SIDES) - set(side_tags)
    if missing:
        raise MeshError(f"missing side tags: {sorted(missing)}")
    for side in SIDES:
        BoundaryTag(side_tags[side])

    nx = math.ceil((x1 - x0) / h)
    ny = math.ceil((y1 - y0) / h)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (nx + 1) + ix

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ix, iy = ix.ravel(), iy.ravel()
    a = vid(ix, iy)
    b = vid(ix + 1, iy)
    c = vid(ix + 1, iy + 1)
    d = vid(ix, iy + 1)
    # diagonal a-c, fixed for reproducibility
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])

    edges, tri_edges = _edge_table(tris)

    # boundary edges = edges used by exactly one triangle
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    b_edges = np.nonzero(counts == 1)[0]
    owner = np.full(len(edges), -1, dtype=np.int64)
    local = np.full(len(edges), -1, dtype=np.int64)
    for loc in range(3):
        cols = tri_edges[:, loc]
        owner[cols] = np.arange(len(tris))
        local[cols] = loc
    # interior edges were overwritten twice; only boundary rows are consumed
    b_tri = owner[b_edges]
    b_local = local[b_edges]

    mids = 0.5 * (vertices[edges[b_edges, 0]] + vertices[edges[b_edges, 1]])
    tol = 1e-12 * max(x1 - x0, y1 - y0, 1.0)
    tag = np.empty(len(b_edges), dtype=object)
    tag[np.abs(mids[:, 0] - x0) < tol] = side_tags["left"]
    tag[np.abs(mids[:, 0] - x1) < tol] = side_tags["right"]
    tag[np.abs(mids[:, 1] - y0) < tol] = side_tags["bottom"]
    tag[np.abs(mids[:, 1] - y1) < tol] = side_tags["top"]
    if any(t is None for t in tag):
        raise MeshError("untagged boundary edge")

    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    return Mesh2D(
        vertices=vertices,
        triangles=tris,
        edges=edges,
        tri_edges=tri_edges,
        boundary_edges=b_edges,
        boundary_tri=b_tri,
        boundary_local=b_local,
        boundary_tag=tag.astype(str),
        h_max=float(lengths.max()),
        rect=(x0, x1, y0, y1),
    )


def _edge_table(tris):
    """Unique sorted vertex pairs and the triangle-to-edge incidence."""
    raw = np.concatenate([tris[:, list(pair)] for pair in _LOCAL_EDGES])
    raw.sort(axis=1)
    edges, inv = np.unique(raw, axis=0, return_inverse=True)
    tri_edges = inv.reshape(3, -1).T
    return edges, np.ascontiguousarray(tri_edges)


@dataclass(eq=False)
class InterfaceSide:
    """Per-domain view of the interface: ordered edges plus P2 trace nodes.

    ``elems``/``local_edges`` give the owning triangle of each interface edge;
    ``v_start``/``v_end`` orient every edge by increasing arclength so both
    sides of a pairing traverse identical physical points.  ``p2_nodes`` holds
    the scalar P2 node ids (vertex ids, then ``n_vertices + edge id`` for
    midpoints) in arclength order: v0, m0, v1, m1, ..., v_last.
    """

    mesh: Mesh2D
    edge_ids: np.ndarray
    elems: np.ndarray
    local_edges: np.ndarray
    v_start: np.ndarray
    v_end: np.ndarray
    lengths: np.ndarray
    p2_nodes: np.ndarray
    node_coords: np.ndarray
    normal: np.ndarray


@dataclass(eq=False)
class InterfacePairing:
    """Edge-by-edge matching of the two interface traces.

    ``fluid`` and ``poro`` traverse the same polyline in the same direction;
    ``n_f`` and ``n_p`` are the constant outward unit normals (``n_f == -n_p``)
    and ``tau`` is the fluid-side unit tangent (the poroelastic tangent is
    ``-tau``).
    """

    fluid: InterfaceSide
    poro: InterfaceSide
    n_f: np.ndarray
    n_p: np.ndarray
    tau: np.ndarray

    @property
    def fluid_edges(self):
        return self.fluid.edge_ids

    @property
    def poro_edges(self):
        return self.poro.edge_ids

    @property
    def n_nodes(self) -> int:
        return len(self.fluid.p2_nodes)

    @property
    def tau_p(self) -> np.ndarray:
        return -self.tau

    def side_of(self, mesh: Mesh2D) -> InterfaceSide:
        if mesh is self.fluid.mesh:
            return self.fluid
        if mesh is self.poro.mesh:
            return self.poro
        raise IncompatibleMeshError("mesh does not belong to this pairing")


def _interface_side(mesh: Mesh2D) -> InterfaceSide:
    pos = mesh.boundary_edges_of("interface")
    if len(pos) == 0:
        raise IncompatibleMeshError("mesh has no edges tagged 'interface'")
    edge_ids = mesh.boundary_edges[pos]
    ab = mesh.edges[edge_ids]
    pts = mesh.vertices

    # interface edges of a rectangle lie on one axis-aligned segment
    mids = 0.5 * (pts[ab[:, 0]] + pts[ab[:, 1]])
    axis = 0 if np.ptp(mids[:, 0]) >= np.ptp(mids[:, 1]) else 1
    order = np.argsort(mids[:, axis], kind="stable")
    pos, edge_ids, ab = pos[order], edge_ids[order], ab[order]

    flip = pts[ab[:, 0], axis] > pts[ab[:, 1], axis]
    v_start = np.where(flip, ab[:, 1], ab[:, 0])
    v_end = np.where(flip, ab[:, 0], ab[:, 1])
    lengths = np.linalg.norm(pts[v_end] - pts[v_start], axis=1)

    normals = np.array([mesh.edge_outward_normal(p) for p in pos])
    if not np.allclose(normals, normals[0], atol=1e-12):
        raise IncompatibleMeshError("interface is not a straight segment")

    nv = mesh.n_vertices
    p2 = [v_start[0]]
    for eid, ve in zip(edge_ids, v_end):
        p2.extend((nv + eid, ve))
    p2 = np.asarray(p2, dtype=np.int64)
    coords = np.empty((len(p2), 2))
    vmask = p2 < nv
    coords[vmask] = pts[p2[vmask]]
    emask = ~vmask
    ev = mesh.edges[p2[emask] - nv]
    coords[emask] = 0.5 * (pts[ev[:, 0]] + pts[ev[:, 1]])

    return InterfaceSide(
        mesh=mesh,
        edge_ids=edge_ids,
        elems=mesh.boundary_tri[pos],
        local_edges=mesh.boundary_local[pos],
        v_start=v_start,
        v_end=v_end,
        lengths=lengths,
        p2_nodes=p2,
        node_coords=coords,
        normal=normals[0],
    )


def pair_interface(mesh_f: Mesh2D, mesh_p: Mesh2D) -> InterfacePairing:
    """Pair the interface edges of a fluid and a poroelastic mesh.

    Both meshes must carry geometrically coincident ``interface`` edges; the
    pairing is ordered by arclength along the shared segment.
    """
    fluid = _interface_side(mesh_f)
    poro = _interface_side(mesh_p)
    if len(fluid.edge_ids) != len(poro.edge_ids):
        raise IncompatibleMeshError(
            f"interface edge counts differ: {len(fluid.edge_ids)} (fluid) "
            f"vs {len(poro.edge_ids)} (poroelastic)"
        )
    tol = 1e-12 * max(mesh_f.h_max, mesh_p.h_max)
    pf = np.stack([mesh_f.vertices[fluid.v_start], mesh_f.vertices[fluid.v_end]])
    pp = np.stack([mesh_p.vertices[poro.v_start], mesh_p.vertices[poro.v_end]])
    if not np.all(np.abs(pf - pp) <= tol):
        raise IncompatibleMeshError("paired interface edges do not coincide")

    n_f, n_p = fluid.normal, poro.normal
    if not np.allclose(n_f, -n_p, atol=1e-12):
        raise IncompatibleMeshError("interface normals are not opposite")
    tau = np.array([-n_f[1], n_f[0]])
    return InterfacePairing(fluid=fluid, poro=poro, n_f=n_f, n_p=n_p, tau=tau)
