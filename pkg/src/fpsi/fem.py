"""Reference elements, quadrature, degree-of-freedom maps, and assembly.

Supported elements on triangles: P1 scalar, P2 scalar, and P2 vector (the
vector element interleaves components, dof ``2*node + comp``).  Assembly is
vectorized over elements; matrices come back in CSR form.  Boundary and
interface forms share one engine that integrates products of traces (scalar,
normal component, or tangential component) over ordered edge sets, which also
covers cross-domain couplings on a matching interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .mesh import InterfacePairing, InterfaceSide, Mesh2D

ELEMENT_DEGREE = {"p1_scalar": 1, "p2_scalar": 2, "p2_vector": 2}
LOCAL_SIZE = {"p1_scalar": 3, "p2_scalar": 6, "p2_vector": 12}


class FemError(ValueError):
    """Rejected assembly input (space/locus mismatch, bad degree)."""


# ---------------------------------------------------------------------------
# reference bases
# ---------------------------------------------------------------------------

def reference_basis(element_kind: str, points: np.ndarray):
    """Lagrange basis values and reference gradients at reference points.

    Parameters
    ----------
    element_kind : "p1_scalar" or "p2_scalar"
        Vector elements reuse the scalar tables componentwise.
    points : (nq, 2) array of reference coordinates (x, y) with
        barycentric (1 - x - y, x, y).

    Returns
    -------
    values : (nq, nb) array
    gradients : (nq, nb, 2) array
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if element_kind == "p1_scalar":
        vals = lam
        grads = np.broadcast_to(dlam, (len(pts), 3, 2)).copy()
        return vals, grads
    if element_kind in ("p2_scalar", "p2_vector"):
        nq = len(pts)
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * dlam[i]
        for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            vals[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
            grads[:, 3 + k] = 4.0 * (lam[:, i, None] * dlam[j] + lam[:, j, None] * dlam[i])
        return vals, grads
    raise FemError(f"unknown element kind {element_kind!r}")


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights, exact to the declared polynomial degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    locus: str


# barycentric points and unit weights of the triangle rules
_TRI_3 = (
    [(2 / 3, 1 / 6, 1 / 6)],
    [1 / 3],
)
_TRI_6 = (
    [
        (0.816847572980459, 0.091576213509771, 0.091576213509771),
        (0.108103018168070, 0.445948490915965, 0.445948490915965),
    ],
    [0.109951743655322, 0.223381589678011],
)
_TRI_12 = (
    [
        (0.873821971016996, 0.063089014491502, 0.063089014491502),
        (0.501426509658179, 0.249286745170910, 0.249286745170910),
        (0.636502499121399, 0.310352451033785, 0.053145049844816),
    ],
    [0.050844906370207, 0.116786275726379, 0.082851075618374],
)


def _symmetrize(groups, weights):
    pts, ws = [], []
    for (a, b, c), w in zip(groups, weights):
        perms = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
        for p in sorted(perms):
            pts.append(p)
            ws.append(w)
    return np.array(pts), np.array(ws)


def quadrature(locus: str, degree: int) -> QuadratureRule:
    """Quadrature rule on the reference triangle or reference edge [0, 1].

    Triangle rules: 3 points up to degree 2, 6 points up to degree 4,
    12 points up to degree 6.  Edge rules are Gauss-Legendre with
    ``ceil((degree + 1) / 2)`` points.
    """
    if not 1 <= degree <= 6:
        raise FemError(f"unsupported quadrature degree {degree}")
    if locus == "triangle":
        table = _TRI_3 if degree <= 2 else _TRI_6 if degree <= 4 else _TRI_12
        pts, ws = _symmetrize(*table)
        return QuadratureRule(points=pts, weights=0.5 * ws, degree=degree, locus=locus)
    if locus == "edge":
        n = -(-(degree + 1) // 2)
        x, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(
            points=0.5 * (x + 1.0), weights=0.5 * w, degree=degree, locus=locus
        )
    raise FemError(f"unknown quadrature locus {locus!r}")


def _tri_ref_points(rule: QuadratureRule) -> np.ndarray:
    # barycentric (l0, l1, l2) -> reference (x, y) = (l1, l2)
    return rule.points[:, 1:]


# ---------------------------------------------------------------------------
# function spaces
# ---------------------------------------------------------------------------

class FeSpace:
    """Degree-of-freedom map of one field on one mesh.

    Parameters
    ----------
    mesh : Mesh2D
    element_kind : "p1_scalar" | "p2_scalar" | "p2_vector"
    dirichlet_tags : tags whose edges carry an essential condition on the
        whole field
    component_tags : mapping tag -> component index, essential condition on a
        single vector component (used for symmetry planes)
    """

    def __init__(self, mesh: Mesh2D, element_kind: str, dirichlet_tags=(),
                 component_tags=None):
        if element_kind not in LOCAL_SIZE:
            raise FemError(f"unknown element kind {element_kind!r}")
        self.mesh = mesh
        self.element_kind = element_kind
        self.components = 2 if element_kind == "p2_vector" else 1
        self.degree = ELEMENT_DEGREE[element_kind]
        self.dirichlet_tags = tuple(dirichlet_tags)
        self.component_tags = dict(component_tags or {})

        nv = mesh.n_vertices
        if element_kind == "p1_scalar":
            self.n_scalar_nodes = nv
            self.scalar_cell_dofs = mesh.triangles.copy()
            self.scalar_node_coords = mesh.vertices
        else:
            self.n_scalar_nodes = nv + mesh.n_edges
            self.scalar_cell_dofs = np.hstack([mesh.triangles, nv + mesh.tri_edges])
            mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
            self.scalar_node_coords = np.vstack([mesh.vertices, mids])

        if self.components == 1:
            self.dof_count = self.n_scalar_nodes
            self.cell_dofs = self.scalar_cell_dofs
            self.dof_coords = self.scalar_node_coords
        else:
            self.dof_count = 2 * self.n_scalar_nodes
            base = self.scalar_cell_dofs
            cd = np.empty((mesh.n_triangles, 2 * base.shape[1]), dtype=np.int64)
            cd[:, 0::2] = 2 * base
            cd[:, 1::2] = 2 * base + 1
            self.cell_dofs = cd
            self.dof_coords = np.repeat(self.scalar_node_coords, 2, axis=0)

        self.dirichlet_mask = self._build_dirichlet_mask()
        self.dirichlet_dofs = np.nonzero(self.dirichlet_mask)[0]
        self._tables = {}

    def nodes_on_tags(self, tags) -> np.ndarray:
        """Scalar node ids lying on boundary edges carrying any of ``tags``."""
        pos = self.mesh.boundary_edges_of(tags)
        eids = self.mesh.boundary_edges[pos]
        nodes = set(self.mesh.edges[eids].ravel().tolist())
        if self.degree == 2:
            nodes.update((self.mesh.n_vertices + eids).tolist())
        return np.array(sorted(nodes), dtype=np.int64)

    def _build_dirichlet_mask(self) -> np.ndarray:
        mask = np.zeros(self.dof_count, dtype=bool)
        if self.dirichlet_tags:
            nodes = self.nodes_on_tags(self.dirichlet_tags)
            if self.components == 1:
                mask[nodes] = True
            else:
                mask[2 * nodes] = True
                mask[2 * nodes + 1] = True
        for tag, comp in self.component_tags.items():
            nodes = self.nodes_on_tags((tag,))
            if self.components == 1:
                mask[nodes] = True
            else:
                mask[2 * nodes + comp] = True
        return mask

    # cached per-quadrature basis tables -----------------------------------
    def tables(self, qdeg: int):
        """(rule, values (nq, nb), physical gradients (nt, nq, nb, 2))."""
        key = qdeg
        if key not in self._tables:
            rule = quadrature("triangle", qdeg)
            vals, ref_grads = reference_basis(
                "p2_scalar" if self.degree == 2 else "p1_scalar", _tri_ref_points(rule)
            )
            inv_j = _geometry(self.mesh)["inv_j"]
            grads = np.einsum("eji,qbj->eqbi", inv_j, ref_grads)
            self._tables[key] = (rule, vals, grads)
        return self._tables[key]

    def quad_points(self, qdeg: int) -> np.ndarray:
        """Physical quadrature points, shape (nt, nq, 2)."""
        key = ("pts", qdeg)
        if key not in self._tables:
            rule, _, _ = self.tables(qdeg)
            geom = _geometry(self.mesh)
            ref = _tri_ref_points(rule)
            self._tables[key] = geom["origin"][:, None, :] + np.einsum(
                "eij,qj->eqi", geom["jac"], ref)
        return self._tables[key]


def _geometry(mesh: Mesh2D):
    cache = mesh.__dict__.setdefault("_fem_geometry", {})
    if not cache:
        p = mesh.vertices[mesh.triangles]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv_j = np.empty_like(jac)
        inv_j[:, 0, 0] = jac[:, 1, 1]
        inv_j[:, 0, 1] = -jac[:, 0, 1]
        inv_j[:, 1, 0] = -jac[:, 1, 0]
        inv_j[:, 1, 1] = jac[:, 0, 0]
        inv_j /= det[:, None, None]
        cache.update(jac=jac, det=det, adet=np.abs(det), inv_j=inv_j, origin=p[:, 0])
    return cache


def _scatter(rows, cols, elem, shape) -> sp.csr_array:
    mat = sp.coo_array(
        (elem.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()
    mat.sum_duplicates()
    return mat


def _expand_vector(elem_scalar_block):
    """Lift a (nt, nb, nc, 2, 2) component block to interleaved vector dofs."""
    nt, nb, nc = elem_scalar_block.shape[:3]
    out = np.zeros((nt, 2 * nb, 2 * nc))
    for i in range(2):
        for j in range(2):
            out[:, i::2, j::2] = elem_scalar_block[..., i, j]
    return out


# ---------------------------------------------------------------------------
# volume forms
# ---------------------------------------------------------------------------

def _volume_qdeg(trial: FeSpace, test: FeSpace) -> int:
    return min(6, trial.degree + test.degree + 2)


def mass_matrix(trial: FeSpace, test: FeSpace, coefficient=1.0) -> sp.csr_array:
    """(c u, w); mixed element kinds allowed, vector mass if both are vector."""
    _check_same_mesh(trial, test)
    qdeg = _volume_qdeg(trial, test)
    rule, v_trial, _ = trial.tables(qdeg)
    _, v_test, _ = test.tables(qdeg)
    adet = _geometry(trial.mesh)["adet"]
    base = np.einsum("q,qb,qc->bc", rule.weights, v_test, v_trial)
    elem = coefficient * adet[:, None, None] * base
    if trial.components == 2 and test.components == 2:
        blk = np.zeros((elem.shape[0], elem.shape[1], elem.shape[2], 2, 2))
        blk[..., 0, 0] = elem
        blk[..., 1, 1] = elem
        elem = _expand_vector(blk)
    elif trial.components != test.components:
        raise FemError("mass form requires matching component counts")
    return _scatter(
        np.repeat(test.cell_dofs[:, :, None], elem.shape[2], axis=2),
        np.repeat(trial.cell_dofs[:, None, :], elem.shape[1], axis=1),
        elem,
        (test.dof_count, trial.dof_count),
    )


def grad_stiffness(trial: FeSpace, test: FeSpace, coefficient=1.0) -> sp.csr_array:
    """(C grad u, grad w) for scalar spaces; C is a scalar or a 2x2 tensor."""
    _check_same_mesh(trial, test)
    if trial.components != 1 or test.components != 1:
        raise FemError("grad stiffness is a scalar-field form")
    coef = np.asarray(coefficient, dtype=float)
    if coef.ndim == 0:
        coef = coef * np.eye(2)
    qdeg = _volume_qdeg(trial, test)
    rule, _, g_trial = trial.tables(qdeg)
    _, _, g_test = test.tables(qdeg)
    adet = _geometry(trial.mesh)["adet"]
    elem = np.einsum("q,eqbi,ij,eqcj,e->ebc", rule.weights, g_test, coef, g_trial, adet)
    return _scatter(
        np.repeat(test.cell_dofs[:, :, None], elem.shape[2], axis=2),
        np.repeat(trial.cell_dofs[:, None, :], elem.shape[1], axis=1),
        elem,
        (test.dof_count, trial.dof_count),
    )


def eps_stiffness(space: FeSpace, coefficient=1.0) -> sp.csr_array:
    """(c eps(u), eps(w)) on one vector space, eps the symmetric gradient."""
    if space.components != 2:
        raise FemError("symmetric-gradient form needs a vector space")
    qdeg = min(6, 2 * space.degree + 2)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    w = rule.weights
    dot = np.einsum("q,eqbk,eqck->ebc", w, g, g)
    cross = np.einsum("q,eqbj,eqci->ebcij", w, g, g)
    blk = 0.5 * cross
    blk[..., 0, 0] += 0.5 * dot
    blk[..., 1, 1] += 0.5 * dot
    elem = coefficient * adet[:, None, None] * _expand_vector(blk)
    n = elem.shape[1]
    return _scatter(
        np.repeat(space.cell_dofs[:, :, None], n, axis=2),
        np.repeat(space.cell_dofs[:, None, :], n, axis=1),
        elem,
        (space.dof_count, space.dof_count),
    )


def divergence_matrix(trial_vec: FeSpace, test_scalar: FeSpace, coefficient=1.0) -> sp.csr_array:
    """(c div u, q): rows in the scalar test space, columns in the vector space."""
    _check_same_mesh(trial_vec, test_scalar)
    if trial_vec.components != 2 or test_scalar.components != 1:
        raise FemError("divergence form needs vector trial and scalar test spaces")
    qdeg = _volume_qdeg(trial_vec, test_scalar)
    rule, v_test, _ = test_scalar.tables(qdeg)
    _, _, g_trial = trial_vec.tables(qdeg)
    adet = _geometry(trial_vec.mesh)["adet"]
    comp = np.einsum("q,qb,eqcj,e->ebcj", rule.weights, v_test, g_trial, adet)
    nt, nb, nc = comp.shape[:3]
    elem = np.empty((nt, nb, 2 * nc))
    elem[:, :, 0::2] = comp[..., 0]
    elem[:, :, 1::2] = comp[..., 1]
    elem *= coefficient
    return _scatter(
        np.repeat(test_scalar.cell_dofs[:, :, None], 2 * nc, axis=2),
        np.repeat(trial_vec.cell_dofs[:, None, :], nb, axis=1),
        elem,
        (test_scalar.dof_count, trial_vec.dof_count),
    )


def divdiv_matrix(space: FeSpace, coefficient=1.0) -> sp.csr_array:
    """(c div u, div w) on one vector space."""
    if space.components != 2:
        raise FemError("div-div form needs a vector space")
    qdeg = min(6, 2 * space.degree + 2)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    blk = np.einsum("q,eqbi,eqcj->ebcij", rule.weights, g, g)
    elem = coefficient * adet[:, None, None] * _expand_vector(blk)
    n = elem.shape[1]
    return _scatter(
        np.repeat(space.cell_dofs[:, :, None], n, axis=2),
        np.repeat(space.cell_dofs[:, None, :], n, axis=1),
        elem,
        (space.dof_count, space.dof_count),
    )


def load_vector(space: FeSpace, fn, t=0.0, qdeg=None) -> np.ndarray:
    """Volume load (f(t, x), w); ``fn(t, xy)`` maps (n, 2) points to values."""
    qdeg = qdeg if qdeg is not None else min(6, 2 * space.degree + 2)
    rule, vals, _ = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    pts = space.quad_points(qdeg)
    nt, nq = pts.shape[:2]
    fvals = np.asarray(fn(t, pts.reshape(-1, 2)), dtype=float)
    out = np.zeros(space.dof_count)
    if space.components == 1:
        fvals = fvals.reshape(nt, nq)
        elem = np.einsum("q,eq,qb,e->eb", rule.weights, fvals, vals, adet)
        np.add.at(out, space.cell_dofs, elem)
    else:
        fvals = fvals.reshape(nt, nq, 2)
        comp = np.einsum("q,eqi,qb,e->ebi", rule.weights, fvals, vals, adet)
        elem = np.empty((nt, 2 * vals.shape[1]))
        elem[:, 0::2] = comp[..., 0]
        elem[:, 1::2] = comp[..., 1]
        np.add.at(out, space.cell_dofs, elem)
    return out


def gravity_load(space: FeSpace, tensor, gvec) -> np.ndarray:
    """(C g, grad psi) for a scalar space: constant tensor C times vector g."""
    if space.components != 1:
        raise FemError("gravity load acts on a scalar space")
    flux = np.asarray(tensor, dtype=float)
    if flux.ndim == 0:
        flux = flux * np.eye(2)
    vec = flux @ np.asarray(gvec, dtype=float)
    qdeg = min(6, 2 * space.degree)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    elem = np.einsum("q,eqbi,i,e->eb", rule.weights, g, vec, adet)
    out = np.zeros(space.dof_count)
    np.add.at(out, space.cell_dofs, elem)
    return out


def grad_load_vector(space: FeSpace, fn, t=0.0, tensor=1.0, qdeg=None) -> np.ndarray:
    """(C f(t, x), grad psi) for a scalar space and vector-valued data ``fn``."""
    if space.components != 1:
        raise FemError("gradient load acts on a scalar space")
    flux = np.asarray(tensor, dtype=float)
    if flux.ndim == 0:
        flux = flux * np.eye(2)
    qdeg = qdeg if qdeg is not None else min(6, 2 * space.degree + 2)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    pts = space.quad_points(qdeg)
    nt, nq = pts.shape[:2]
    fvals = np.asarray(fn(t, pts.reshape(-1, 2)), dtype=float).reshape(nt, nq, 2)
    elem = np.einsum("q,eqbi,ij,eqj,e->eb", rule.weights, g, flux, fvals, adet)
    out = np.zeros(space.dof_count)
    np.add.at(out, space.cell_dofs, elem)
    return out


def eps_load_vector(space: FeSpace, grad_fn, t=0.0, factor=1.0, qdeg=None) -> np.ndarray:
    """(c E(t, x), eps(w)) for a vector space; ``grad_fn`` returns (n, 2, 2)
    gradients whose symmetric part is integrated against the test strains."""
    if space.components != 2:
        raise FemError("strain load acts on a vector space")
    qdeg = qdeg if qdeg is not None else min(6, 2 * space.degree + 2)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    pts = space.quad_points(qdeg)
    nt, nq = pts.shape[:2]
    gv = np.asarray(grad_fn(t, pts.reshape(-1, 2)), dtype=float).reshape(nt, nq, 2, 2)
    strain = 0.5 * (gv + np.swapaxes(gv, 2, 3))
    # eps(phi_b e_c) : E = sum_l d_l(phi_b) E[c, l] for symmetric E
    comp = np.einsum("q,eqbl,eqcl,e->ebc", rule.weights, g, strain, adet)
    elem = np.empty((nt, 2 * comp.shape[1]))
    elem[:, 0::2] = factor * comp[..., 0]
    elem[:, 1::2] = factor * comp[..., 1]
    out = np.zeros(space.dof_count)
    np.add.at(out, space.cell_dofs, elem)
    return out


def div_load_vector(space: FeSpace, fn, t=0.0, qdeg=None) -> np.ndarray:
    """(f(t, x), div w) for a vector space and scalar data ``fn``."""
    if space.components != 2:
        raise FemError("divergence load acts on a vector space")
    qdeg = qdeg if qdeg is not None else min(6, 2 * space.degree + 2)
    rule, _, g = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    pts = space.quad_points(qdeg)
    nt, nq = pts.shape[:2]
    fv = np.asarray(fn(t, pts.reshape(-1, 2)), dtype=float).reshape(nt, nq)
    comp = np.einsum("q,eq,eqbj,e->ebj", rule.weights, fv, g, adet)
    elem = np.empty((nt, 2 * comp.shape[1]))
    elem[:, 0::2] = comp[..., 0]
    elem[:, 1::2] = comp[..., 1]
    out = np.zeros(space.dof_count)
    np.add.at(out, space.cell_dofs, elem)
    return out


def dirichlet_values(space: FeSpace, fn, t: float) -> np.ndarray:
    """Lift data of the space's constrained dofs at time ``t``.

    ``fn(t, xy)`` returns per-point values ((n,) scalar or (n, 2) vector);
    vector spaces pick the component each interleaved dof belongs to.
    """
    dofs = space.dirichlet_dofs
    if fn is None or len(dofs) == 0:
        return np.zeros(len(dofs))
    vals = np.asarray(fn(t, space.dof_coords[dofs]), dtype=float)
    if space.components == 2 and vals.ndim == 2:
        vals = vals[np.arange(len(dofs)), dofs % 2]
    return vals


def _check_same_mesh(a: FeSpace, b: FeSpace):
    if a.mesh is not b.mesh:
        raise FemError("volume forms need trial and test spaces on one mesh")


# ---------------------------------------------------------------------------
# boundary and interface forms
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EdgeBlock:
    """Ordered set of mesh edges prepared for trace integration."""

    mesh: Mesh2D
    elems: np.ndarray
    v_start: np.ndarray
    v_end: np.ndarray
    lengths: np.ndarray
    normals: np.ndarray  # per-edge outward unit normals

    @classmethod
    def from_tags(cls, mesh: Mesh2D, tags) -> "EdgeBlock":
        pos = mesh.boundary_edges_of(tags)
        eids = mesh.boundary_edges[pos]
        ab = mesh.edges[eids]
        lengths = np.linalg.norm(mesh.vertices[ab[:, 1]] - mesh.vertices[ab[:, 0]], axis=1)
        normals = np.array([mesh.edge_outward_normal(p) for p in pos]) if len(pos) else np.zeros((0, 2))
        return cls(mesh=mesh, elems=mesh.boundary_tri[pos], v_start=ab[:, 0],
                   v_end=ab[:, 1], lengths=lengths, normals=normals)

    @classmethod
    def from_side(cls, side: InterfaceSide) -> "EdgeBlock":
        n = np.broadcast_to(side.normal, (len(side.elems), 2))
        return cls(mesh=side.mesh, elems=side.elems, v_start=side.v_start,
                   v_end=side.v_end, lengths=side.lengths, normals=n.copy())

    @property
    def n_edges(self) -> int:
        return len(self.elems)


def _edge_scalar_tables(space: FeSpace, block: EdgeBlock, rule: QuadratureRule):
    """Scalar basis values along each edge, shape (ne, nq, nb)."""
    tris = space.mesh.triangles[block.elems]
    la = np.argmax(tris == block.v_start[:, None], axis=1)
    lb = np.argmax(tris == block.v_end[:, None], axis=1)
    s = rule.points
    kind = "p2_scalar" if space.degree == 2 else "p1_scalar"
    # 6 (la, lb) patterns; evaluate each once and gather
    patterns = {}
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            lam = np.zeros((len(s), 3))
            lam[:, i] = 1.0 - s
            lam[:, j] = s
            vals, _ = reference_basis(kind, lam[:, 1:])
            patterns[(i, j)] = vals
    table = np.empty((block.n_edges, len(s), LOCAL_SIZE[kind]))
    for k in range(block.n_edges):
        table[k] = patterns[(la[k], lb[k])]
    return table


def _trace_table(space: FeSpace, block: EdgeBlock, rule: QuadratureRule, trace):
    """Trace-function table (ne, nq, nloc) for a given trace kind.

    ``trace`` is ``"scalar"``, or a pair ``("normal" | "tangent", vec)`` where
    ``vec=None`` uses the per-edge outward normal (or its 90-degree rotation).
    An explicit constant vector overrides, which fixes the sign convention on
    interfaces.
    """
    scal = _edge_scalar_tables(space, block, rule)
    if trace == "scalar":
        if space.components != 1:
            raise FemError("scalar trace of a vector space")
        return scal
    kind, vec = trace
    if space.components != 2:
        raise FemError("component trace needs a vector space")
    if vec is None:
        vecs = block.normals if kind == "normal" else np.column_stack(
            [-block.normals[:, 1], block.normals[:, 0]]
        )
    else:
        vecs = np.broadcast_to(np.asarray(vec, dtype=float), (block.n_edges, 2))
    ne, nq, nb = scal.shape
    out = np.empty((ne, nq, 2 * nb))
    out[:, :, 0::2] = scal * vecs[:, None, 0, None]
    out[:, :, 1::2] = scal * vecs[:, None, 1, None]
    return out


def edge_product_matrix(test: FeSpace, test_trace, trial: FeSpace, trial_trace,
                        test_block: EdgeBlock, trial_block: EdgeBlock | None = None,
                        coefficient=1.0, qdeg=6) -> sp.csr_array:
    """Assemble ``<T_trial(u), T_test(w)>`` over an ordered edge set.

    The test and trial blocks must traverse identical physical edges in the
    same order (the single-mesh case passes the same block twice).  Rows
    belong to the test space, columns to the trial space; the two spaces may
    live on different meshes with a matching interface.
    """
    if trial_block is None:
        trial_block = test_block
    if test_block.n_edges != trial_block.n_edges:
        raise FemError("edge blocks differ in length")
    rule = quadrature("edge", qdeg)
    t_test = _trace_table(test, test_block, rule, test_trace)
    t_trial = _trace_table(trial, trial_block, rule, trial_trace)
    elem = coefficient * np.einsum(
        "q,eqr,eqc,e->erc", rule.weights, t_test, t_trial, test_block.lengths
    )
    rows = test.cell_dofs[test_block.elems]
    cols = trial.cell_dofs[trial_block.elems]
    return _scatter(
        np.repeat(rows[:, :, None], elem.shape[2], axis=2),
        np.repeat(cols[:, None, :], elem.shape[1], axis=1),
        elem,
        (test.dof_count, trial.dof_count),
    )


def edge_load_vector(space: FeSpace, trace, block: EdgeBlock, fn, t=0.0, qdeg=6) -> np.ndarray:
    """Boundary load ``<g(t, x), T(w)>`` over an edge block.

    For ``trace="vector"`` the data is a full traction vector paired with w
    itself; otherwise ``fn`` returns scalars paired with the named trace.
    """
    rule = quadrature("edge", qdeg)
    a = space.mesh.vertices[block.v_start]
    b = space.mesh.vertices[block.v_end]
    pts = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    ne, nq = pts.shape[:2]
    gvals = np.asarray(fn(t, pts.reshape(-1, 2)), dtype=float)
    out = np.zeros(space.dof_count)
    if trace == "vector":
        scal = _edge_scalar_tables(space, block, rule)
        gvals = gvals.reshape(ne, nq, 2)
        comp = np.einsum("q,eqi,eqb,e->ebi", rule.weights, gvals, scal, block.lengths)
        elem = np.empty((ne, 2 * scal.shape[2]))
        elem[:, 0::2] = comp[..., 0]
        elem[:, 1::2] = comp[..., 1]
    else:
        table = _trace_table(space, block, rule, trace)
        gvals = gvals.reshape(ne, nq)
        elem = np.einsum("q,eq,eqr,e->er", rule.weights, gvals, table, block.lengths)
    np.add.at(out, space.cell_dofs[block.elems], elem)
    return out


# ---------------------------------------------------------------------------
# essential conditions
# ---------------------------------------------------------------------------

def eliminate_dofs(a: sp.csr_array, dofs: np.ndarray):
    """Symmetric elimination of the given dofs.

    Returns ``(a_elim, a_couple)``: the matrix with constrained rows/columns
    replaced by identity rows, and the original coupling columns
    ``a[:, dofs]`` used to move known values to the right-hand side.
    """
    n = a.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    couple = sp.csr_array(a[:, dofs])
    keep = np.ones(n, dtype=bool)
    keep[dofs] = False
    coo = a.tocoo()
    sel = keep[coo.row] & keep[coo.col]
    elim = sp.coo_array(
        (np.concatenate([coo.data[sel], np.ones(len(dofs))]),
         (np.concatenate([coo.row[sel], dofs]),
          np.concatenate([coo.col[sel], dofs]))),
        shape=a.shape,
    ).tocsr()
    elim.sum_duplicates()
    return elim, couple


def constrain_rhs(b: np.ndarray, couple: sp.csr_array, dofs: np.ndarray,
                  values: np.ndarray) -> np.ndarray:
    """Right-hand side matching :func:`eliminate_dofs` for given lift values."""
    out = b - couple @ values
    out[dofs] = values
    return out


def apply_dirichlet(a: sp.csr_array, b: np.ndarray, space: FeSpace, lift):
    """Impose the space's essential conditions on an assembled system.

    ``lift`` maps dof coordinates (n, 2) to boundary values; constrained rows
    become identity rows with the lift value on the right-hand side, and the
    constrained columns are eliminated symmetrically.
    """
    dofs = space.dirichlet_dofs
    if callable(lift):
        values = np.asarray(lift(space.dof_coords[dofs]), dtype=float)
    else:
        values = np.broadcast_to(np.asarray(lift, dtype=float), dofs.shape).copy()
    elim, couple = eliminate_dofs(a, dofs)
    return elim, constrain_rhs(b, couple, dofs, values)


# ---------------------------------------------------------------------------
# named form dispatch
# ---------------------------------------------------------------------------

class FormKind(Enum):
    MASS = "mass"
    STIFFNESS_GRAD = "stiffness_grad"
    STIFFNESS_EPS = "stiffness_eps"
    DIVERGENCE = "divergence"
    DIVDIV = "divdiv"
    PERMEABILITY_STIFFNESS = "permeability_stiffness"
    BOUNDARY_MASS_NORMAL = "boundary_mass_normal"
    BOUNDARY_MASS_TANGENT = "boundary_mass_tangent"
    BOUNDARY_MASS_SCALAR = "boundary_mass_scalar"
    INTERFACE_NORMAL_SCALAR = "interface_normal_scalar"
    INTERFACE_TANGENT_TANGENT = "interface_tangent_tangent"


def _side_vectors(pairing: InterfacePairing, mesh: Mesh2D):
    if mesh is pairing.fluid.mesh:
        return pairing.n_f, pairing.tau
    if mesh is pairing.poro.mesh:
        return pairing.n_p, pairing.tau_p
    raise FemError("space does not live on either side of the pairing")


def assemble(form: FormKind, trial: FeSpace, test: FeSpace, coefficient=1.0,
             where=None) -> sp.csr_array:
    """Assemble a named bilinear form.

    ``where`` selects the locus of boundary/interface forms: a tag name (or
    tuple of tags) for single-mesh boundary forms, or an
    :class:`~fpsi.mesh.InterfacePairing` for interface forms, whose side and
    orientation vectors are inferred from each space's mesh.
    """
    form = FormKind(form)
    if form is FormKind.MASS:
        return mass_matrix(trial, test, coefficient)
    if form in (FormKind.STIFFNESS_GRAD, FormKind.PERMEABILITY_STIFFNESS):
        return grad_stiffness(trial, test, coefficient)
    if form is FormKind.STIFFNESS_EPS:
        _require(trial is test, "symmetric-gradient form uses one space")
        return eps_stiffness(trial, coefficient)
    if form is FormKind.DIVERGENCE:
        return divergence_matrix(trial, test, coefficient)
    if form is FormKind.DIVDIV:
        _require(trial is test, "div-div form uses one space")
        return divdiv_matrix(trial, coefficient)

    if where is None:
        raise FemError(f"{form.value} needs a boundary tag or interface pairing")

    if isinstance(where, InterfacePairing):
        blk_test = EdgeBlock.from_side(where.side_of(test.mesh))
        blk_trial = EdgeBlock.from_side(where.side_of(trial.mesh))
        n_test, t_test = _side_vectors(where, test.mesh)
        n_trial, t_trial = _side_vectors(where, trial.mesh)
    else:
        _check_same_mesh(trial, test)
        blk_test = blk_trial = EdgeBlock.from_tags(test.mesh, where)
        n_test = t_test = n_trial = t_trial = None  # per-edge vectors

    if form is FormKind.BOUNDARY_MASS_NORMAL:
        tr = ("normal", n_trial), ("normal", n_test)
    elif form is FormKind.BOUNDARY_MASS_TANGENT:
        tr = ("tangent", t_trial), ("tangent", t_test)
    elif form is FormKind.BOUNDARY_MASS_SCALAR:
        tr = "scalar", "scalar"
    elif form is FormKind.INTERFACE_NORMAL_SCALAR:
        tr = "scalar", ("normal", n_test)
    elif form is FormKind.INTERFACE_TANGENT_TANGENT:
        tr = ("tangent", t_trial), ("tangent", t_test)
    else:  # pragma: no cover
        raise FemError(f"unhandled form {form}")
    trial_trace, test_trace = tr
    return edge_product_matrix(
        test, test_trace, trial, trial_trace, blk_test, blk_trial,
        coefficient=coefficient,
        qdeg=min(6, trial.degree + test.degree + 2),
    )


def assemble_vector(form: str, space: FeSpace, data, t=0.0, where=None,
                    pairing: InterfacePairing | None = None) -> np.ndarray:
    """Assemble a named load functional.

    ``form`` is one of ``volume_load``, ``boundary_load_normal``,
    ``boundary_load_tangent``, ``boundary_load_scalar``; boundary loads act on
    the edges named by ``where`` (tag or pairing).
    """
    if form == "volume_load":
        return load_vector(space, data, t)
    if isinstance(where, InterfacePairing):
        block = EdgeBlock.from_side(where.side_of(space.mesh))
        nvec, tvec = _side_vectors(where, space.mesh)
    else:
        block = EdgeBlock.from_tags(space.mesh, where)
        nvec = tvec = None
    trace = {
        "boundary_load_normal": ("normal", nvec),
        "boundary_load_tangent": ("tangent", tvec),
        "boundary_load_scalar": "scalar",
    }.get(form)
    if trace is None:
        raise FemError(f"unknown load functional {form!r}")
    return edge_load_vector(space, trace, block, data, t)


def _require(cond: bool, msg: str):
    if not cond:
        raise FemError(msg)


# ---------------------------------------------------------------------------
# field evaluation (for error norms and oracles)
# ---------------------------------------------------------------------------

def eval_at_quad(space: FeSpace, coeffs: np.ndarray, qdeg: int):
    """Values and gradients of a discrete field at volume quadrature points.

    Returns ``(points, weights, values, gradients)`` where weights already
    include the element Jacobians; scalar fields give values (nt, nq) and
    gradients (nt, nq, 2), vector fields (nt, nq, 2) and (nt, nq, 2, 2) with
    ``gradients[..., i, j]`` holding d(comp i)/d(x_j).
    """
    rule, vals, grads = space.tables(qdeg)
    adet = _geometry(space.mesh)["adet"]
    pts = space.quad_points(qdeg)
    w = rule.weights[None, :] * adet[:, None]
    if space.components == 1:
        local = coeffs[space.cell_dofs]
        return pts, w, np.einsum("eb,qb->eq", local, vals), np.einsum(
            "eb,eqbj->eqj", local, grads
        )
    cx = coeffs[space.cell_dofs[:, 0::2]]
    cy = coeffs[space.cell_dofs[:, 1::2]]
    values = np.stack(
        [np.einsum("eb,qb->eq", cx, vals), np.einsum("eb,qb->eq", cy, vals)], axis=-1
    )
    gradients = np.stack(
        [np.einsum("eb,eqbj->eqj", cx, grads), np.einsum("eb,eqbj->eqj", cy, grads)],
        axis=-2,
    )
    return pts, w, values, gradients
