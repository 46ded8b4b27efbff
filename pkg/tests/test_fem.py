import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from fpsi import fem
from fpsi.fem import (
    EdgeBlock,
    FemError,
    FeSpace,
    FormKind,
    apply_dirichlet,
    assemble,
    assemble_vector,
    quadrature,
    reference_basis,
)
from fpsi.mesh import Mesh2D, build_rect_mesh, pair_interface
from fpsi.mesh import _edge_table

ALL_EXT = {"left": "external", "right": "external", "bottom": "external", "top": "external"}


def single_triangle_mesh():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    edges, tri_edges = _edge_table(tris)
    return Mesh2D(
        vertices=verts,
        triangles=tris,
        edges=edges,
        tri_edges=tri_edges,
        boundary_edges=np.arange(len(edges)),
        boundary_tri=np.zeros(len(edges), dtype=np.int64),
        boundary_local=np.array([np.where((tri_edges[0] == e))[0][0] for e in range(len(edges))]),
        boundary_tag=np.array(["external"] * len(edges)),
        h_max=math.sqrt(2.0),
    )


def tri_monomial(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class Poly2:
    """Sparse bivariate polynomial used as an independent integration oracle."""

    def __init__(self, coeffs):
        self.c = dict(coeffs)

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts))
        for (a, b), v in self.c.items():
            out += v * pts[:, 0] ** a * pts[:, 1] ** b
        return out

    def diff(self, axis):
        out = {}
        for (a, b), v in self.c.items():
            if axis == 0 and a > 0:
                out[(a - 1, b)] = out.get((a - 1, b), 0.0) + a * v
            if axis == 1 and b > 0:
                out[(a, b - 1)] = out.get((a, b - 1), 0.0) + b * v
        return Poly2(out)

    def __mul__(self, other):
        out = {}
        for (a1, b1), v1 in self.c.items():
            for (a2, b2), v2 in other.c.items():
                k = (a1 + a2, b1 + b2)
                out[k] = out.get(k, 0.0) + v1 * v2
        return Poly2(out)

    def __add__(self, other):
        out = dict(self.c)
        for k, v in other.c.items():
            out[k] = out.get(k, 0.0) + v
        return Poly2(out)

    def integral_ref_triangle(self):
        return sum(v * tri_monomial(a, b) for (a, b), v in self.c.items())


# --------------------------------------------------------------------------
# reference bases
# --------------------------------------------------------------------------

def test_p1_lagrange_property():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    vals, _ = reference_basis("p1_scalar", nodes)
    assert np.allclose(vals, np.eye(3))


def test_p1_partition_of_unity():
    rng = np.random.default_rng(0)
    pts = rng.random((20, 2)) * 0.5
    vals, grads = reference_basis("p1_scalar", pts)
    assert np.allclose(vals.sum(axis=1), 1.0)
    assert np.allclose(grads.sum(axis=1), 0.0)


def test_p2_nodal_values():
    # vertex basis vanishes at the opposite edge midpoint, midpoint basis is 1
    # at its own node; evaluates lam_i (2 lam_i - 1) and 4 lam_i lam_j
    nodes = np.array([
        [0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
        [0.5, 0.0], [0.5, 0.5], [0.0, 0.5],
    ])
    vals, _ = reference_basis("p2_scalar", nodes)
    assert np.allclose(vals, np.eye(6), atol=1e-14)
    assert np.allclose(vals.sum(axis=1), 1.0)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6])
def test_triangle_weights_sum_to_reference_area(degree):
    rule = quadrature("triangle", degree)
    assert abs(rule.weights.sum() - 0.5) < 1e-14
    assert np.all(rule.weights > 0)


def test_linear_monomial_degree2_rule():
    rule = quadrature("triangle", 2)
    x = rule.points[:, 1]
    assert abs(np.dot(rule.weights, x) - 1.0 / 6.0) < 1e-15


def test_x2y2_degree6_rule():
    rule = quadrature("triangle", 6)
    x, y = rule.points[:, 1], rule.points[:, 2]
    assert abs(np.dot(rule.weights, x**2 * y**2) - 1.0 / 180.0) < 1e-15


@pytest.mark.parametrize("degree", [2, 4, 6])
def test_monomial_exactness_to_declared_degree(degree):
    rule = quadrature("triangle", degree)
    x, y = rule.points[:, 1], rule.points[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.dot(rule.weights, x**a * y**b)
            exact = tri_monomial(a, b)
            assert abs(got - exact) < 1e-12 * max(1.0, abs(exact))


@pytest.mark.parametrize("degree", [1, 3, 6])
def test_edge_rule_exactness(degree):
    rule = quadrature("edge", degree)
    for k in range(degree + 1):
        assert abs(np.dot(rule.weights, rule.points**k) - 1.0 / (k + 1)) < 1e-14


def test_quadrature_rejects_degree():
    with pytest.raises(FemError):
        quadrature("triangle", 7)


# --------------------------------------------------------------------------
# volume assembly against the polynomial oracle
# --------------------------------------------------------------------------

def test_p1_mass_single_triangle_entries():
    mesh = single_triangle_mesh()
    s = FeSpace(mesh, "p1_scalar")
    m = assemble(FormKind.MASS, s, s).toarray()
    area = 0.5
    expect = np.full((3, 3), area / 12.0)
    np.fill_diagonal(expect, area / 6.0)
    assert np.allclose(m, expect, rtol=1e-14)


def test_stiffness_row_sums_vanish():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.25, ALL_EXT)
    s = FeSpace(mesh, "p2_scalar")
    a = assemble(FormKind.STIFFNESS_GRAD, s, s)
    assert np.max(np.abs(a @ np.ones(s.dof_count))) < 1e-12


def test_divergence_of_constant_field_vanishes():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.25, ALL_EXT)
    v = FeSpace(mesh, "p2_vector")
    q = FeSpace(mesh, "p1_scalar")
    d = assemble(FormKind.DIVERGENCE, v, q)
    const = np.tile([1.7, -0.3], v.dof_count // 2)
    assert np.max(np.abs(d @ const)) < 1e-13


def test_symmetry_and_definiteness():
    mesh = build_rect_mesh((0, 1, 0, 1), 1 / 3, ALL_EXT)
    s2 = FeSpace(mesh, "p2_scalar")
    v = FeSpace(mesh, "p2_vector")
    m = assemble(FormKind.MASS, s2, s2).toarray()
    a = assemble(FormKind.STIFFNESS_GRAD, s2, s2).toarray()
    e = assemble(FormKind.STIFFNESS_EPS, v, v).toarray()
    for mat in (m, a, e):
        assert np.max(np.abs(mat - mat.T)) <= 1e-14 * np.max(np.abs(mat))
    assert np.all(np.linalg.eigvalsh(m) > 0)
    assert np.min(np.linalg.eigvalsh(a)) > -1e-12
    assert np.min(np.linalg.eigvalsh(e)) > -1e-12


def test_rigid_motions_have_no_strain_energy():
    mesh = build_rect_mesh((0, 2, -1, 1), 0.5, ALL_EXT)
    v = FeSpace(mesh, "p2_vector")
    e = assemble(FormKind.STIFFNESS_EPS, v, v)
    coords = v.dof_coords
    tx = np.tile([1.0, 0.0], v.dof_count // 2)
    ty = np.tile([0.0, 1.0], v.dof_count // 2)
    rot = np.empty(v.dof_count)
    rot[0::2] = -coords[0::2, 1]
    rot[1::2] = coords[1::2, 0]
    for u in (tx, ty, rot):
        assert abs(u @ (e @ u)) < 1e-12


def _interp_scalar(space, poly):
    return poly(space.dof_coords)


def _interp_vector(space, px, py):
    out = np.empty(space.dof_count)
    out[0::2] = px(space.dof_coords[0::2])
    out[1::2] = py(space.dof_coords[1::2])
    return out


def test_quadratic_forms_match_symbolic_integrals():
    # degree-2 fields lie in the P2 space, so assembled forms must reproduce
    # the polynomial integrals exactly (up to roundoff)
    mesh = single_triangle_mesh()
    s = FeSpace(mesh, "p2_scalar")
    v = FeSpace(mesh, "p2_vector")
    q = FeSpace(mesh, "p1_scalar")
    rng = np.random.default_rng(42)

    for _ in range(4):
        cp = {(a, b): rng.normal() for a in range(3) for b in range(3 - a)}
        cu = {(a, b): rng.normal() for a in range(3) for b in range(3 - a)}
        p_poly, u_poly = Poly2(cp), Poly2(cu)
        ph = _interp_scalar(s, p_poly)
        uh = _interp_scalar(s, u_poly)

        m = assemble(FormKind.MASS, s, s)
        exact = (p_poly * u_poly).integral_ref_triangle()
        assert abs(uh @ (m @ ph) - exact) < 1e-12 * max(1.0, abs(exact))

        a = assemble(FormKind.STIFFNESS_GRAD, s, s)
        exact = (
            p_poly.diff(0) * u_poly.diff(0) + p_poly.diff(1) * u_poly.diff(1)
        ).integral_ref_triangle()
        assert abs(uh @ (a @ ph) - exact) < 1e-12 * max(1.0, abs(exact))

        # anisotropic coefficient
        kt = np.array([[2.0, 0.5], [0.5, 1.0]])
        ak = assemble(FormKind.PERMEABILITY_STIFFNESS, s, s, coefficient=kt)
        gp = [p_poly.diff(0), p_poly.diff(1)]
        gu = [u_poly.diff(0), u_poly.diff(1)]
        exact = sum(
            (gp[j] * gu[i]).integral_ref_triangle() * kt[i, j]
            for i in range(2) for j in range(2)
        )
        assert abs(uh @ (ak @ ph) - exact) < 1e-12 * max(1.0, abs(exact))

    # vector forms
    polys = [Poly2({(a, b): rng.normal() for a in range(3) for b in range(3 - a)})
             for _ in range(4)]
    ux, uy, wx, wy = polys
    uvec = _interp_vector(v, ux, uy)
    wvec = _interp_vector(v, wx, wy)

    def eps(px, py):
        return [
            [px.diff(0), (px.diff(1) + py.diff(0)) * Poly2({(0, 0): 0.5})],
            [(px.diff(1) + py.diff(0)) * Poly2({(0, 0): 0.5}), py.diff(1)],
        ]

    e = assemble(FormKind.STIFFNESS_EPS, v, v)
    eu, ew = eps(ux, uy), eps(wx, wy)
    exact = sum((eu[i][j] * ew[i][j]).integral_ref_triangle() for i in range(2) for j in range(2))
    assert abs(wvec @ (e @ uvec) - exact) < 1e-12 * max(1.0, abs(exact))

    dd = assemble(FormKind.DIVDIV, v, v)
    exact = ((ux.diff(0) + uy.diff(1)) * (wx.diff(0) + wy.diff(1))).integral_ref_triangle()
    assert abs(wvec @ (dd @ uvec) - exact) < 1e-12 * max(1.0, abs(exact))

    d = assemble(FormKind.DIVERGENCE, v, q)
    qlin = Poly2({(0, 0): 0.3, (1, 0): -1.1, (0, 1): 0.7})
    qh = _interp_scalar(q, qlin)
    exact = ((ux.diff(0) + uy.diff(1)) * qlin).integral_ref_triangle()
    assert abs(qh @ (d @ uvec) - exact) < 1e-12 * max(1.0, abs(exact))


def test_volume_load_zero_and_polynomial():
    mesh = single_triangle_mesh()
    s = FeSpace(mesh, "p2_scalar")
    b = assemble_vector("volume_load", s, lambda t, x: np.zeros(len(x)))
    assert np.all(b == 0.0)
    # (f, 1) = integral of f
    f = Poly2({(1, 1): 3.0, (2, 0): -1.0})
    b = assemble_vector("volume_load", s, lambda t, x: f(x))
    assert abs(b.sum() - f.integral_ref_triangle()) < 1e-13


# --------------------------------------------------------------------------
# boundary and interface forms
# --------------------------------------------------------------------------

def _two_domain(h):
    tags_f = {"left": "dirichlet_velocity", "right": "dirichlet_velocity",
              "top": "dirichlet_velocity", "bottom": "interface"}
    tags_p = {"left": "dirichlet_velocity", "right": "dirichlet_velocity",
              "top": "interface", "bottom": "dirichlet_velocity"}
    mf = build_rect_mesh((0, 1, 0, 1), h, tags_f)
    mp = build_rect_mesh((0, 1, -1, 0), h, tags_p)
    return mf, mp, pair_interface(mf, mp)


def test_interface_constant_trace_integrals():
    mf, mp, pr = _two_domain(0.25)
    vf = FeSpace(mf, "p2_vector")
    vp = FeSpace(mp, "p2_vector")
    sp_ = FeSpace(mp, "p2_scalar")

    cf = np.tile([0.8, -0.5], vf.dof_count // 2)
    cp = np.tile([-0.2, 0.4], vp.dof_count // 2)
    ones = np.ones(sp_.dof_count)

    bnn = assemble(FormKind.BOUNDARY_MASS_NORMAL, vf, vf, where=pr)
    expect = (np.array([0.8, -0.5]) @ pr.n_f) ** 2 * 1.0
    assert abs(cf @ (bnn @ cf) - expect) < 1e-12

    btt = assemble(FormKind.BOUNDARY_MASS_TANGENT, vp, vp, where=pr)
    expect = (np.array([-0.2, 0.4]) @ pr.tau_p) ** 2 * 1.0
    assert abs(cp @ (btt @ cp) - expect) < 1e-12

    bss = assemble(FormKind.BOUNDARY_MASS_SCALAR, sp_, sp_, where=pr)
    assert abs(ones @ (bss @ ones) - 1.0) < 1e-12

    # cross-domain: <q_poro, w_fluid . n_f>
    ns = assemble(FormKind.INTERFACE_NORMAL_SCALAR, sp_, vf, where=pr)
    expect = (np.array([0.8, -0.5]) @ pr.n_f) * 1.0
    assert abs(cf @ (ns @ ones) - expect) < 1e-12

    # cross-domain tangential: <u_f . tau_f, w_p . tau_p>
    tt = assemble(FormKind.INTERFACE_TANGENT_TANGENT, vf, vp, where=pr)
    expect = (np.array([0.8, -0.5]) @ pr.tau) * (np.array([-0.2, 0.4]) @ pr.tau_p)
    assert abs(cp @ (tt @ cf) - expect) < 1e-12


def test_interface_linear_trace_against_dense_quadrature():
    # nodal values of a non-polynomial trace, integrated against a constant
    mf, mp, pr = _two_domain(0.125)
    sf = FeSpace(mf, "p2_scalar")
    bss = assemble(FormKind.BOUNDARY_MASS_SCALAR, sf, sf, where=pr)
    g = np.zeros(sf.dof_count)
    g[pr.fluid.p2_nodes] = np.sin(2.3 * pr.fluid.node_coords[:, 0])
    ones = np.ones(sf.dof_count)
    got = ones @ (bss @ g)
    # dense 1D quadrature of the piecewise-quadratic interpolant
    xs = np.linspace(0, 1, 2001)
    fine = np.interp(xs, pr.fluid.node_coords[:, 0], np.sin(2.3 * pr.fluid.node_coords[:, 0]))
    # piecewise-quadratic differs from linear interp at O(h^2); integrate the
    # interpolant directly instead via per-edge Gauss rule
    from fpsi.fem import quadrature as quad

    rule = quad("edge", 6)
    total = 0.0
    for e in range(len(pr.fluid.elems)):
        a = mf.vertices[pr.fluid.v_start[e]]
        b = mf.vertices[pr.fluid.v_end[e]]
        x0, x1 = a[0], b[0]
        xm = 0.5 * (x0 + x1)
        va, vb = np.sin(2.3 * x0), np.sin(2.3 * x1)
        vm = np.sin(2.3 * xm)
        s = rule.points
        # quadratic through (0, va), (1/2, vm), (1, vb)
        vals = va * (1 - s) * (1 - 2 * s) + vb * s * (2 * s - 1) + vm * 4 * s * (1 - s)
        total += np.dot(rule.weights, vals) * np.linalg.norm(b - a)
    assert abs(got - total) < 1e-12


def test_boundary_scalar_load_partition_of_unity():
    mf, mp, pr = _two_domain(0.25)
    sf = FeSpace(mf, "p2_scalar")
    b = assemble_vector("boundary_load_scalar", sf, lambda t, x: np.ones(len(x)), where=pr)
    assert abs(b.sum() - 1.0) < 1e-13


def test_boundary_normal_load_constant_trace():
    mf, mp, pr = _two_domain(0.25)
    vf = FeSpace(mf, "p2_vector")
    c = 2.5
    b = assemble_vector(
        "boundary_load_normal", vf, lambda t, x: np.full(len(x), c), where=pr
    )
    w = np.tile([0.3, -1.2], vf.dof_count // 2)
    expect = c * (np.array([0.3, -1.2]) @ pr.n_f) * 1.0
    assert abs(w @ b - expect) < 1e-12


def test_edge_load_vector_traction():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.5, ALL_EXT)
    v = FeSpace(mesh, "p2_vector")
    block = EdgeBlock.from_tags(mesh, "external")
    traction = np.array([0.7, -0.1])
    b = fem.edge_load_vector(v, "vector", block, lambda t, x: np.tile(traction, (len(x), 1)))
    w = np.tile([1.0, 1.0], v.dof_count // 2)
    # <T, w> over the whole boundary (perimeter 4)
    assert abs(w @ b - 4 * traction.sum()) < 1e-12


# --------------------------------------------------------------------------
# essential conditions
# --------------------------------------------------------------------------

def test_apply_dirichlet_zero_lift():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.25, ALL_EXT)
    s = FeSpace(mesh, "p2_scalar", dirichlet_tags=("external",))
    a = assemble(FormKind.STIFFNESS_GRAD, s, s) + assemble(FormKind.MASS, s, s)
    b = assemble_vector("volume_load", s, lambda t, x: np.ones(len(x)))
    a2, b2 = apply_dirichlet(a, b, s, 0.0)
    x = spla.spsolve(a2.tocsc(), b2)
    assert np.max(np.abs(x[s.dirichlet_dofs])) == 0.0


def test_apply_dirichlet_exact_lift_bitwise():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.25, ALL_EXT)
    s = FeSpace(mesh, "p2_scalar", dirichlet_tags=("external",))
    a = assemble(FormKind.STIFFNESS_GRAD, s, s) + assemble(FormKind.MASS, s, s)
    b = np.zeros(s.dof_count)
    lift = lambda xy: np.sin(xy[:, 0]) + xy[:, 1]
    a2, b2 = apply_dirichlet(a, b, s, lift)
    x = spla.spsolve(a2.tocsc(), b2)
    assert np.array_equal(x[s.dirichlet_dofs], lift(s.dof_coords[s.dirichlet_dofs]))


def test_apply_dirichlet_idempotent():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.5, ALL_EXT)
    s = FeSpace(mesh, "p1_scalar", dirichlet_tags=("external",))
    a = assemble(FormKind.STIFFNESS_GRAD, s, s) + assemble(FormKind.MASS, s, s)
    b = np.arange(s.dof_count, dtype=float)
    lift = lambda xy: xy[:, 0]
    a1, b1 = apply_dirichlet(a, b, s, lift)
    a2, b2 = apply_dirichlet(a1, b1, s, lift)
    assert np.array_equal(a1.toarray(), a2.toarray())
    assert np.array_equal(b1, b2)


def test_symmetric_elimination_preserves_symmetry():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.25, ALL_EXT)
    s = FeSpace(mesh, "p2_scalar", dirichlet_tags=("external",))
    a = assemble(FormKind.STIFFNESS_GRAD, s, s)
    a2, _ = apply_dirichlet(a, np.zeros(s.dof_count), s, 1.0)
    d = a2 - a2.T
    assert abs(d).max() <= 1e-14 * abs(a2).max()


def test_component_dirichlet_mask():
    tags = {"left": "external", "right": "external", "bottom": "symmetry", "top": "external"}
    mesh = build_rect_mesh((0, 1, 0, 1), 0.5, tags)
    v = FeSpace(mesh, "p2_vector", component_tags={"symmetry": 1})
    dofs = v.dirichlet_dofs
    assert len(dofs) > 0
    assert np.all(dofs % 2 == 1)  # only y components
    assert np.allclose(v.dof_coords[dofs, 1], 0.0)


def test_dof_counts():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.5, ALL_EXT)
    p1 = FeSpace(mesh, "p1_scalar")
    p2 = FeSpace(mesh, "p2_scalar")
    v2 = FeSpace(mesh, "p2_vector")
    assert p1.dof_count == mesh.n_vertices
    assert p2.dof_count == mesh.n_vertices + mesh.n_edges
    assert v2.dof_count == 2 * p2.dof_count


def test_space_locus_mismatch_rejected():
    mesh = build_rect_mesh((0, 1, 0, 1), 0.5, ALL_EXT)
    mesh2 = build_rect_mesh((0, 1, 0, 1), 0.5, ALL_EXT)
    s1 = FeSpace(mesh, "p1_scalar")
    s2 = FeSpace(mesh2, "p1_scalar")
    with pytest.raises(FemError):
        assemble(FormKind.MASS, s1, s2)
