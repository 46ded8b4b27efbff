import numpy as np
import pytest

from fpsi.mesh import (
    IncompatibleMeshError,
    MeshError,
    build_rect_mesh,
    pair_interface,
)

UNIT_TAGS = {"left": "external", "right": "external", "bottom": "external", "top": "external"}


def test_single_cell_counts():
    m = build_rect_mesh((0, 1, 0, 1), 1.0, UNIT_TAGS)
    assert m.n_vertices == 4
    assert m.n_triangles == 2
    assert len(m.boundary_edges) == 4


@pytest.mark.parametrize("n", [2, 3, 5])
def test_grid_counts(n):
    m = build_rect_mesh((0, 1, 0, 1), 1.0 / n, UNIT_TAGS)
    assert m.n_vertices == (n + 1) ** 2
    assert m.n_triangles == 2 * n * n
    assert len(m.boundary_edges) == 4 * n


def test_bloodflow_lumen_counts():
    m = build_rect_mesh((0, 6, 0, 0.5), 0.05, UNIT_TAGS)
    assert m.n_triangles == 2 * 120 * 10


def test_positive_areas_and_total_area():
    m = build_rect_mesh((0.0, 2.0, -1.0, 0.5), 0.3, UNIT_TAGS)
    areas = m.triangle_areas()
    assert np.all(areas > 0)
    assert abs(areas.sum() - 3.0) <= 1e-12 * 3.0


def test_boundary_edges_unique_owner_and_tag_partition():
    m = build_rect_mesh((0, 1, 0, 1), 0.25, UNIT_TAGS)
    counts = np.bincount(m.tri_edges.ravel(), minlength=m.n_edges)
    assert np.all(counts[m.boundary_edges] == 1)
    assert np.all(np.isin(m.boundary_tag, list(UNIT_TAGS.values())))


def test_rejects_bad_input():
    with pytest.raises(MeshError):
        build_rect_mesh((0, 0, 0, 1), 0.5, UNIT_TAGS)
    with pytest.raises(MeshError):
        build_rect_mesh((0, 1, 0, 1), -0.5, UNIT_TAGS)
    with pytest.raises(MeshError):
        build_rect_mesh((0, 1, 0, 1), 0.5, {**UNIT_TAGS, "top": "no_such_tag"})


def _two_domain(h):
    tags_f = {"left": "external", "right": "external", "top": "external", "bottom": "interface"}
    tags_p = {"left": "external", "right": "external", "top": "interface", "bottom": "external"}
    mf = build_rect_mesh((0, 1, 0, 1), h, tags_f)
    mp = build_rect_mesh((0, 1, -1, 0), h, tags_p)
    return mf, mp


def test_pairing_geometry():
    mf, mp = _two_domain(0.5)
    pr = pair_interface(mf, mp)
    assert pr.n_nodes == 5  # 2 edges: v m v m v
    assert np.allclose(pr.n_f, [0, -1])
    assert np.allclose(pr.n_p, [0, 1])
    assert abs(np.dot(pr.tau, pr.n_f)) == 0.0
    assert abs(np.linalg.norm(pr.tau) - 1.0) < 1e-15
    assert np.allclose(pr.fluid.node_coords, pr.poro.node_coords, atol=1e-13)
    # coords are sorted by arclength
    assert np.all(np.diff(pr.fluid.node_coords[:, 0]) > 0)


def test_single_cell_pairing():
    tags_f = {"left": "external", "right": "external", "top": "external", "bottom": "interface"}
    tags_p = {"left": "external", "right": "external", "top": "interface", "bottom": "external"}
    mf = build_rect_mesh((0, 1, 0, 1), 1.0, tags_f)
    mp = build_rect_mesh((0, 1, -1, 0), 1.0, tags_p)
    pr = pair_interface(mf, mp)
    assert len(pr.fluid_edges) == 1


def test_pairing_role_reversal_swaps_normals():
    mf, mp = _two_domain(0.25)
    pr = pair_interface(mf, mp)
    rev = pair_interface(mp, mf)
    assert np.array_equal(pr.n_f, rev.n_p)
    assert np.array_equal(pr.n_p, rev.n_f)
    assert np.array_equal(pr.fluid.p2_nodes, rev.poro.p2_nodes)


def test_interface_vertices_coincide_one_to_one():
    mf, mp = _two_domain(0.125)
    pr = pair_interface(mf, mp)
    cf = pr.fluid.node_coords
    cp = pr.poro.node_coords
    assert cf.shape == cp.shape
    assert np.max(np.abs(cf - cp)) <= 1e-12 * mf.h_max


def test_shifted_mesh_rejected():
    tags_f = {"left": "external", "right": "external", "top": "external", "bottom": "interface"}
    tags_p = {"left": "external", "right": "external", "top": "interface", "bottom": "external"}
    mf = build_rect_mesh((0, 1, 0, 1), 0.5, tags_f)
    mp = build_rect_mesh((0.25, 1.25, -1, 0), 0.5, tags_p)
    with pytest.raises(IncompatibleMeshError):
        pair_interface(mf, mp)


def test_mismatched_counts_rejected():
    tags_f = {"left": "external", "right": "external", "top": "external", "bottom": "interface"}
    tags_p = {"left": "external", "right": "external", "top": "interface", "bottom": "external"}
    mf = build_rect_mesh((0, 1, 0, 1), 0.5, tags_f)
    mp = build_rect_mesh((0, 1, -1, 0), 0.25, tags_p)
    with pytest.raises(IncompatibleMeshError):
        pair_interface(mf, mp)
