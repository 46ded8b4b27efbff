import numpy as np
import pytest
import scipy.sparse as sp

from fpsi.fem import FeSpace, FormKind, apply_dirichlet, assemble, assemble_vector
from fpsi.linalg import (
    BlockSystem,
    LuSolver,
    SingularSystemError,
    flatten,
    solve_sparse,
)
from fpsi.mesh import build_rect_mesh

ALL_EXT = {"left": "external", "right": "external", "bottom": "external", "top": "external"}


def test_flatten_identity_blocks():
    eye2 = sp.identity(2, format="csr")
    eye3 = sp.identity(3, format="csr")
    a, b = flatten(BlockSystem([[eye2, None], [None, eye3]], rhs=[[1, 2], [3, 4, 5]]))
    assert np.array_equal(a.toarray(), np.eye(5))
    assert np.array_equal(b, [1, 2, 3, 4, 5])


def test_flatten_single_block_is_identical():
    rng = np.random.default_rng(1)
    dense = rng.normal(size=(4, 4))
    a, _ = flatten(BlockSystem([[sp.csr_array(dense)]]))
    assert np.array_equal(a.toarray(), dense)


def test_flatten_matches_dense_blockwise_product():
    rng = np.random.default_rng(7)
    a11 = sp.random(5, 4, density=0.6, random_state=3, format="csr")
    a12 = sp.random(5, 3, density=0.6, random_state=4, format="csr")
    a21 = sp.random(2, 4, density=0.6, random_state=5, format="csr")
    a22 = sp.random(2, 3, density=0.6, random_state=6, format="csr")
    sysm = BlockSystem([[a11, a12], [a21, a22]])
    flat, _ = flatten(sysm)
    x = rng.normal(size=7)
    x1, x2 = x[:4], x[4:]
    expect = np.concatenate([a11 @ x1 + a12 @ x2, a21 @ x1 + a22 @ x2])
    assert np.max(np.abs(flat @ x - expect)) < 1e-14


def test_flatten_rejects_inconsistent_sizes():
    with pytest.raises(ValueError):
        BlockSystem([[sp.identity(2), sp.identity(3)]])
    with pytest.raises(ValueError):
        BlockSystem([[sp.identity(2), None], [None, None]])


def test_solve_identity_bitwise():
    b = np.array([1.5, -2.25, 3.0])
    x = solve_sparse(sp.identity(3, format="csr"), b)
    assert np.array_equal(x, b)


def test_solve_2x2_hand_elimination():
    a = sp.csr_array(np.array([[2.0, 1.0], [1.0, 3.0]]))
    x = solve_sparse(a, np.array([3.0, 4.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_deterministic():
    rng = np.random.default_rng(11)
    a = sp.random(200, 200, density=0.05, random_state=12, format="csr")
    a = a + sp.identity(200) * 10.0
    b = rng.normal(size=200)
    s = LuSolver(a)
    x1 = s.solve(b)
    x2 = s.solve(b.copy())
    assert np.array_equal(x1, x2)
    x3 = LuSolver(a.copy()).solve(b.copy())
    assert np.array_equal(x1, x3)


def test_singular_matrix_raises():
    a = sp.csr_array(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularSystemError):
        LuSolver(a)


def test_residual_contract_on_fem_system():
    mesh = build_rect_mesh((0, 1, 0, 1), 1 / 16, ALL_EXT)
    s = FeSpace(mesh, "p1_scalar", dirichlet_tags=("external",))
    a = assemble(FormKind.STIFFNESS_GRAD, s, s)
    b = assemble_vector("volume_load", s, lambda t, x: np.ones(len(x)))
    a2, b2 = apply_dirichlet(a, b, s, 0.0)
    x = solve_sparse(a2, b2)
    r = np.linalg.norm(a2 @ x - b2) / np.linalg.norm(b2)
    assert r <= 1e-10


@pytest.mark.parametrize("n", [8, 16, 32])
def test_poisson_manufactured_second_order(n, results={}):
    # -lap u = f with u = sin(pi x) sin(pi y); P1 elements converge at O(h^2)
    mesh = build_rect_mesh((0, 1, 0, 1), 1.0 / n, ALL_EXT)
    s = FeSpace(mesh, "p1_scalar", dirichlet_tags=("external",))
    exact = lambda xy: np.sin(np.pi * xy[:, 0]) * np.sin(np.pi * xy[:, 1])
    f = lambda t, xy: 2 * np.pi**2 * np.sin(np.pi * xy[:, 0]) * np.sin(np.pi * xy[:, 1])
    a = assemble(FormKind.STIFFNESS_GRAD, s, s)
    b = assemble_vector("volume_load", s, f)
    a2, b2 = apply_dirichlet(a, b, s, 0.0)
    x = solve_sparse(a2, b2)
    err = np.max(np.abs(x - exact(s.dof_coords)))
    results[n] = err
    if 2 * n in results or n == 32:
        pass
    if n == 32:
        r1 = np.log2(results[8] / results[16])
        r2 = np.log2(results[16] / results[32])
        assert r1 > 1.8 and r2 > 1.8
