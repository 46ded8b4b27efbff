"""Block-system composition and sparse direct solves.

The sub-solvers produce nonsymmetric saddle-point systems whose matrices do
not change between time steps, so each operator factorizes once (sparse LU
with COLAMD ordering and partial pivoting) and then back-substitutes per
step.  Factorizations are immutable and may be shared across threads;
concurrent solves against distinct right-hand sides are safe.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10
PIVOT_RATIO = 1e-14


class SingularSystemError(RuntimeError):
    """The system matrix is numerically singular."""


class SolveError(RuntimeError):
    """The solve finished but violated the residual contract."""


class BlockSystem:
    """Grid of optional sparse blocks plus a per-block right-hand side."""

    def __init__(self, blocks, rhs=None):
        self.blocks = [list(row) for row in blocks]
        n_rows = len(self.blocks)
        n_cols = len(self.blocks[0]) if n_rows else 0
        if any(len(row) != n_cols for row in self.blocks):
            raise ValueError("ragged block grid")
        self.row_sizes = [None] * n_rows
        self.col_sizes = [None] * n_cols
        for i, row in enumerate(self.blocks):
            for j, blk in enumerate(row):
                if blk is None:
                    continue
                r, c = blk.shape
                if self.row_sizes[i] not in (None, r) or self.col_sizes[j] not in (None, c):
                    raise ValueError(f"inconsistent block shape at ({i}, {j})")
                self.row_sizes[i] = r
                self.col_sizes[j] = c
        if any(s is None for s in self.row_sizes) or any(s is None for s in self.col_sizes):
            raise ValueError("empty block row or column")
        self.rhs = None
        if rhs is not None:
            rhs = [np.asarray(b, dtype=float) for b in rhs]
            if [len(b) for b in rhs] != self.row_sizes:
                raise ValueError("rhs does not match block row sizes")
            self.rhs = rhs

    @property
    def shape(self):
        return (sum(self.row_sizes), sum(self.col_sizes))

    def row_offsets(self):
        return np.concatenate([[0], np.cumsum(self.row_sizes)])

    def col_offsets(self):
        return np.concatenate([[0], np.cumsum(self.col_sizes)])


def flatten(system: BlockSystem):
    """Monolithic CSR matrix (and concatenated rhs) of a block system."""
    mat = sp.bmat(
        [[blk if blk is not None else None for blk in row] for row in system.blocks],
        format="csr",
    )
    mat = sp.csr_array(mat)
    mat.sum_duplicates()
    if system.rhs is None:
        return mat, None
    return mat, np.concatenate(system.rhs)


class LuSolver:
    """Cached sparse LU factorization with a relative-residual contract.

    Solutions satisfy ``||A x - b|| / max(||b||, 1e-30) <= 1e-10`` (one step
    of iterative refinement is applied if plain back-substitution falls
    short).  Repeated solves of identical inputs are bitwise identical.
    """

    def __init__(self, a):
        self.a = sp.csr_array(a)
        n, m = self.a.shape
        if n != m:
            raise ValueError(f"matrix is not square: {self.a.shape}")
        # block systems mix wildly different physical scales; equilibrate so
        # the pivot-based singularity test is scale invariant
        absa = abs(self.a)
        row_max = absa.max(axis=1).toarray().ravel()
        if np.any(row_max == 0.0):
            raise SingularSystemError("matrix has an empty row")
        self.dr = 1.0 / row_max
        scaled = sp.csr_array(sp.diags(self.dr) @ self.a)
        col_max = abs(scaled).max(axis=0).toarray().ravel()
        if np.any(col_max == 0.0):
            raise SingularSystemError("matrix has an empty column")
        self.dc = 1.0 / col_max
        scaled = sp.csr_array(scaled @ sp.diags(self.dc))
        try:
            self.lu = spla.splu(scaled.tocsc())
        except RuntimeError as err:
            raise SingularSystemError(str(err)) from err
        du = np.abs(self.lu.U.diagonal())
        if du.min() < PIVOT_RATIO * du.max():
            raise SingularSystemError(
                f"pivot ratio {du.min() / du.max():.3e} below {PIVOT_RATIO:.0e}"
            )

    def _apply(self, b: np.ndarray) -> np.ndarray:
        return self.dc * self.lu.solve(self.dr * b)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._apply(b)
        bnorm = max(np.linalg.norm(b), 1e-30)
        res = np.linalg.norm(self.a @ x - b)
        if res / bnorm > RESIDUAL_TOL:
            x = x + self._apply(b - self.a @ x)
            res = np.linalg.norm(self.a @ x - b)
            if res / bnorm > RESIDUAL_TOL:
                raise SolveError(
                    f"relative residual {res / bnorm:.3e} exceeds {RESIDUAL_TOL:.0e}"
                )
        return x


def solve_sparse(a, b: np.ndarray) -> np.ndarray:
    """One-shot sparse direct solve honoring the residual contract."""
    return LuSolver(a).solve(b)
