"""Implicit step of the fluid subproblem with lagged interface data.

One backward-Euler step solves for (v_f, p_f) given the previous velocity and
the two interface data arrays: the weighted normal datum paired with w.n and
the tangential datum paired with w.tau.  The system matrix is constant in
time, so the factorization is built once and reused.
"""

from __future__ import annotations

import numpy as np

from . import fem
from .domains import Domains
from .fem import EdgeBlock, dirichlet_values
from .linalg import BlockSystem, LuSolver, flatten


def needs_pressure_pin(space) -> bool:
    """True when the velocity space leaves no natural boundary anywhere.

    With every boundary node fully clamped the pressure is determined only up
    to constants and one dof must be pinned.
    """
    nodes = space.nodes_on_tags(tuple(set(space.mesh.boundary_tag)))
    mask = space.dirichlet_mask
    if space.components == 1:
        return bool(np.all(mask[nodes]))
    return bool(np.all(mask[2 * nodes]) and np.all(mask[2 * nodes + 1]))


class StokesOperator:
    """Constant-in-time fluid operator with cached factorization."""

    def __init__(self, dom: Domains):
        self.dom = dom
        sc = dom.scenario
        p, rb = sc.params, sc.robin
        self.dt = sc.time.dt

        a_vv = (p.rho_f / self.dt) * dom.Mv_f + 2.0 * p.mu_f * dom.Aeps_f \
            + rb.L1 * dom.Bnn_f + dom.c_bjs * dom.Btt_f
        blocks = BlockSystem([
            [a_vv, -dom.D_f.T.tocsr()],
            [dom.D_f, None],
        ])
        flat, _ = flatten(blocks)
        self.n_v = dom.Vf.dof_count
        self.n_q = dom.Qf.dof_count

        self.pin_pressure = needs_pressure_pin(dom.Vf)
        dofs = [dom.Vf.dirichlet_dofs]
        if self.pin_pressure:
            dofs.append(np.array([self.n_v], dtype=np.int64))
        self.constrained = np.concatenate(dofs)
        self.matrix = flat
        elim, self.couple = fem.eliminate_dofs(flat, self.constrained)
        self.lu = LuSolver(elim)
        self._bc_value = sc.field_bc("v_f").value
        self._pin_value = sc.exact.p_f if (self.pin_pressure and sc.exact) else None

    def lift_values(self, t: float) -> np.ndarray:
        vals = dirichlet_values(self.dom.Vf, self._bc_value, t)
        if self.pin_pressure:
            pin = 0.0
            if self._pin_value is not None:
                pin = float(self._pin_value(t, self.dom.Qf.dof_coords[:1])[0])
            vals = np.concatenate([vals, [pin]])
        return vals

    def rhs(self, v_prev: np.ndarray, r1: np.ndarray, r2: np.ndarray, t_next: float):
        dom = self.dom
        b_v = (dom.scenario.params.rho_f / self.dt) * (dom.Mv_f @ v_prev)
        b_v += dom.fluid_volume_load(t_next)
        b_v += dom.fluid_traction_load(t_next)
        b_v += dom.Tn_f @ r1
        b_v -= dom.Tt_f @ r2
        b_q = dom.fluid_mass_load(t_next)
        return np.concatenate([b_v, b_q])

    def step(self, v_prev: np.ndarray, r1: np.ndarray, r2: np.ndarray, t_next: float):
        """Solve one implicit step; returns (v_f, p_f) at the new level."""
        b = self.rhs(v_prev, r1, r2, t_next)
        b = fem.constrain_rhs(b, self.couple, self.constrained, self.lift_values(t_next))
        x = self.lu.solve(b)
        return x[: self.n_v], x[self.n_v:]


def fluid_traction_bc(dom: Domains, p_fn, tag: str):
    """Load of a prescribed normal stress ``sigma n = -p(t) n`` on a side.

    Returns a callable ``load(t)`` adding ``-int p(t) (w . n)`` over the
    tagged edges; a traction-free side is the ``p = 0`` case.
    """
    block = EdgeBlock.from_tags(dom.mesh_f, tag)

    def load(t: float) -> np.ndarray:
        if block.n_edges == 0:
            return np.zeros(dom.Vf.dof_count)
        return fem.edge_load_vector(
            dom.Vf, ("normal", None), block,
            lambda tt, xy: np.full(len(xy), -p_fn(tt)), t,
        )

    return load
