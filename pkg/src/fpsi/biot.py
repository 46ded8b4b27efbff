"""Implicit steps of the poroelastic subproblem.

The primary mode solves the four-field system (solid rate, displacement,
total-pressure variable, pore pressure) whose volumetric coupling carries
only 1/lambda_p coefficients and therefore stays well conditioned in the
incompressible limit.  A standard two-field displacement/pressure mode with
the same interface data, elements, and time grid serves as the oscillation
and locking comparison baseline.  Both operators are constant in time; the
interface terms of the solid rate are expanded so the displacement stays the
primal unknown and the previous level moves to the right-hand side.  An
optional volumetric spring term enters the momentum balance implicitly.
"""

from __future__ import annotations

import numpy as np

from . import fem
from .domains import Domains
from .fem import dirichlet_values
from .linalg import BlockSystem, LuSolver, flatten


class BiotOperator:
    """Four-field poroelastic operator with cached factorization.

    The rate row couples the rate and the displacement through identical mass
    matrices, so the rate unknown is condensed out of the stored system (the
    momentum row keeps the second-difference inertia) and recovered exactly
    as the backward difference of the solved displacement.  The condensation
    requires the rate and displacement fields to share their essential dofs.
    """

    def __init__(self, dom: Domains):
        self.dom = dom
        sc = dom.scenario
        p, rb = sc.params, sc.robin
        self.dt = dt = sc.time.dt
        lam, alpha, c0 = p.lambda_p, p.alpha, p.c0
        if not np.array_equal(dom.Vv.dirichlet_dofs, dom.Vu.dirichlet_dofs):
            raise ValueError("rate and displacement essential dofs must agree")

        a_uu = (p.rho_p / dt**2) * dom.Mv_p + 2.0 * p.mu_p * dom.Aeps_p \
            + (rb.L2 / dt) * dom.Bnn_p + (dom.c_bjs / dt) * dom.Btt_p
        if p.spring:
            a_uu = a_uu + p.spring * dom.Mv_p
        a_pp = ((c0 + alpha**2 / lam) / dt) * dom.M_W + dom.A_K + rb.L3 * dom.Bss_p

        blocks = BlockSystem([
            [a_uu, -dom.D_beta.T.tocsr(), None],
            [dom.D_beta, (1.0 / lam) * dom.M_B, (-alpha / lam) * dom.M_BW],
            [None, (-alpha / (lam * dt)) * dom.M_WB, a_pp],
        ])
        flat, _ = flatten(blocks)
        self.off_beta = dom.Vu.dof_count
        self.off_p = self.off_beta + dom.Bp.dof_count

        self.constrained = np.concatenate([
            dom.Vu.dirichlet_dofs,
            self.off_p + dom.Wp.dirichlet_dofs,
        ])
        self.matrix = flat
        elim, self.couple = fem.eliminate_dofs(flat, self.constrained)
        self.lu = LuSolver(elim)
        self._u_value = sc.field_bc("u_p").value
        self._p_value = sc.field_bc("p_p").value

    def lift_values(self, t_next: float) -> np.ndarray:
        dom = self.dom
        return np.concatenate([
            dirichlet_values(dom.Vu, self._u_value, t_next),
            dirichlet_values(dom.Wp, self._p_value, t_next),
        ])

    def rhs(self, v_prev, u_prev, beta_prev, p_prev, r3, r4, r5, t_next):
        dom, dt = self.dom, self.dt
        p, rb = dom.scenario.params, dom.scenario.robin
        lam, alpha, c0 = p.lambda_p, p.alpha, p.c0

        b_u = (p.rho_p / dt**2) * (dom.Mv_p @ u_prev)
        b_u += (p.rho_p / dt) * (dom.Mv_p @ v_prev)
        b_u += dom.poro_volume_load(t_next)
        b_u += dom.poro_traction_load(t_next)
        b_u += (rb.L2 / dt) * (dom.Bnn_p @ u_prev)
        b_u += (dom.c_bjs / dt) * (dom.Btt_p @ u_prev)
        b_u += dom.Tn_p @ r3
        b_u -= dom.Tt_p @ r4
        b_beta = np.zeros(dom.Bp.dof_count)
        b_p = ((c0 + alpha**2 / lam) / dt) * (dom.M_W @ p_prev)
        b_p -= (alpha / (lam * dt)) * (dom.M_WB @ beta_prev)
        b_p += dom.poro_mass_load(t_next)
        b_p += dom.Ts_p @ r5
        return np.concatenate([b_u, b_beta, b_p])

    def step(self, prev, r3, r4, r5, t_next):
        """One implicit step; ``prev`` is (v_p, u_p, beta_p, p_p)."""
        v_prev, u_prev, beta_prev, p_prev = prev
        b = self.rhs(v_prev, u_prev, beta_prev, p_prev, r3, r4, r5, t_next)
        b = fem.constrain_rhs(b, self.couple, self.constrained, self.lift_values(t_next))
        x = self.lu.solve(b)
        u_new = x[: self.off_beta]
        v_new = (u_new - u_prev) / self.dt
        return (v_new, u_new, x[self.off_beta: self.off_p], x[self.off_p:])


class TwoFieldBiotOperator:
    """Standard displacement/pressure mode used as the comparison baseline.

    Same meshes, elements for (u_p, p_p), Robin data, and time grid as the
    four-field mode, so comparisons isolate the formulation difference.  The
    solid rate is recovered as the backward difference of the displacement.
    """

    def __init__(self, dom: Domains):
        self.dom = dom
        sc = dom.scenario
        p, rb = sc.params, sc.robin
        self.dt = dt = sc.time.dt
        lam, alpha, c0 = p.lambda_p, p.alpha, p.c0

        a_uu = (p.rho_p / dt**2) * dom.Mv_p + 2.0 * p.mu_p * dom.Aeps_p \
            + lam * dom.Ddiv_p + (rb.L2 / dt) * dom.Bnn_p \
            + (dom.c_bjs / dt) * dom.Btt_p
        if p.spring:
            a_uu = a_uu + p.spring * dom.Mv_p
        a_pp = (c0 / dt) * dom.M_W + dom.A_K + rb.L3 * dom.Bss_p
        blocks = BlockSystem([
            [a_uu, -alpha * dom.D_w.T.tocsr()],
            [(alpha / dt) * dom.D_w, a_pp],
        ])
        flat, _ = flatten(blocks)
        self.off_p = dom.Vu.dof_count
        self.constrained = np.concatenate([
            dom.Vu.dirichlet_dofs,
            self.off_p + dom.Wp.dirichlet_dofs,
        ])
        self.matrix = flat
        elim, self.couple = fem.eliminate_dofs(flat, self.constrained)
        self.lu = LuSolver(elim)
        self._u_value = sc.field_bc("u_p").value
        self._p_value = sc.field_bc("p_p").value
        self._beta_lu = None

    def lift_values(self, t_next: float) -> np.ndarray:
        return np.concatenate([
            dirichlet_values(self.dom.Vu, self._u_value, t_next),
            dirichlet_values(self.dom.Wp, self._p_value, t_next),
        ])

    def rhs(self, v_prev, u_prev, p_prev, r3, r4, r5, t_next):
        dom, dt = self.dom, self.dt
        p, rb = dom.scenario.params, dom.scenario.robin
        b_u = (p.rho_p / dt**2) * (dom.Mv_p @ u_prev)
        b_u += (p.rho_p / dt) * (dom.Mv_p @ v_prev)
        b_u += dom.poro_volume_load(t_next)
        b_u += dom.poro_traction_load(t_next)
        b_u += (rb.L2 / dt) * (dom.Bnn_p @ u_prev)
        b_u += (dom.c_bjs / dt) * (dom.Btt_p @ u_prev)
        b_u += dom.Tn_p @ r3
        b_u -= dom.Tt_p @ r4
        b_p = (p.c0 / dt) * (dom.M_W @ p_prev)
        b_p += (p.alpha / dt) * (dom.D_w @ u_prev)
        b_p += dom.poro_mass_load(t_next)
        b_p += dom.Ts_p @ r5
        return np.concatenate([b_u, b_p])

    def step(self, prev, r3, r4, r5, t_next):
        """One implicit step; ``prev`` is (v_p, u_p, p_p); returns the same triple."""
        v_prev, u_prev, p_prev = prev
        b = self.rhs(v_prev, u_prev, p_prev, r3, r4, r5, t_next)
        b = fem.constrain_rhs(b, self.couple, self.constrained, self.lift_values(t_next))
        x = self.lu.solve(b)
        u_new = x[: self.off_p]
        p_new = x[self.off_p:]
        v_new = (u_new - u_prev) / self.dt
        return v_new, u_new, p_new

    def total_pressure(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Project alpha p - lambda div u onto the piecewise-linear space."""
        dom = self.dom
        pr = dom.scenario.params
        if self._beta_lu is None:
            self._beta_lu = LuSolver(dom.M_B)
        rhs = pr.alpha * (dom.M_BW @ p) - pr.lambda_p * (dom.D_beta @ u)
        return self._beta_lu.solve(rhs)
