"""Time-stepping driver: lagged interface data, sub-solvers, reference modes.

One time level runs the fluid and poroelastic steps independently against
interface data frozen at the previous level, then refreshes the five nodal
interface arrays from the new fields.  Two reference modes validate the
splitting: a strongly coupled solve of all six fields in one system, and a
within-level fixed-point iteration of the two Robin subproblems that
converges to the strongly coupled solution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fem
from .biot import BiotOperator, TwoFieldBiotOperator
from .domains import Domains
from .fem import FeSpace, dirichlet_values
from .linalg import BlockSystem, LuSolver, flatten
from .physics import Scenario
from .stokes import StokesOperator, needs_pressure_pin


@dataclass
class SystemState:
    """The six discrete fields at one time level."""

    v_f: np.ndarray
    p_f: np.ndarray
    v_p: np.ndarray
    u_p: np.ndarray
    beta_p: np.ndarray
    p_p: np.ndarray
    t: float
    n: int

    def copy(self) -> "SystemState":
        return SystemState(*(a.copy() for a in self.arrays()), self.t, self.n)

    def arrays(self):
        return (self.v_f, self.p_f, self.v_p, self.u_p, self.beta_p, self.p_p)


@dataclass
class RobinTrace:
    """Nodal interface data: r1, r2, r4 feed the fluid side, r3, r5 the
    poroelastic side; all live on the shared arclength-ordered trace nodes."""

    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    r4: np.ndarray
    r5: np.ndarray

    def arrays(self):
        return (self.r1, self.r2, self.r3, self.r4, self.r5)

    def copy(self) -> "RobinTrace":
        return RobinTrace(*(a.copy() for a in self.arrays()))


class IterationLimitError(RuntimeError):
    """Interface fixed-point iteration did not reach the tolerance."""

    def __init__(self, history):
        super().__init__(
            f"no convergence in {len(history)} iterations "
            f"(last residual {history[-1]:.3e})"
        )
        self.history = list(history)


# ---------------------------------------------------------------------------
# projections used for initialization
# ---------------------------------------------------------------------------

def stokes_projection(vel_space: FeSpace, pres_space: FeSpace, mu: float,
                      v_fn, grad_v_fn, p_fn, t: float = 0.0):
    """Discrete velocity/pressure pair reproducing the viscous work and the
    divergence moments of an analytic pair.

    ``p_fn=None`` projects with a zero pressure companion.  Constrained dofs
    take the nodal values of ``v_fn``; when the velocity is clamped on the
    whole boundary one pressure dof is pinned.
    """
    a = 2.0 * mu * fem.eps_stiffness(vel_space)
    d = fem.divergence_matrix(vel_space, pres_space)
    flat, _ = flatten(BlockSystem([[a, -d.T.tocsr()], [d, None]]))
    n_v = vel_space.dof_count

    b_v = fem.eps_load_vector(vel_space, grad_v_fn, t, factor=2.0 * mu)
    if p_fn is not None:
        b_v -= fem.div_load_vector(vel_space, p_fn, t)
    div_fn = lambda tt, xy: np.trace(
        np.asarray(grad_v_fn(tt, xy)), axis1=1, axis2=2)
    b_q = fem.load_vector(pres_space, div_fn, t)
    b = np.concatenate([b_v, b_q])

    dofs = [vel_space.dirichlet_dofs]
    vals = [dirichlet_values(vel_space, v_fn, t)]
    if needs_pressure_pin(vel_space):
        dofs.append(np.array([n_v], dtype=np.int64))
        pin = 0.0 if p_fn is None else float(p_fn(t, pres_space.dof_coords[:1])[0])
        vals.append(np.array([pin]))
    dofs = np.concatenate(dofs)
    vals = np.concatenate(vals)
    elim, couple = fem.eliminate_dofs(flat, dofs)
    x = LuSolver(elim).solve(fem.constrain_rhs(b, couple, dofs, vals))
    return x[:n_v], x[n_v:]


def ritz_projection(space: FeSpace, diffusivity, p_fn, grad_p_fn, t: float = 0.0):
    """Discrete field matching the weighted-gradient moments of ``p_fn``.

    Constrained dofs take interpolated exact values; with no essential dofs
    the gradient system is solved with one pinned dof and shifted to match
    the mean of the analytic field.
    """
    a = fem.grad_stiffness(space, space, coefficient=diffusivity)
    b = fem.grad_load_vector(space, grad_p_fn, t, tensor=diffusivity)
    pure_neumann = len(space.dirichlet_dofs) == 0
    if pure_neumann:
        dofs = np.array([0], dtype=np.int64)
        vals = np.asarray(p_fn(t, space.dof_coords[:1]), dtype=float)
    else:
        dofs = space.dirichlet_dofs
        vals = dirichlet_values(space, p_fn, t)
    elim, couple = fem.eliminate_dofs(a, dofs)
    x = LuSolver(elim).solve(fem.constrain_rhs(b, couple, dofs, vals))
    if pure_neumann:
        m = fem.mass_matrix(space, space)
        ones = np.ones(space.dof_count)
        area = ones @ (m @ ones)
        mean_exact = ones @ fem.load_vector(space, p_fn, t)
        x = x + (mean_exact - ones @ (m @ x)) / area
    return x


# ---------------------------------------------------------------------------
# strongly coupled reference operator
# ---------------------------------------------------------------------------

class MonolithicOperator:
    """All six fields in one backward-Euler system without interface lagging.

    The interface enters through the standard coupled weak form: pressure
    loads the momentum balances through the normal traces, the mass balance
    absorbs both normal fluxes, and the tangential slip terms couple the two
    velocities implicitly.
    """

    def __init__(self, dom: Domains):
        self.dom = dom
        sc = dom.scenario
        p = sc.params
        self.dt = dt = sc.time.dt
        lam, alpha, c0 = p.lambda_p, p.alpha, p.c0
        cb = dom.c_bjs
        if not np.array_equal(dom.Vv.dirichlet_dofs, dom.Vu.dirichlet_dofs):
            raise ValueError("rate and displacement essential dofs must agree")

        a_vf = (p.rho_f / dt) * dom.Mv_f + 2.0 * p.mu_f * dom.Aeps_f + cb * dom.Btt_f
        # the solid rate is condensed into the displacement (second-difference
        # inertia); it is recovered as the backward difference after the solve
        a_uu = (p.rho_p / dt**2) * dom.Mv_p + 2.0 * p.mu_p * dom.Aeps_p \
            + (cb / dt) * dom.Btt_p
        if p.spring:
            a_uu = a_uu + p.spring * dom.Mv_p
        a_pp = ((c0 + alpha**2 / lam) / dt) * dom.M_W + dom.A_K

        blocks = BlockSystem([
            [a_vf, -dom.D_f.T.tocsr(), (cb / dt) * dom.X_fp, None, dom.N_fp],
            [dom.D_f, None, None, None, None],
            [cb * dom.X_pf, None, a_uu, -dom.D_beta.T.tocsr(), dom.N_pp.T.tocsr()],
            [None, None, dom.D_beta, (1.0 / lam) * dom.M_B, (-alpha / lam) * dom.M_BW],
            [-dom.N_pf, None, (-1.0 / dt) * dom.N_pp,
             (-alpha / (lam * dt)) * dom.M_WB, a_pp],
        ])
        flat, _ = flatten(blocks)
        sizes = [dom.Vf.dof_count, dom.Qf.dof_count, dom.Vu.dof_count,
                 dom.Bp.dof_count, dom.Wp.dof_count]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])

        self.pin_pressure = needs_pressure_pin(dom.Vf)
        dofs = [dom.Vf.dirichlet_dofs]
        if self.pin_pressure:
            dofs.append(np.array([self.offsets[1]], dtype=np.int64))
        dofs.append(self.offsets[2] + dom.Vu.dirichlet_dofs)
        dofs.append(self.offsets[4] + dom.Wp.dirichlet_dofs)
        self.constrained = np.concatenate(dofs)
        self.matrix = flat
        elim, self.couple = fem.eliminate_dofs(flat, self.constrained)
        self.lu = LuSolver(elim)

        self._vf_value = sc.field_bc("v_f").value
        self._u_value = sc.field_bc("u_p").value
        self._p_value = sc.field_bc("p_p").value
        self._pin_value = sc.exact.p_f if (self.pin_pressure and sc.exact) else None

    def lift_values(self, t_next: float) -> np.ndarray:
        dom = self.dom
        parts = [dirichlet_values(dom.Vf, self._vf_value, t_next)]
        if self.pin_pressure:
            pin = 0.0
            if self._pin_value is not None:
                pin = float(self._pin_value(t_next, dom.Qf.dof_coords[:1])[0])
            parts.append(np.array([pin]))
        parts.append(dirichlet_values(dom.Vu, self._u_value, t_next))
        parts.append(dirichlet_values(dom.Wp, self._p_value, t_next))
        return np.concatenate(parts)

    def step(self, state: SystemState) -> SystemState:
        dom, dt = self.dom, self.dt
        p = dom.scenario.params
        lam, alpha, c0 = p.lambda_p, p.alpha, p.c0
        t_next = state.t + dt

        b_vf = (p.rho_f / dt) * (dom.Mv_f @ state.v_f)
        b_vf += dom.fluid_volume_load(t_next)
        b_vf += dom.fluid_traction_load(t_next)
        b_vf += (dom.c_bjs / dt) * (dom.X_fp @ state.u_p)
        b_pf = dom.fluid_mass_load(t_next)
        b_u = (p.rho_p / dt**2) * (dom.Mv_p @ state.u_p)
        b_u += (p.rho_p / dt) * (dom.Mv_p @ state.v_p)
        b_u += dom.poro_volume_load(t_next)
        b_u += dom.poro_traction_load(t_next)
        b_u += (dom.c_bjs / dt) * (dom.Btt_p @ state.u_p)
        b_beta = np.zeros(dom.Bp.dof_count)
        b_p = ((c0 + alpha**2 / lam) / dt) * (dom.M_W @ state.p_p)
        b_p -= (alpha / (lam * dt)) * (dom.M_WB @ state.beta_p)
        b_p += dom.poro_mass_load(t_next)
        b_p -= (1.0 / dt) * (dom.N_pp @ state.u_p)
        b_p -= dom.Ts_p @ dom.flux_mismatch(t_next)

        b = np.concatenate([b_vf, b_pf, b_u, b_beta, b_p])
        b = fem.constrain_rhs(b, self.couple, self.constrained, self.lift_values(t_next))
        x = self.lu.solve(b)
        o = self.offsets
        u_new = x[o[2]:o[3]]
        return SystemState(
            v_f=x[o[0]:o[1]], p_f=x[o[1]:o[2]],
            v_p=(u_new - state.u_p) / dt, u_p=u_new,
            beta_p=x[o[3]:o[4]], p_p=x[o[4]:o[5]],
            t=t_next, n=state.n + 1,
        )


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _default_concurrency() -> bool:
    cap = os.environ.get("FPSI_THREADS", "")
    if cap.strip():
        try:
            return int(cap) > 1
        except ValueError:
            return True
    return (os.cpu_count() or 1) > 1


class Simulation:
    """Owns the discretization and orchestrates the per-level sub-solves."""

    def __init__(self, scenario: Scenario, mode: str = "fourfield",
                 concurrent: bool | None = None):
        if mode not in ("fourfield", "twofield"):
            raise ValueError(f"unknown mode {mode!r}")
        self.scenario = scenario
        self.mode = mode
        self.dom = Domains(scenario)
        self.stokes = StokesOperator(self.dom)
        if mode == "fourfield":
            self.biot = BiotOperator(self.dom)
        else:
            self.biot = TwoFieldBiotOperator(self.dom)
        self.concurrent = _default_concurrency() if concurrent is None else concurrent
        self._pool = None
        self._monolithic = None
        self._beta_lu = None

    @property
    def dt(self) -> float:
        return self.scenario.time.dt

    # -- states -------------------------------------------------------------
    def zero_state(self) -> SystemState:
        dom = self.dom
        return SystemState(
            v_f=np.zeros(dom.Vf.dof_count), p_f=np.zeros(dom.Qf.dof_count),
            v_p=np.zeros(dom.Vu.dof_count), u_p=np.zeros(dom.Vu.dof_count),
            beta_p=np.zeros(dom.Bp.dof_count), p_p=np.zeros(dom.Wp.dof_count),
            t=0.0, n=0,
        )

    def total_pressure_from_constraint(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Solve the volumetric-constraint row for the total-pressure field."""
        dom = self.dom
        pr = self.scenario.params
        if self._beta_lu is None:
            self._beta_lu = LuSolver(dom.M_B)
        rhs = pr.alpha * (dom.M_BW @ p) - pr.lambda_p * (dom.D_beta @ u)
        return self._beta_lu.solve(rhs)

    def initialize(self):
        """Initial state and interface data.

        Rest scenarios start from zero; analytic scenarios project the
        velocity/displacement pairs, take the weighted-gradient projection of
        the pore pressure, and recover the total pressure from the
        volumetric-constraint row.
        """
        sc = self.scenario
        if sc.initial == "rest":
            state = self.zero_state()
            return state, self.robin_from_state(state)
        ex = sc.exact
        if ex is None:
            raise ValueError("scenario declares analytic start but has no fields")
        dom = self.dom
        p = sc.params
        v_f0, p_f0 = stokes_projection(
            dom.Vf, dom.Qf, p.mu_f, ex.v_f, ex.grad_v_f, ex.p_f, 0.0)
        v_p0, _ = stokes_projection(
            dom.Vv, dom.Bp, p.mu_p, ex.v_p, ex.grad_v_p, None, 0.0)
        u_p0, _ = stokes_projection(
            dom.Vu, dom.Bp, p.mu_p, ex.u_p, ex.grad_u_p, None, 0.0)
        p_p0 = ritz_projection(dom.Wp, dom.kappa_over_mu, ex.p_p, ex.grad_p_p, 0.0)
        beta0 = self.total_pressure_from_constraint(u_p0, p_p0)
        state = SystemState(v_f=v_f0, p_f=p_f0, v_p=v_p0, u_p=u_p0,
                            beta_p=beta0, p_p=p_p0, t=0.0, n=0)
        return state, self.robin_from_state(state)

    # -- interface data -------------------------------------------------------
    def robin_from_state(self, state: SystemState, mismatch_t: float | None = None) -> RobinTrace:
        """Interface data evaluated from one state, using the stored solid
        rate in place of the backward difference (they coincide after any
        four-field solve)."""
        dom = self.dom
        rb = self.scenario.robin
        cb = dom.c_bjs
        vfn = dom.trace_normal_f(state.v_f)
        vft = dom.trace_tangent_f(state.v_f)
        vpn = dom.trace_normal_p(state.v_p)
        vpt = dom.trace_tangent_p(state.v_p)
        pp = dom.trace_scalar_p(state.p_p)
        g = dom.flux_mismatch(state.t if mismatch_t is None else mismatch_t)
        return RobinTrace(
            r1=rb.L1 * vfn - pp,
            r2=cb * vpt,
            r3=rb.L2 * vpn - pp,
            r4=cb * vft,
            r5=rb.L3 * pp + vfn + vpn - g,
        )

    def update_robin(self, new: SystemState, old: SystemState) -> RobinTrace:
        """Refresh the interface data from two consecutive states."""
        dom = self.dom
        rb = self.scenario.robin
        cb = dom.c_bjs
        dtu = (new.u_p - old.u_p) / self.dt
        vfn = dom.trace_normal_f(new.v_f)
        pp = dom.trace_scalar_p(new.p_p)
        g = dom.flux_mismatch(new.t)
        return RobinTrace(
            r1=rb.L1 * vfn - pp,
            r2=cb * dom.trace_tangent_p(dtu),
            r3=rb.L2 * dom.trace_normal_p(dtu) - pp,
            r4=cb * dom.trace_tangent_f(new.v_f),
            r5=rb.L3 * pp + vfn + dom.trace_normal_p(dtu) - g,
        )

    # -- decoupled stepping ---------------------------------------------------
    def _biot_prev(self, state: SystemState):
        if self.mode == "fourfield":
            return (state.v_p, state.u_p, state.beta_p, state.p_p)
        return (state.v_p, state.u_p, state.p_p)

    def _wrap_biot(self, result, prev_state: SystemState):
        if self.mode == "fourfield":
            return result
        v, u, p = result
        return v, u, self.biot.total_pressure(u, p), p

    def advance(self, state: SystemState, robin: RobinTrace):
        """One decoupled time level; the two sub-solves are independent and
        may run concurrently with bitwise-identical results."""
        t_next = state.t + self.dt
        if self.concurrent:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=2)
            f_fut = self._pool.submit(
                self.stokes.step, state.v_f, robin.r1, robin.r2, t_next)
            b_fut = self._pool.submit(
                self.biot.step, self._biot_prev(state), robin.r3, robin.r4,
                robin.r5, t_next)
            v_f, p_f = f_fut.result()
            biot_out = b_fut.result()
        else:
            v_f, p_f = self.stokes.step(state.v_f, robin.r1, robin.r2, t_next)
            biot_out = self.biot.step(
                self._biot_prev(state), robin.r3, robin.r4, robin.r5, t_next)
        v_p, u_p, beta_p, p_p = self._wrap_biot(biot_out, state)
        new = SystemState(v_f=v_f, p_f=p_f, v_p=v_p, u_p=u_p, beta_p=beta_p,
                          p_p=p_p, t=t_next, n=state.n + 1)
        return new, self.update_robin(new, state)

    def run(self, n_steps: int | None = None, observer=None):
        """March from the initial state; returns the full trajectory."""
        n_steps = self.scenario.time.n_steps if n_steps is None else n_steps
        state, robin = self.initialize()
        states, robins = [state], [robin]
        for _ in range(n_steps):
            state, robin = self.advance(state, robin)
            states.append(state)
            robins.append(robin)
            if observer is not None:
                observer(state, robin)
        return states, robins

    # -- reference modes -------------------------------------------------------
    def monolithic_step(self, state: SystemState) -> SystemState:
        """One strongly coupled step with no interface lagging."""
        if self.mode != "fourfield":
            raise ValueError("the strongly coupled mode uses the four-field form")
        if self._monolithic is None:
            self._monolithic = MonolithicOperator(self.dom)
        return self._monolithic.step(state)

    def robin_subiterate(self, state: SystemState, tol: float = 1e-10,
                         max_iters: int = 200,
                         initial_robin: RobinTrace | None = None):
        """Fixed-point iteration of the two subproblems within one level.

        Interface data is recomputed from the newest iterates until the five
        trace arrays change by less than ``tol`` in the relative interface
        L2 norm; the fixed point solves the strongly coupled system.
        ``initial_robin`` overrides the first sweep's data (already-converged
        data returns after a single sweep).
        """
        if tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.mode != "fourfield":
            raise ValueError("sub-iteration uses the four-field form")
        dom = self.dom
        t_next = state.t + self.dt
        if initial_robin is not None:
            robin = initial_robin
        else:
            robin = self.robin_from_state(state, mismatch_t=t_next)
        history = []
        result = None
        for _ in range(max_iters):
            v_f, p_f = self.stokes.step(state.v_f, robin.r1, robin.r2, t_next)
            v_p, u_p, beta_p, p_p = self.biot.step(
                (state.v_p, state.u_p, state.beta_p, state.p_p),
                robin.r3, robin.r4, robin.r5, t_next)
            result = SystemState(v_f=v_f, p_f=p_f, v_p=v_p, u_p=u_p,
                                 beta_p=beta_p, p_p=p_p, t=t_next, n=state.n + 1)
            new_robin = self.robin_from_state(result, mismatch_t=t_next)
            delta = np.sqrt(sum(
                dom.trace_norm(a - b) ** 2
                for a, b in zip(new_robin.arrays(), robin.arrays())
            ))
            scale = max(1.0, np.sqrt(sum(
                dom.trace_norm(a) ** 2 for a in new_robin.arrays())))
            history.append(delta / scale)
            robin = new_robin
            if history[-1] < tol:
                return result, history
        raise IterationLimitError(history)
