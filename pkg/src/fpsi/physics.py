"""Model coefficients, benchmark scenarios, and manufactured data.

Three scenarios are built in: a manufactured-solution convergence case on two
stacked unit squares, a cantilever bracket loaded through a Stokes layer, and
a pulse-driven blood-flow benchmark in half of an idealized artery.  The
manufactured forcing terms are hard-coded closed forms obtained from a
one-time computer-algebra derivation; the test suite re-derives them with
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class ScenarioError(ValueError):
    """Rejected scenario input."""


@dataclass
class PhysicalParams:
    """Coefficients of the coupled fluid / poroelastic model (CGS units)."""

    rho_f: float = 1.0      # fluid density, g/cm^3
    mu_f: float = 1.0       # dynamic viscosity, g/(cm s)
    rho_p: float = 1.0      # solid density, g/cm^3
    mu_p: float = 1.0       # shear modulus, dyn/cm^2
    lambda_p: float = 1.0   # volumetric Lame coefficient, dyn/cm^2
    alpha: float = 1.0      # effective-stress coupling, dimensionless
    c0: float = 1.0         # constrained storage, cm^2/dyn
    kappa: object = 1.0     # permeability, scalar or SPD 2x2 tensor, cm^2
    gamma: float = 1.0      # interface slip friction, dimensionless
    gravity: tuple = (0.0, 0.0)
    spring: float = 0.0     # volumetric recoil coefficient, dyn/cm^4

    def __post_init__(self):
        if min(self.mu_f, self.mu_p, self.rho_f) <= 0:
            raise ScenarioError("mu_f, mu_p, rho_f must be positive")
        if self.c0 < 0 or self.lambda_p <= 0:
            raise ScenarioError("need c0 >= 0 and lambda_p > 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ScenarioError("alpha must lie in (0, 1]")
        k = self.kappa_tensor()
        ev = np.linalg.eigvalsh(k)
        if ev.min() <= 0:
            raise ScenarioError("permeability must be SPD")

    def kappa_tensor(self) -> np.ndarray:
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim == 0:
            return float(k) * np.eye(2)
        if k.shape != (2, 2):
            raise ScenarioError("permeability must be a scalar or a 2x2 tensor")
        return k

    def kappa_scalar(self) -> float:
        k = self.kappa_tensor()
        if abs(k[0, 1]) > 0 or abs(k[0, 0] - k[1, 1]) > 0:
            raise ScenarioError("scalar permeability required here")
        return float(k[0, 0])

    def c_bjs(self, tau) -> float:
        """Slip coefficient mu_f gamma / sqrt(tau . K tau) for unit tangent tau."""
        kt = float(np.asarray(tau) @ self.kappa_tensor() @ np.asarray(tau))
        return self.mu_f * self.gamma / math.sqrt(kt)

    @classmethod
    def from_young_poisson(cls, young: float, poisson: float, **kw) -> "PhysicalParams":
        mu, lam = lame_from_young_poisson(young, poisson)
        return cls(mu_p=mu, lambda_p=lam, **kw)

    def young_poisson(self):
        mu, lam = self.mu_p, self.lambda_p
        nu = lam / (2.0 * (lam + mu))
        return mu * 2.0 * (1.0 + nu), nu


def lame_from_young_poisson(young: float, poisson: float):
    """(mu, lambda) from (E, nu) with lambda = E nu / ((1+nu)(1-2nu))."""
    if not 0.0 < poisson < 0.5:
        raise ScenarioError("Poisson ratio must lie in (0, 0.5)")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    return mu, lam


@dataclass
class RobinParams:
    """Interface transmission weights; all strictly positive."""

    L1: float
    L2: float
    L3: float

    def __post_init__(self):
        if min(self.L1, self.L2, self.L3) <= 0:
            raise ScenarioError("Robin parameters must be positive")


@dataclass
class TimeGrid:
    """Uniform time grid; discrete derivatives are backward quotients."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 1:
            raise ScenarioError("need dt > 0 and n_steps >= 1")

    @property
    def final_time(self) -> float:
        return self.dt * self.n_steps


@dataclass
class FieldBC:
    """Essential-condition assignment of one field.

    ``value(t, xy)`` supplies lift data on constrained nodes (zero if None);
    ``component_tags`` constrains a single vector component, used for
    symmetry planes on axis-aligned sides.
    """

    dirichlet_tags: tuple = ()
    component_tags: dict = field(default_factory=dict)
    value: object = None


@dataclass
class Scenario:
    """Complete problem definition consumed by the solvers."""

    name: str
    fluid_rect: tuple
    poro_rect: tuple
    fluid_tags: dict
    poro_tags: dict
    params: PhysicalParams
    robin: RobinParams
    time: TimeGrid
    h: float
    bc: dict = field(default_factory=dict)
    fluid_traction: dict = field(default_factory=dict)   # tag -> fn(t, xy) -> (n, 2)
    poro_traction: dict = field(default_factory=dict)
    forcing: object = None       # None means homogeneous data
    exact: object = None
    interface_flux_mismatch: object = None  # fn(t, xy) -> (n,), zero if None
    initial: str = "rest"        # "rest" or "exact"

    def field_bc(self, name: str) -> FieldBC:
        return self.bc.get(name, FieldBC())


# ---------------------------------------------------------------------------
# manufactured solution
# ---------------------------------------------------------------------------

class ManufacturedSolution:
    """Closed-form fields on the stacked squares (0,1)^2 over (0,1)x(-1,0).

    The displacement equals the fluid velocity, the volumetric strain scales
    like 1/(lambda_p + 1), and all stress-type interface conditions hold for
    every lambda_p.  The normal Darcy flux does not vanish on the interface,
    so the mass-conservation condition carries a known mismatch returned by
    :meth:`interface_flux_mismatch`.
    """

    def __init__(self, params: PhysicalParams):
        self.params = params
        self.lam = params.lambda_p

    # -- primary fields ----------------------------------------------------
    def v_f(self, t, xy):
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        return np.column_stack([
            et * np.cos(TWO_PI * x) * np.sin(TWO_PI * y),
            et * (np.cos(y) / (self.lam + 1.0) - np.cos(TWO_PI * y) * np.sin(TWO_PI * x)),
        ])

    def grad_v_f(self, t, xy):
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        g = np.empty((len(xy), 2, 2))
        g[:, 0, 0] = -TWO_PI * et * np.sin(TWO_PI * x) * np.sin(TWO_PI * y)
        g[:, 0, 1] = TWO_PI * et * np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
        g[:, 1, 0] = -TWO_PI * et * np.cos(TWO_PI * y) * np.cos(TWO_PI * x)
        g[:, 1, 1] = et * (-np.sin(y) / (self.lam + 1.0)
                           + TWO_PI * np.sin(TWO_PI * y) * np.sin(TWO_PI * x))
        return g

    def p_f(self, t, xy):
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        return et * np.cos(math.pi * x) * np.sin(math.pi * y) \
            + self.lam * et * np.sin(y) / (self.lam + 1.0)

    u_p = v_f
    grad_u_p = grad_v_f
    v_p = v_f          # time factor exp(t) makes the rate equal the field
    grad_v_p = grad_v_f

    def div_u_p(self, t, xy):
        return -math.exp(t) * np.sin(xy[:, 1]) / (self.lam + 1.0)

    def p_p(self, t, xy):
        x, y = xy[:, 0], xy[:, 1]
        return math.exp(t) * np.cos(math.pi * x) * np.sin(math.pi * y)

    def grad_p_p(self, t, xy):
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        return np.column_stack([
            -math.pi * et * np.sin(math.pi * x) * np.sin(math.pi * y),
            math.pi * et * np.cos(math.pi * x) * np.cos(math.pi * y),
        ])

    def beta_p(self, t, xy):
        # alpha p_p - lambda_p div u_p stays bounded as lambda_p grows
        return self.params.alpha * self.p_p(t, xy) \
            + self.lam / (self.lam + 1.0) * math.exp(t) * np.sin(xy[:, 1])

    # -- forcing (hard-coded closed forms) ---------------------------------
    def f_f(self, t, xy):
        p = self.params
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        c = p.rho_f + 8.0 * math.pi**2 * p.mu_f
        return np.column_stack([
            et * (c * np.cos(TWO_PI * x) * np.sin(TWO_PI * y)
                  - math.pi * np.sin(math.pi * x) * np.sin(math.pi * y)),
            et * (-c * np.cos(TWO_PI * y) * np.sin(TWO_PI * x)
                  + math.pi * np.cos(math.pi * x) * np.cos(math.pi * y)
                  + (self.lam + 2.0 * p.mu_f + p.rho_f) * np.cos(y) / (self.lam + 1.0)),
        ])

    def phi_f(self, t, xy):
        return -math.exp(t) * np.sin(xy[:, 1]) / (self.lam + 1.0)

    def f_p(self, t, xy):
        p = self.params
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        c = p.rho_p + 8.0 * math.pi**2 * p.mu_p
        return np.column_stack([
            et * (c * np.cos(TWO_PI * x) * np.sin(TWO_PI * y)
                  - p.alpha * math.pi * np.sin(math.pi * x) * np.sin(math.pi * y)),
            et * (-c * np.cos(TWO_PI * y) * np.sin(TWO_PI * x)
                  + p.alpha * math.pi * np.cos(math.pi * x) * np.cos(math.pi * y)
                  + (self.lam + 2.0 * p.mu_p + p.rho_p) * np.cos(y) / (self.lam + 1.0)),
        ])

    def phi_p(self, t, xy):
        p = self.params
        x, y = xy[:, 0], xy[:, 1]
        et = math.exp(t)
        k = p.kappa_scalar()
        return et * ((p.c0 + 2.0 * math.pi**2 * k / p.mu_f)
                     * np.cos(math.pi * x) * np.sin(math.pi * y)
                     - p.alpha * np.sin(y) / (self.lam + 1.0))

    def interface_flux_mismatch(self, t, xy):
        """Residual of the interface mass balance left by the analytic fields."""
        k = self.params.kappa_scalar()
        return -(k / self.params.mu_f) * math.pi * math.exp(t) * np.cos(math.pi * xy[:, 0])


def inlet_pressure(t: float) -> float:
    """Inlet pressure pulse: half-cosine ramp to 13334 dyn/cm^2 over 3 ms."""
    p_max = 13334.0
    t_max = 0.003
    if t > t_max:
        return 0.0
    return 0.5 * p_max * (1.0 - math.cos(TWO_PI * t / t_max))


# ---------------------------------------------------------------------------
# scenario catalog
# ---------------------------------------------------------------------------

def manufactured_scenario(lambda_p: float = 1.0, h: float = 1 / 8, dt: float | None = None,
                          robin: RobinParams | None = None,
                          final_time: float = 1.0) -> Scenario:
    """Stacked unit squares with analytic fields; all outer sides essential."""
    if dt is None:
        dt = h * h
    n_steps = max(1, round(final_time / dt))
    params = PhysicalParams(lambda_p=lambda_p)
    exact = ManufacturedSolution(params)
    if robin is None:
        # L3 follows the permeability scale kappa / mu_f
        robin = RobinParams(L1=1.0, L2=1.0, L3=params.kappa_scalar() / params.mu_f)
    bc = {
        "v_f": FieldBC(dirichlet_tags=("dirichlet_velocity",), value=exact.v_f),
        "u_p": FieldBC(dirichlet_tags=("dirichlet_velocity",), value=exact.u_p),
        "v_p": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "p_p": FieldBC(dirichlet_tags=("dirichlet_velocity",), value=exact.p_p),
    }
    return Scenario(
        name="manufactured",
        fluid_rect=(0.0, 1.0, 0.0, 1.0),
        poro_rect=(0.0, 1.0, -1.0, 0.0),
        fluid_tags={"left": "dirichlet_velocity", "right": "dirichlet_velocity",
                    "top": "dirichlet_velocity", "bottom": "interface"},
        poro_tags={"left": "dirichlet_velocity", "right": "dirichlet_velocity",
                   "bottom": "dirichlet_velocity", "top": "interface"},
        params=params,
        robin=robin,
        time=TimeGrid(dt=dt, n_steps=n_steps),
        h=h,
        bc=bc,
        forcing=exact,
        exact=exact,
        interface_flux_mismatch=exact.interface_flux_mismatch,
        initial="exact",
    )


def cantilever_scenario(h: float = 0.05, dt: float = 1e-5, n_steps: int = 10,
                        robin: RobinParams | None = None) -> Scenario:
    """Clamped poroelastic block pulled sideways under a quiescent Stokes layer.

    Storage-free, low-permeability regime with a small time step; the bottom
    boundary is drained of neither flow nor pressure (all sides no-flow), the
    setting in which naive displacement-pressure pairs oscillate.
    """
    params = PhysicalParams.from_young_poisson(
        1e5, 0.4, rho_f=1.0, mu_f=1e-2, rho_p=1e-10, alpha=0.93, c0=0.0, kappa=1e-7,
    )
    if robin is None:
        robin = RobinParams(L1=1e3, L2=1e3, L3=params.kappa_scalar() / params.mu_f)

    def left_traction(t, xy):
        out = np.zeros((len(xy), 2))
        out[:, 0] = -1.0
        return out

    bc = {
        "v_f": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "u_p": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "v_p": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "p_p": FieldBC(),  # no-flow on every outer side
    }
    return Scenario(
        name="cantilever",
        fluid_rect=(0.0, 1.0, 0.0, 1.0),
        poro_rect=(0.0, 1.0, -1.0, 0.0),
        fluid_tags={"left": "dirichlet_velocity", "right": "dirichlet_velocity",
                    "top": "neumann_traction", "bottom": "interface"},
        poro_tags={"left": "neumann_traction", "right": "external",
                   "bottom": "dirichlet_velocity", "top": "interface"},
        params=params,
        robin=robin,
        time=TimeGrid(dt=dt, n_steps=n_steps),
        h=h,
        bc=bc,
        poro_traction={"neumann_traction": left_traction},
        initial="rest",
    )


BLOODFLOW_L = {1: 1e3, 2: 1e2, 3: 1e4}


def bloodflow_scenario(case: int = 1, h: float = 5e-2, dt: float = 5e-5,
                       final_time: float = 0.014, wall_thickness: float = 0.1,
                       robin: RobinParams | None = None) -> Scenario:
    """Pressure-pulse propagation in the upper half of an idealized artery.

    Lumen (0,6) x (0,0.5) with a symmetry plane at y = 0; the poroelastic
    wall sits on top, clamped at its ends, traction-free and impermeable on
    the outer surface, and supported by a volumetric spring term.
    """
    if case not in BLOODFLOW_L:
        raise ScenarioError(f"unknown blood-flow case {case!r}")
    params = PhysicalParams(
        rho_f=1.0, mu_f=0.035, rho_p=1.1, mu_p=5.575e5, lambda_p=1.7e6,
        alpha=1.0, c0=1e-3, kappa=1e-6, gamma=1e3, spring=4e6,
    )
    if robin is None:
        robin = RobinParams(L1=BLOODFLOW_L[case], L2=BLOODFLOW_L[case], L3=1e-6)

    def inlet_traction(t, xy):
        # total stress -p_in(t) n on the inlet side, outward normal (-1, 0)
        out = np.zeros((len(xy), 2))
        out[:, 0] = inlet_pressure(t)
        return out

    radius = 0.5
    bc = {
        "v_f": FieldBC(component_tags={"symmetry": 1}),
        "u_p": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "v_p": FieldBC(dirichlet_tags=("dirichlet_velocity",)),
        "p_p": FieldBC(),  # impermeable outer wall
    }
    n_steps = max(1, round(final_time / dt))
    return Scenario(
        name="bloodflow",
        fluid_rect=(0.0, 6.0, 0.0, radius),
        poro_rect=(0.0, 6.0, radius, radius + wall_thickness),
        fluid_tags={"left": "inlet", "right": "outlet",
                    "bottom": "symmetry", "top": "interface"},
        poro_tags={"left": "dirichlet_velocity", "right": "dirichlet_velocity",
                   "top": "external", "bottom": "interface"},
        params=params,
        robin=robin,
        time=TimeGrid(dt=dt, n_steps=n_steps),
        h=h,
        bc=bc,
        fluid_traction={"inlet": inlet_traction},
        initial="rest",
    )


def scenario_catalog(name: str, **kwargs) -> Scenario:
    """Fully populated benchmark scenario by name."""
    builders = {
        "manufactured": manufactured_scenario,
        "cantilever": cantilever_scenario,
        "bloodflow": bloodflow_scenario,
    }
    if name not in builders:
        raise ScenarioError(f"unknown scenario {name!r}")
    return builders[name](**kwargs)
