import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fpsi.physics import (
    ManufacturedSolution,
    PhysicalParams,
    RobinParams,
    ScenarioError,
    TimeGrid,
    inlet_pressure,
    lame_from_young_poisson,
    scenario_catalog,
)


def sample_points(rng, n, ylo, yhi):
    pts = rng.random((n, 2))
    pts[:, 1] = ylo + pts[:, 1] * (yhi - ylo)
    return pts


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@given(
    young=st.floats(min_value=1e2, max_value=1e9),
    poisson=st.floats(min_value=1e-3, max_value=0.499),
)
def test_young_poisson_roundtrip(young, poisson):
    mu, lam = lame_from_young_poisson(young, poisson)
    p = PhysicalParams(mu_p=mu, lambda_p=lam)
    e2, nu2 = p.young_poisson()
    assert abs(e2 - young) <= 1e-12 * young
    assert abs(nu2 - poisson) <= 1e-12


def test_param_validation():
    with pytest.raises(ScenarioError):
        PhysicalParams(mu_f=0.0)
    with pytest.raises(ScenarioError):
        PhysicalParams(alpha=0.0)
    with pytest.raises(ScenarioError):
        PhysicalParams(kappa=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ScenarioError):
        RobinParams(1.0, 0.0, 1.0)
    with pytest.raises(ScenarioError):
        TimeGrid(dt=-1.0, n_steps=3)


def test_c_bjs_scale():
    p = PhysicalParams(mu_f=2.0, gamma=3.0, kappa=4.0)
    assert abs(p.c_bjs((1.0, 0.0)) - 2.0 * 3.0 / 2.0) < 1e-15


# ---------------------------------------------------------------------------
# manufactured fields: finite-difference oracles
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_divergence_matches_finite_differences(lam):
    ex = ManufacturedSolution(PhysicalParams(lambda_p=lam))
    rng = np.random.default_rng(3)
    pts = sample_points(rng, 20, -0.9, -0.1)
    t, h = 0.4, 1e-5
    ex_div = ex.div_u_p(t, pts)
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    fd = (
        (ex.u_p(t, pts + dx)[:, 0] - ex.u_p(t, pts - dx)[:, 0])
        + (ex.u_p(t, pts + dy)[:, 1] - ex.u_p(t, pts - dy)[:, 1])
    ) / (2 * h)
    assert np.max(np.abs(fd - ex_div)) < 1e-8


@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_gradients_match_finite_differences(lam):
    ex = ManufacturedSolution(PhysicalParams(lambda_p=lam))
    rng = np.random.default_rng(4)
    t, h = 0.25, 1e-5
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    for fn, gradfn, dom in [
        (ex.v_f, ex.grad_v_f, (0.1, 0.9)),
        (ex.u_p, ex.grad_u_p, (-0.9, -0.1)),
    ]:
        pts = sample_points(rng, 15, *dom)
        g = gradfn(t, pts)
        fdx = (fn(t, pts + dx) - fn(t, pts - dx)) / (2 * h)
        fdy = (fn(t, pts + dy) - fn(t, pts - dy)) / (2 * h)
        assert np.max(np.abs(g[:, :, 0] - fdx)) < 1e-7
        assert np.max(np.abs(g[:, :, 1] - fdy)) < 1e-7
    pts = sample_points(rng, 15, -0.9, -0.1)
    g = ex.grad_p_p(t, pts)
    fdx = (ex.p_p(t, pts + dx) - ex.p_p(t, pts - dx)) / (2 * h)
    fdy = (ex.p_p(t, pts + dy) - ex.p_p(t, pts - dy)) / (2 * h)
    assert np.max(np.abs(g[:, 0] - fdx)) < 1e-7
    assert np.max(np.abs(g[:, 1] - fdy)) < 1e-7


def _stress_fluid(ex, t, pts):
    g = ex.grad_v_f(t, pts)
    p = ex.p_f(t, pts)
    sig = ex.params.mu_f * (g + np.swapaxes(g, 1, 2))
    sig[:, 0, 0] -= p
    sig[:, 1, 1] -= p
    return sig


def _stress_poro(ex, t, pts):
    g = ex.grad_u_p(t, pts)
    sig = ex.params.mu_p * (g + np.swapaxes(g, 1, 2))
    trace = ex.params.lambda_p * ex.div_u_p(t, pts) - ex.params.alpha * ex.p_p(t, pts)
    sig[:, 0, 0] += trace
    sig[:, 1, 1] += trace
    return sig


@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_fluid_momentum_forcing_matches_fd(lam):
    ex = ManufacturedSolution(PhysicalParams(lambda_p=lam))
    rng = np.random.default_rng(5)
    pts = sample_points(rng, 12, 0.1, 0.9)
    t, h = 0.3, 1e-4
    dvdt = (ex.v_f(t + h, pts) - ex.v_f(t - h, pts)) / (2 * h)
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    div_sig = (
        (_stress_fluid(ex, t, pts + dx) - _stress_fluid(ex, t, pts - dx))[:, :, 0]
        + (_stress_fluid(ex, t, pts + dy) - _stress_fluid(ex, t, pts - dy))[:, :, 1]
    ) / (2 * h)
    resid = ex.params.rho_f * dvdt - div_sig - ex.f_f(t, pts)
    assert np.max(np.abs(resid)) < 5e-4  # second-order in the step


@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_poro_momentum_forcing_matches_fd(lam):
    ex = ManufacturedSolution(PhysicalParams(lambda_p=lam))
    rng = np.random.default_rng(6)
    pts = sample_points(rng, 12, -0.9, -0.1)
    t, h = 0.3, 1e-4
    dvdt = (ex.v_p(t + h, pts) - ex.v_p(t - h, pts)) / (2 * h)
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    div_sig = (
        (_stress_poro(ex, t, pts + dx) - _stress_poro(ex, t, pts - dx))[:, :, 0]
        + (_stress_poro(ex, t, pts + dy) - _stress_poro(ex, t, pts - dy))[:, :, 1]
    ) / (2 * h)
    resid = ex.params.rho_p * dvdt - div_sig - ex.f_p(t, pts)
    assert np.max(np.abs(resid)) < 5e-4


def test_phi_f_equals_fd_divergence():
    ex = ManufacturedSolution(PhysicalParams())
    rng = np.random.default_rng(7)
    pts = sample_points(rng, 12, 0.1, 0.9)
    pts[0] = (0.25, 0.25)
    t, h = 0.0, 1e-5
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    fd = (
        (ex.v_f(t, pts + dx)[:, 0] - ex.v_f(t, pts - dx)[:, 0])
        + (ex.v_f(t, pts + dy)[:, 1] - ex.v_f(t, pts - dy)[:, 1])
    ) / (2 * h)
    assert np.max(np.abs(fd - ex.phi_f(t, pts))) < 1e-8


@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_pore_pressure_forcing_matches_fd(lam):
    p = PhysicalParams(lambda_p=lam)
    ex = ManufacturedSolution(p)
    rng = np.random.default_rng(8)
    pts = sample_points(rng, 12, -0.9, -0.1)
    t, h = 0.3, 1e-4
    k = p.kappa_scalar()
    dpdt = (ex.p_p(t + h, pts) - ex.p_p(t - h, pts)) / (2 * h)
    dbdt = (ex.beta_p(t + h, pts) - ex.beta_p(t - h, pts)) / (2 * h)
    dx = np.array([h, 0.0])
    dy = np.array([0.0, h])
    lap = (
        (ex.grad_p_p(t, pts + dx) - ex.grad_p_p(t, pts - dx))[:, 0]
        + (ex.grad_p_p(t, pts + dy) - ex.grad_p_p(t, pts - dy))[:, 1]
    ) / (2 * h)
    resid = ((p.c0 + p.alpha**2 / lam) * dpdt - (p.alpha / lam) * dbdt
             - (k / p.mu_f) * lap - ex.phi_p(t, pts))
    assert np.max(np.abs(resid)) < 5e-4


def test_poro_forcing_bounded_at_extreme_lambda():
    ex = ManufacturedSolution(PhysicalParams(lambda_p=1e10))
    rng = np.random.default_rng(9)
    pts = sample_points(rng, 50, -0.99, -0.01)
    f = ex.f_p(1.0, pts)
    assert np.all(np.isfinite(f))
    assert np.max(np.abs(f)) < 1e3


# ---------------------------------------------------------------------------
# interface conditions of the analytic fields
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [1.0, 1e10])
def test_interface_conditions(lam):
    p = PhysicalParams(lambda_p=lam)
    ex = ManufacturedSolution(p)
    x = np.linspace(0.013, 0.987, 20)
    pts = np.column_stack([x, np.zeros_like(x)])
    t = 0.37
    n_f = np.array([0.0, -1.0])
    n_p = np.array([0.0, 1.0])
    tau = np.array([1.0, 0.0])

    sig_f = _stress_fluid(ex, t, pts)
    sig_p = _stress_poro(ex, t, pts)
    v_f = ex.v_f(t, pts)
    v_p = ex.v_p(t, pts)

    # normal-stress balance and total-stress balance hold exactly
    assert np.max(np.abs(sig_f @ n_f @ n_f + ex.p_p(t, pts))) < 1e-8
    assert np.max(np.abs(sig_f @ n_f + sig_p @ n_p)) < 1e-8

    # tangential slip law; both sides vanish since v_f equals the solid rate
    c_bjs = p.c_bjs(tau)
    lhs = -c_bjs * (v_f - v_p) @ tau
    rhs = (sig_f @ n_f) @ tau
    assert np.max(np.abs(lhs - rhs)) < 1e-8

    # mass balance carries the documented flux mismatch and nothing else
    darcy = -(p.kappa_scalar() / p.mu_f) * ex.grad_p_p(t, pts)
    resid = v_f @ n_f + (v_p + darcy) @ n_p
    assert np.max(np.abs(resid - ex.interface_flux_mismatch(t, pts))) < 1e-8
    assert np.max(np.abs(ex.interface_flux_mismatch(t, pts))) > 1.0


# ---------------------------------------------------------------------------
# inlet pulse and catalog values
# ---------------------------------------------------------------------------

def test_inlet_pressure_values():
    assert inlet_pressure(0.0) == 0.0
    assert abs(inlet_pressure(0.0015) - 13334.0) < 1e-12
    assert inlet_pressure(0.01) == 0.0


def test_inlet_pressure_continuous_at_cutoff():
    eps = 1e-9
    assert abs(inlet_pressure(0.003 - eps)) < 1e-4
    assert inlet_pressure(0.003) < 1e-12


def test_catalog_bloodflow_values():
    sc = scenario_catalog("bloodflow", case=1)
    assert sc.params.kappa_scalar() == 1e-6
    assert sc.params.spring == 4e6
    assert sc.params.c0 == 1e-3
    assert sc.params.mu_f == 0.035
    assert sc.robin.L1 == 1e3 and sc.robin.L3 == 1e-6
    assert scenario_catalog("bloodflow", case=3).robin.L2 == 1e4
    assert sc.time.dt == 5e-5
    assert abs(sc.time.final_time - 0.014) < 1e-12


def test_catalog_cantilever_values():
    sc = scenario_catalog("cantilever")
    assert sc.params.c0 == 0.0
    assert sc.params.alpha == 0.93
    e, nu = sc.params.young_poisson()
    assert abs(e - 1e5) < 1e-6 and abs(nu - 0.4) < 1e-12
    assert sc.params.kappa_scalar() == 1e-7
    assert sc.time.dt == 1e-5
    assert sc.robin.L3 == pytest.approx(1e-5)


def test_catalog_manufactured_values():
    sc = scenario_catalog("manufactured", lambda_p=1e10)
    p = sc.params
    assert (p.rho_f, p.rho_p, p.mu_f, p.mu_p, p.alpha, p.c0) == (1, 1, 1, 1, 1, 1)
    assert p.lambda_p == 1e10
    assert sc.robin.L1 == 1.0 and sc.robin.L3 == 1.0
    assert sc.initial == "exact"


def test_catalog_rejects_unknown():
    with pytest.raises(ScenarioError):
        scenario_catalog("no_such_case")
    with pytest.raises(ScenarioError):
        scenario_catalog("bloodflow", case=9)
