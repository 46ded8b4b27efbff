"""Scenario definitions from plain-text config files.

Format: UTF-8 with ``[section]`` headers and ``key = value`` lines.  The
sections are ``geometry``, ``params``, ``robin``, ``time``, ``bc``, and
``output``; unknown sections or keys are rejected.  Custom scenarios start
from rest with homogeneous forcing; constant tractions and the standard
inlet pulse are available through the ``bc`` section.
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from .mesh import BOUNDARY_TAGS, SIDES
from .physics import (
    FieldBC,
    PhysicalParams,
    RobinParams,
    Scenario,
    ScenarioError,
    TimeGrid,
    inlet_pressure,
    lame_from_young_poisson,
)


class ConfigError(ValueError):
    """Rejected configuration input."""


_GEOMETRY_KEYS = {"fluid_rect", "poro_rect", "h"} | {
    f"{dom}_{side}" for dom in ("fluid", "poro") for side in SIDES
}
_PARAM_KEYS = {"rho_f", "mu_f", "rho_p", "mu_p", "lambda_p", "alpha", "c0",
               "kappa", "gamma", "spring", "gravity_x", "gravity_y",
               "young", "poisson"}
_ROBIN_KEYS = {"l1", "l2", "l3"}
_TIME_KEYS = {"dt", "n_steps"}
_BC_FIXED_KEYS = {"v_f_dirichlet", "u_p_dirichlet", "p_p_dirichlet", "inlet_pulse"}
_OUTPUT_KEYS = {"dir", "vtk_every"}

SECTIONS = ("geometry", "params", "robin", "time", "bc", "output")


def _floats(text: str, n: int, what: str):
    parts = text.replace(",", " ").split()
    if len(parts) != n:
        raise ConfigError(f"{what} needs {n} numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _tags(text: str):
    tags = tuple(t.strip() for t in text.split(",") if t.strip())
    for t in tags:
        if t not in BOUNDARY_TAGS:
            raise ConfigError(f"unknown boundary tag {t!r}")
    return tags


def _constant_traction(vec):
    arr = np.asarray(vec, dtype=float)

    def fn(t, xy):
        return np.tile(arr, (len(xy), 1))

    return fn


def _pulse_traction(normal):
    nx, ny = normal

    def fn(t, xy):
        p = inlet_pressure(t)
        out = np.empty((len(xy), 2))
        out[:, 0] = -p * nx
        out[:, 1] = -p * ny
        return out

    return fn


_SIDE_NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0),
                 "bottom": (0.0, -1.0), "top": (0.0, 1.0)}
_SIDE_COMPONENT = {"left": 0, "right": 0, "bottom": 1, "top": 1}


def load_scenario(path) -> Scenario:
    """Build a custom scenario from a config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from err

    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for required in ("geometry", "time"):
        if required not in cp:
            raise ConfigError(f"missing [{required}] section")

    geo = cp["geometry"]
    _check_keys(geo, _GEOMETRY_KEYS, "geometry")
    fluid_rect = _floats(geo.get("fluid_rect", "0 1 0 1"), 4, "fluid_rect")
    poro_rect = _floats(geo.get("poro_rect", "0 1 -1 0"), 4, "poro_rect")
    h = float(geo.get("h", "0.1"))
    fluid_tags, poro_tags = {}, {}
    for side in SIDES:
        fluid_tags[side] = geo.get(f"fluid_{side}", "external")
        poro_tags[side] = geo.get(f"poro_{side}", "external")
        for tag in (fluid_tags[side], poro_tags[side]):
            if tag not in BOUNDARY_TAGS:
                raise ConfigError(f"unknown boundary tag {tag!r}")
    if "interface" not in fluid_tags.values() or "interface" not in poro_tags.values():
        raise ConfigError("both domains need one side tagged 'interface'")

    kw = {}
    if "params" in cp:
        sec = cp["params"]
        _check_keys(sec, _PARAM_KEYS, "params")
        gx = float(sec.get("gravity_x", "0"))
        gy = float(sec.get("gravity_y", "0"))
        if "young" in sec or "poisson" in sec:
            if not ("young" in sec and "poisson" in sec):
                raise ConfigError("young and poisson must be given together")
            mu, lam = lame_from_young_poisson(
                float(sec["young"]), float(sec["poisson"]))
            kw["mu_p"], kw["lambda_p"] = mu, lam
        for key in ("rho_f", "mu_f", "rho_p", "mu_p", "lambda_p", "alpha",
                    "c0", "kappa", "gamma", "spring"):
            if key in sec:
                kw[key] = float(sec[key])
        kw["gravity"] = (gx, gy)
    try:
        params = PhysicalParams(**kw)
    except ScenarioError as err:
        raise ConfigError(str(err)) from err

    if "robin" in cp:
        sec = cp["robin"]
        _check_keys(sec, _ROBIN_KEYS, "robin")
        robin = RobinParams(
            L1=float(sec.get("l1", "1")), L2=float(sec.get("l2", "1")),
            L3=float(sec.get("l3", str(params.kappa_scalar() / params.mu_f))))
    else:
        robin = RobinParams(1.0, 1.0, params.kappa_scalar() / params.mu_f)

    sec = cp["time"]
    _check_keys(sec, _TIME_KEYS, "time")
    try:
        time = TimeGrid(dt=float(sec.get("dt", "1e-3")),
                        n_steps=int(sec.get("n_steps", "10")))
    except ScenarioError as err:
        raise ConfigError(str(err)) from err

    bc = {"v_f": FieldBC(), "u_p": FieldBC(), "v_p": FieldBC(), "p_p": FieldBC()}
    fluid_traction, poro_traction = {}, {}
    if "bc" in cp:
        sec = cp["bc"]
        for key in sec:
            if key in _BC_FIXED_KEYS or key.startswith(("fluid_traction_",
                                                        "poro_traction_")):
                continue
            raise ConfigError(f"unknown key {key!r} in [bc]")
        if "v_f_dirichlet" in sec:
            bc["v_f"] = FieldBC(dirichlet_tags=_tags(sec["v_f_dirichlet"]))
        if "u_p_dirichlet" in sec:
            tags = _tags(sec["u_p_dirichlet"])
            bc["u_p"] = FieldBC(dirichlet_tags=tags)
            bc["v_p"] = FieldBC(dirichlet_tags=tags)
        if "p_p_dirichlet" in sec:
            bc["p_p"] = FieldBC(dirichlet_tags=_tags(sec["p_p_dirichlet"]))
        for key in sec:
            if key.startswith("fluid_traction_"):
                tag = key[len("fluid_traction_"):]
                fluid_traction[tag] = _constant_traction(
                    _floats(sec[key], 2, key))
            elif key.startswith("poro_traction_"):
                tag = key[len("poro_traction_"):]
                poro_traction[tag] = _constant_traction(_floats(sec[key], 2, key))
        if sec.get("inlet_pulse", "false").lower() in ("1", "true", "yes"):
            for side, tag in fluid_tags.items():
                if tag == "inlet":
                    fluid_traction["inlet"] = _pulse_traction(_SIDE_NORMALS[side])

    # a symmetry side constrains the normal velocity component
    comp_tags = {}
    for side, tag in fluid_tags.items():
        if tag == "symmetry":
            comp_tags[tag] = _SIDE_COMPONENT[side]
    if comp_tags:
        bc["v_f"] = FieldBC(dirichlet_tags=bc["v_f"].dirichlet_tags,
                            component_tags=comp_tags)

    out_dir, vtk_every = None, 0
    if "output" in cp:
        sec = cp["output"]
        _check_keys(sec, _OUTPUT_KEYS, "output")
        out_dir = sec.get("dir", None)
        vtk_every = int(sec.get("vtk_every", "0"))

    scenario = Scenario(
        name="custom", fluid_rect=fluid_rect, poro_rect=poro_rect,
        fluid_tags=fluid_tags, poro_tags=poro_tags, params=params,
        robin=robin, time=time, h=h, bc=bc,
        fluid_traction=fluid_traction, poro_traction=poro_traction,
        initial="rest",
    )
    scenario.output_dir = out_dir
    scenario.vtk_every = vtk_every
    return scenario


def _check_keys(section, allowed, name):
    unknown = set(section.keys()) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
