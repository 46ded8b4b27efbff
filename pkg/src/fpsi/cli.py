"""Command-line driver for the built-in studies and custom runs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as xp
from .config import ConfigError, load_scenario
from .coupling import IterationLimitError, Simulation
from .linalg import SingularSystemError, SolveError
from .mesh import MeshError
from .output import vertex_values, write_csv, write_vtk
from .physics import ScenarioError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fpsi", description=__doc__)
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("convergence", help="manufactured refinement ladder")
    c.add_argument("--lambda", dest="lambda_p", type=float, default=1.0)
    c.add_argument("--mode", choices=("fourfield", "twofield"), default="fourfield")
    c.add_argument("--out", default="out")
    c.add_argument("--levels", type=int, default=4,
                   help="number of meshes starting at h=1/4")

    c = sub.add_parser("cantilever", help="early-time pressure profiles")
    c.add_argument("--mode", choices=("fourfield", "twofield", "both"),
                   default="both")
    c.add_argument("--out", default="out")

    c = sub.add_parser("bloodflow", help="arterial pulse benchmark")
    c.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    c.add_argument("--reference", action="store_true",
                   help="also run the strongly coupled reference")
    c.add_argument("--out", default="out")

    c = sub.add_parser("run", help="custom scenario from a config file")
    c.add_argument("config")

    c = sub.add_parser("audit", help="energy-balance audit of a config scenario")
    c.add_argument("config")
    c.add_argument("--steps", type=int, default=200)
    return p


def _cmd_convergence(args) -> int:
    hs = tuple(1.0 / 4 / 2**k for k in range(args.levels))
    table = xp.convergence_study(
        lambda_p=args.lambda_p, hs=hs, mode=args.mode, out_dir=args.out,
        observer=lambda r: print(
            f"h={r.h:g} dt={r.dt:g} " +
            " ".join(f"{c}={r.norm(c):.3e}" for c in xp.NORM_COLUMNS)),
    )
    fits = table.fitted_rates()
    print("fitted rates: " + " ".join(f"{c}={v:.2f}" for c, v in fits.items()))
    print(f"wrote {Path(args.out) / f'rates_lambda{args.lambda_p:g}_{args.mode}.csv'}")
    return EXIT_OK


def _cmd_cantilever(args) -> int:
    modes = ("fourfield", "twofield") if args.mode == "both" else (args.mode,)
    results = xp.run_cantilever(out_dir=args.out, modes=modes)
    for mode, metrics in results.items():
        for t, m in sorted(metrics.items()):
            print(f"{mode} t={t:g}: oscillation index {m.osc_index:.4f} "
                  f"(range {m.range:.4g})")
    return EXIT_OK


def _cmd_bloodflow(args) -> int:
    data = xp.run_bloodflow(case=args.case, out_dir=args.out,
                            reference=args.reference)
    for t, series in sorted(data["scheme"].items()):
        xs, up = series["u_py_interface"]
        line = f"t={t:g}: max wall lift {np.abs(up).max():.4e}"
        if data["reference"] is not None:
            xr, ur = data["reference"][t]["u_py_interface"]
            num = np.linalg.norm(up - ur)
            den = max(np.linalg.norm(ur), 1e-30)
            line += f", deviation from reference {num / den:.2%}"
        print(line)
    print(f"wrote series and snapshots under {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    out_dir = Path(getattr(scenario, "output_dir", None) or "out")
    vtk_every = getattr(scenario, "vtk_every", 0)
    sim = Simulation(scenario)
    state, robin = sim.initialize()
    for k in range(scenario.time.n_steps):
        state, robin = sim.advance(state, robin)
        if vtk_every and (k + 1) % vtk_every == 0:
            _dump_state(sim, state, out_dir)
    _dump_state(sim, state, out_dir)
    print(f"ran {scenario.time.n_steps} steps to t={state.t:g}; "
          f"outputs under {out_dir}")
    return EXIT_OK


def _dump_state(sim, state, out_dir):
    dom = sim.dom
    write_vtk(out_dir / f"fluid_t{state.t:.9g}.vtk", dom.mesh_f, {
        "velocity": vertex_values(dom.mesh_f, state.v_f, 2),
        "pressure": vertex_values(dom.mesh_f, state.p_f)})
    write_vtk(out_dir / f"wall_t{state.t:.9g}.vtk", dom.mesh_p, {
        "displacement": vertex_values(dom.mesh_p, state.u_p, 2),
        "pore_pressure": vertex_values(dom.mesh_p, state.p_p),
        "total_pressure": vertex_values(dom.mesh_p, state.beta_p)})


def _cmd_audit(args) -> int:
    scenario = load_scenario(args.config)
    report = xp.audit_run(scenario, n_steps=args.steps)
    out_dir = Path(getattr(scenario, "output_dir", None) or "out")
    rows = [
        [n + 1, report["fluid"][n], report["biot"][n], report["coupled"][n],
         report["energies"][n + 1]]
        for n in range(len(report["fluid"]))
    ]
    write_csv(out_dir / "audit.csv",
              ["step", "fluid_residual", "biot_residual", "coupled_residual",
               "energy"], rows)
    print(f"max balance residual {report['max_residual']:.3e}; "
          f"energy bound {'held' if report['energy_bound_ok'] else 'VIOLATED'}")
    return EXIT_OK if report["max_residual"] < 1e-7 else EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    handler = {
        "convergence": _cmd_convergence,
        "cantilever": _cmd_cantilever,
        "bloodflow": _cmd_bloodflow,
        "run": _cmd_run,
        "audit": _cmd_audit,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, ScenarioError, MeshError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularSystemError, SolveError, IterationLimitError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
