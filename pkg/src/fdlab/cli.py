"""Batch front end: solve / verify / geometry / sweep.

Subcommands communicate through files only: a flat ``key = value``
config, a ``t,r,u`` trajectory CSV, and the report CSVs declared by the
analysis modules.  Floats are serialized with 17 significant digits so
reruns on identical inputs are byte identical.

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import (pick_admissible_config, subsolution,
                         verify_subsolution)
from .geometry import (blowdown_diagnostics, completeness_indicator,
                       export_blowdown, export_end_fits, export_geometry,
                       fit_end_asymptotics, geometry_profile,
                       volume_form_limits)
from .grid import RadialGrid, build_grid
from .params import (ConfigError, FlowParams, flow_params_from_config,
                     initial_profile, parse_config)
from .solver import (NewtonDivergence, PositivityLoss, SolverConfig,
                     Trajectory, export_clause_report, export_trajectory,
                     import_trajectory, solve, verify_theorem_clauses)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

SANDWICH_TOL = 1e-6
SUBSOL_RESIDUAL_TOL = 1e-8
GEOMETRY_SLOPE_TOL = 0.01
GEOMETRY_ORDER_TOL = 0.15
VOLUME_TOL = 0.02
BLOWDOWN_WINDOW = (0.5, 2.0)


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    tool_version: str
    command: str
    config: dict
    outputs: dict = field(default_factory=dict)
    subsolution: dict | None = None
    passed: bool = True

    def write(self, out_dir: Path):
        path = out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _effective_config(cfg: dict) -> dict:
    """Apply reference-setup defaults for everything not in the file."""
    out = {
        "r_min": 1e-3, "r_max": 1e3, "N": 2048,
        "dt0": 1e-4, "t_end": 10.0, "theta": 1.0,
        "newton_tol": 1e-12, "newton_max": 30, "step_growth": 1.2,
        "store_stride": 1, "margin": 0.1,
        "tol_clause_i": 1e-8, "tol_clause_ii": 1e-8,
        "tol_clause_iii": 0.02, "tol_clause_iv": 0.05,
        "tol_clause_v": 0.02,
        "tol_sandwich": SANDWICH_TOL,
        "tol_subsol_residual": SUBSOL_RESIDUAL_TOL,
    }
    out.update(cfg)
    return out


def _build_problem(cfg: dict):
    p = flow_params_from_config(cfg)
    grid = build_grid(float(cfg["r_min"]), float(cfg["r_max"]),
                      int(cfg["N"]))
    kwargs = {"dt0": float(cfg["dt0"]), "t_end": float(cfg["t_end"]),
              "theta": float(cfg["theta"]),
              "newton_tol": float(cfg["newton_tol"]),
              "newton_max": int(cfg["newton_max"]),
              "step_growth": float(cfg["step_growth"])}
    if "dt_cap" in cfg:
        kwargs["dt_cap"] = float(cfg["dt_cap"])
    try:
        solver_cfg = SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return p, grid, solver_cfg


def cmd_solve(config_path, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _effective_config(parse_config(config_path))
    p, grid, solver_cfg = _build_problem(cfg)
    tr = solve(p, grid, solver_cfg)
    traj_path = out_dir / "trajectory.csv"
    export_trajectory(tr, traj_path, stride=int(cfg["store_stride"]))
    manifest = RunManifest(__version__, "solve", cfg,
                           outputs={"trajectory": traj_path.name})
    if tr.sub_cfg is not None:
        manifest.subsolution = asdict(tr.sub_cfg)
    manifest.write(out_dir)
    return EXIT_OK


def _load_trajectory(traj_path, cfg) -> tuple[FlowParams, RadialGrid,
                                              Trajectory]:
    p, grid, _ = _build_problem(cfg)
    tr = import_trajectory(traj_path, p, grid)
    return p, grid, tr


def cmd_verify(traj_path, config_path, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _effective_config(parse_config(config_path))
    try:
        p, grid, tr = _load_trajectory(traj_path, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    tols = {"i": float(cfg["tol_clause_i"]), "ii": float(cfg["tol_clause_ii"]),
            "iii": float(cfg["tol_clause_iii"]),
            "iv": float(cfg["tol_clause_iv"]), "v": float(cfg["tol_clause_v"])}
    clause_rows = verify_theorem_clauses(tr, tols)
    clause_path = out_dir / "clause_report.csv"
    export_clause_report(clause_rows, clause_path)

    sub_cfg = pick_admissible_config(p, margin=float(cfg["margin"]))
    swich_tol = float(cfg["tol_sandwich"])
    upper = initial_profile(p, grid.nodes)
    sandwich_rows = []
    envelope_path = out_dir / "envelope.csv"
    with open(envelope_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,r,lower,u,upper\n")
        for t, fld in zip(tr.times, tr.fields):
            lower = subsolution(p, sub_cfg, grid.nodes, t)
            low = float(np.max((lower - fld.values) / upper))
            high = float(np.max((fld.values - upper) / upper))
            sandwich_rows.append(
                {"t": t, "clause": "sandwich_lower", "metric": low,
                 "tolerance": swich_tol, "pass": low <= swich_tol})
            sandwich_rows.append(
                {"t": t, "clause": "sandwich_upper", "metric": high,
                 "tolerance": swich_tol, "pass": high <= swich_tol})
            for rj, lo, uj, up in zip(grid.nodes, lower, fld.values, upper):
                fh.write(f"{_fmt(t)},{_fmt(rj)},{_fmt(lo)},{_fmt(uj)},"
                         f"{_fmt(up)}\n")
    sandwich_path = out_dir / "sandwich_report.csv"
    export_clause_report(sandwich_rows, sandwich_path)

    sub_times = np.linspace(0.0, tr.times[-1], 64)
    sub_rows = verify_subsolution(
        p, sub_cfg, sub_times,
        residual_tol=float(cfg["tol_subsol_residual"]))
    subsol_path = out_dir / "subsolution_report.csv"
    with open(subsol_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,r,t,quantity,bound,pass\n")
        for row in sub_rows:
            fh.write(f"{row['kind']},{_fmt(row['r'])},{_fmt(row['t'])},"
                     f"{_fmt(row['quantity'])},{_fmt(row['bound'])},"
                     f"{str(row['pass']).lower()}\n")

    all_rows = clause_rows + sandwich_rows + sub_rows
    passed = all(r["pass"] for r in all_rows)
    manifest = RunManifest(
        __version__, "verify", cfg,
        outputs={"clauses": clause_path.name, "sandwich": sandwich_path.name,
                 "subsolution": subsol_path.name,
                 "envelope": envelope_path.name},
        subsolution=asdict(sub_cfg), passed=passed)
    manifest.write(out_dir)
    if not passed:
        failing = sorted({str(r.get("clause", r.get("kind")))
                          for r in all_rows if not r["pass"]})
        print(f"verification failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_geometry(traj_path, config_path, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _effective_config(parse_config(config_path))
    try:
        p, grid, tr = _load_trajectory(traj_path, cfg)
        p.require_geometry_admissible()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    profiles = [geometry_profile(f, p) for f in tr.fields]
    geom_path = out_dir / "geometry.csv"
    export_geometry(profiles, geom_path)

    # end asymptotics describe the initial metric; later slices no
    # longer carry the deep expansion at trajectory resolution
    first = profiles[0]
    fits = [(first.time, fit_end_asymptotics(first, "E1", p)),
            (first.time, fit_end_asymptotics(first, "E2", p))]
    endfit_path = out_dir / "endfit.csv"
    export_end_fits(fits, endfit_path)

    blow_rows = blowdown_diagnostics(tr, BLOWDOWN_WINDOW)
    blow_path = out_dir / "blowdown.csv"
    export_blowdown(blow_rows, blow_path)

    passed = True
    for prof, fld in zip(profiles, tr.fields):
        if not np.all(prof.scal < 0):
            passed = False
        ends = completeness_indicator(fld, p)
        if not (ends["inner"]["complete"] and ends["outer"]["complete"]):
            passed = False
        v_in, v_out = volume_form_limits(fld, p)
        if abs(v_in - p.c1 ** (2.0 * p.n / (p.n + 2.0))) \
                > VOLUME_TOL * p.c1 ** (2.0 * p.n / (p.n + 2.0)):
            passed = False
        if abs(v_out - p.c2 ** (2.0 * p.n / (p.n + 2.0))) \
                > VOLUME_TOL * p.c2 ** (2.0 * p.n / (p.n + 2.0)):
            passed = False
    for t, fit in fits:
        if t != tr.times[0]:
            continue
        if fit.end_id == "E2" and abs(fit.fitted_slope - fit.ref_slope) \
                > GEOMETRY_SLOPE_TOL * fit.ref_slope:
            passed = False
        if abs(fit.fitted_order - fit.ref_order) \
                > GEOMETRY_ORDER_TOL * abs(fit.ref_order):
            passed = False

    manifest = RunManifest(
        __version__, "geometry", cfg,
        outputs={"geometry": geom_path.name, "endfit": endfit_path.name,
                 "blowdown": blow_path.name},
        passed=passed)
    manifest.write(out_dir)
    if not passed:
        print("geometry checks failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _sweep_one(args) -> tuple[str, int]:
    config_path, out_dir = args
    try:
        code = cmd_solve(config_path, out_dir)
    except ConfigError:
        code = EXIT_CONFIG
    except (NewtonDivergence, PositivityLoss):
        code = EXIT_SOLVER
    return str(config_path), code


def cmd_sweep(configs_dir, out_dir, jobs: int) -> int:
    configs = sorted(Path(configs_dir).glob("*"))
    configs = [c for c in configs if c.is_file()]
    if not configs:
        raise ConfigError(f"no config files in {configs_dir}")
    tasks = [(cfg, Path(out_dir) / cfg.stem) for cfg in configs]
    results = {}
    if jobs <= 1:
        for task in tasks:
            name, code = _sweep_one(task)
            results[name] = code
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for name, code in pool.map(_sweep_one, tasks):
                results[name] = code
    worst = max(results.values(), default=EXIT_OK)
    for name, code in sorted(results.items()):
        print(f"{name}: exit {code}")
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fdlab",
        description="singular fast-diffusion runs, verification reports "
                    "and end-geometry analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="integrate and export t,r,u")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify",
                              help="clause, sandwich and residual reports")
    p_verify.add_argument("--traj", required=True)
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--out", required=True)

    p_geom = sub.add_parser("geometry",
                            help="arc length, curvature, end fits")
    p_geom.add_argument("--traj", required=True)
    p_geom.add_argument("--config", required=True)
    p_geom.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="run many configs in parallel")
    p_sweep.add_argument("--configs", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args.config, args.out)
        if args.command == "verify":
            return cmd_verify(args.traj, args.config, args.out)
        if args.command == "geometry":
            return cmd_geometry(args.traj, args.config, args.out)
        if args.command == "sweep":
            return cmd_sweep(args.configs, args.out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonDivergence, PositivityLoss) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
