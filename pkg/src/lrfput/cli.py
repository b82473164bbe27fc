"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 admissibility failure,
4 solver non-convergence (or a failed sweep row), 5 simulation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, RunConfig
from .lattice_sim import SimulationError, init_from_wave, run
from .operators import per_m_table, write_per_m_csv
from .potentials import PotentialError, check_assumptions
from .solver import GuardError, NonAdmissibleError, NonConvergenceError, WaveSolution, solve

EXIT_OK, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_SOLVER, EXIT_SIMULATION = 0, 2, 3, 4, 5


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.section("output")["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: RunConfig, status: str, files: list,
                    rows=None, failures=None) -> None:
    manifest = {"command": command, "status": status, "config": cfg.to_dict(),
                "outputs": sorted(files), "rows": rows or [], "failures": failures or [],
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=_jsonable))


def _jsonable(o):
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"{type(o).__name__} is not JSON serialisable")


def cmd_check(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    K = cfg.kinetic_energy(fam)
    rep = check_assumptions(fam, K)
    json.dump(rep.to_dict(), sys.stdout, indent=1, default=_jsonable)
    sys.stdout.write("\n")
    return EXIT_OK if rep.passed else EXIT_ADMISSIBILITY


def _solve(cfg: RunConfig):
    fam = cfg.family()
    return solve(cfg.solver_config(fam), fam), fam


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _outdir(cfg)
    sol, fam = _solve(cfg)
    sol.to_json(out / "solution.json")
    sol.profile.to_csv(out / "profile.csv")
    write_per_m_csv(out / "per_m.csv", per_m_table(sol.profile, fam, sol.M))
    files = ["solution.json", "profile.csv", "per_m.csv"]
    _write_manifest(out, "solve", cfg, "ok", files)
    print(f"c = {sol.c:.12g}  P = {sol.P:.12g}  iterations = {sol.iterations}  "
          f"residual_l2 = {sol.residual['l2']:.3e}")
    return EXIT_OK


def _finish_rows(out, command, cfg, rows, csv_name) -> int:
    ex.write_sweep_csv(out / csv_name, rows)
    failures = [{"K": r.K, "delta": r.delta, "status": r.status, "message": r.message,
                 "checks": r.checks} for r in rows if not r.ok]
    status = "ok" if not failures else "failed"
    _write_manifest(out, command, cfg, status, [csv_name], [r.to_dict() for r in rows], failures)
    for r in rows:
        print(f"K = {r.K:.6g}  c = {r.c:.10g}  status = {r.status}")
    return EXIT_OK if not failures else EXIT_SOLVER


def cmd_sweep(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    sw = cfg.section("sweep")
    base = cfg.solver_config(fam, K=float(sw["K_list"][0]))
    rows = ex.sweep_k(sw["K_list"], fam, base, jobs=args.jobs, warm_start=bool(sw["warm_start"]))
    return _finish_rows(_outdir(cfg), "sweep", cfg, rows, "sweep.csv")


def cmd_highenergy(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    deltas = cfg.section("sweep")["delta_list"]
    base = cfg.solver_config(fam, K=(1 - float(deltas[0])) * fam.nu**2 / 2)
    if base.grid.q % 2 == 0:
        print("note: odd q places the indicator edges on cell edges", file=sys.stderr)
    rows = ex.high_energy_sweep(deltas, fam, base, jobs=args.jobs)
    code = _finish_rows(_outdir(cfg), "highenergy", cfg, rows, "highenergy.csv")
    print(f"smallest delta reached: {ex.smallest_delta(rows)}")
    return code


def cmd_qstudy(cfg: RunConfig, args) -> int:
    fam = cfg.family()
    sw = cfg.section("sweep")
    rows = ex.q_testfunction_study(sw["L_list"], float(sw["L_K"]), fam, q=int(sw["L_q"]))
    out = _outdir(cfg)
    ex.write_table_csv(out / "qstudy.csv", rows, ("L", "Qcal_WL", "lower_bound", "Q_of_K"))
    bad = [r for r in rows if not r["sandwich"]]
    _write_manifest(out, "qstudy", cfg, "ok" if not bad else "failed", ["qstudy.csv"], rows,
                    [{"L": r["L"], "status": "sandwich violated"} for r in bad])
    for r in rows:
        print(f"L = {r['L']}  Q(W_L) = {r['Qcal_WL']:.10g}  bound = {r['lower_bound']:.10g}  "
              f"Q(K) = {r['Q_of_K']:.10g}")
    return EXIT_OK if not bad else EXIT_SOLVER


def cmd_simulate(cfg: RunConfig, args) -> int:
    sim = cfg.section("simulate")
    if sim["solution"]:
        sol = WaveSolution.from_json(sim["solution"])
    else:
        sol, _ = _solve(cfg)
    out = _outdir(cfg)
    T = float(sim["T_end"]) if sim["T_end"] is not None else 40.0 / sol.c
    state = init_from_wave(sol, int(sim["N"]), sim["M_sim"])
    stride = int(sim["snapshot_stride"] or 0)
    traj = out / "trajectory.csv" if stride else None
    rep = run(state, float(sim["dt"]), T, stride=stride or None, trajectory_path=traj)
    rep.to_json(out / "report.json")
    files = ["report.json"] + (["trajectory.csv"] if traj else [])
    _write_manifest(out, "simulate", cfg, "ok", files)
    print(f"c_measured = {rep.c_measured:.10g}  c_predicted = {rep.c_predicted:.10g}  "
          f"shape_error = {rep.shape_error:.3e}  energy_drift = {rep.energy_drift:.3e}")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "highenergy": cmd_highenergy, "qstudy": cmd_qstudy}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrfput", description="Traveling waves in long-range FPUT chains.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("-c", "--config", help="JSON configuration file")
        s.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="override a configuration leaf, e.g. solver.K=0.25")
        if name in ("sweep", "highenergy"):
            s.add_argument("--jobs", type=int, default=1, help="worker processes for sweep rows")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, PotentialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonAdmissibleError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (NonConvergenceError, GuardError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SimulationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
