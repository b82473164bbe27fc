"""Studies over families of solutions: K sweeps, the high-energy limit and plateau test functions."""
from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .operators import a1_center, q_of_k, quadratic_energy
from .potentials import PotentialFamily
from .profiles import (Grid, GridError, inner, kinetic_energy, l2_distance, make_w0, make_wl,
                       normalize_to)
from .solver import SolverConfig, SolverError, WaveSolution, solve

SWEEP_COLUMNS = ("K", "delta", "c", "P", "Q_of_K", "P_minus_Q_margin", "eps1", "l2_dist_to_W0",
                 "identity_residual", "iterations")


@dataclass
class SweepRow:
    K: float
    delta: float
    c: float = math.nan
    P: float = math.nan
    Q_of_K: float = math.nan
    P_minus_Q_margin: float = math.nan
    eps1: float = math.nan
    l2_dist_to_W0: float = math.nan
    identity_residual: float = math.nan
    iterations: int = 0
    # diagnostics kept out of the CSV schema
    status: str = "ok"
    message: str = ""
    speed_bound_slack: float = math.nan
    direct_identity_residual: float = math.nan
    residual_l2: float = math.nan
    checks: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok" and all(self.checks.values())

    def csv_row(self) -> list:
        return [getattr(self, k) for k in SWEEP_COLUMNS]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _base_row(sol: WaveSolution, fam: PotentialFamily) -> SweepRow:
    nu2 = fam.nu**2
    slack = 2 * sol.c**2 - sol.P / sol.K
    margin = sol.P - sol.Q_of_K
    return SweepRow(K=sol.K, delta=1 - 2 * sol.K / nu2, c=sol.c, P=sol.P, Q_of_K=sol.Q_of_K,
                    P_minus_Q_margin=margin, eps1=sol.eps1, iterations=sol.iterations,
                    speed_bound_slack=slack, residual_l2=sol.residual["l2"],
                    checks={"speed_bound": slack >= 0.0, "P_above_Q": margin > 0.0})


def _failed(K: float, fam: PotentialFamily, exc: Exception) -> SweepRow:
    return SweepRow(K=K, delta=1 - 2 * K / fam.nu**2, status=type(exc).__name__, message=str(exc))


def _solve_row(args) -> tuple:
    cfg, fam, high_energy = args
    try:
        sol = solve(cfg, fam)
    except (SolverError, ArithmeticError, ValueError) as exc:
        return _failed(cfg.K, fam, exc), None
    row = _base_row(sol, fam)
    if high_energy:
        _high_energy_fields(row, sol, fam)
    return row, sol


def _run(cfgs, fam, high_energy, jobs, warm_start):
    tasks = [(c, fam, high_energy) for c in cfgs]
    if warm_start:
        out, prev = [], None
        for cfg, _, he in tasks:
            if prev is not None:
                cfg = dataclasses.replace(cfg, seed="user_profile", user_profile=prev.profile)
            row, sol = _solve_row((cfg, fam, he))
            prev = sol or prev
            out.append((row, sol))
        return out
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_solve_row, tasks))
    return [_solve_row(t) for t in tasks]


def sweep_k(K_list: Sequence[float], fam: PotentialFamily, cfg: SolverConfig, jobs: int = 1,
            warm_start: bool = False, return_solutions: bool = False):
    """Solve every K independently (rows in input order)."""
    cfgs = [dataclasses.replace(cfg, K=float(K)) for K in K_list]
    results = _run(cfgs, fam, False, jobs, warm_start)
    rows = [r for r, _ in results]
    return (rows, [s for _, s in results]) if return_solutions else rows


def _high_energy_fields(row: SweepRow, sol: WaveSolution, fam: PotentialFamily) -> None:
    nu = fam.nu
    W = sol.profile
    W0 = make_w0(nu, W.grid)
    delta = row.delta
    rhs = 2 * row.eps1 * nu - delta * nu**2
    # <W, W0> = nu (A_1 W)(0) and ||W0||^2 = nu^2 exactly
    via_a1 = 2 * kinetic_energy(W) + nu**2 - 2 * nu * a1_center(W)
    direct = l2_distance(W, W0) ** 2
    row.l2_dist_to_W0 = math.sqrt(direct)
    row.identity_residual = abs(via_a1 - rhs)
    row.direct_identity_residual = abs(direct - rhs)
    row.checks["inner_product_routes"] = abs(inner(W, W0) - nu * a1_center(W)) < 5e-3


def high_energy_sweep(delta_list: Sequence[float], fam: PotentialFamily, cfg: SolverConfig,
                      jobs: int = 1, return_solutions: bool = False):
    """Solve ``K = (1 - delta) nu^2 / 2`` and compare with the limit ``nu chi_[-1/2, 1/2]``.

    Rows past the first failure are still attempted; ``smallest_delta``
    reports how far the family was tracked.
    """
    if not fam.is_power_law:
        raise ValueError("the high-energy study is defined for power_law families")
    for d in delta_list:
        if not 0 < d < 1:
            raise ValueError("delta must lie in (0, 1)")
    cfgs = [dataclasses.replace(cfg, K=(1 - float(d)) * fam.nu**2 / 2) for d in delta_list]
    results = _run(cfgs, fam, True, jobs, False)
    for (row, _), d in zip(results, delta_list):
        row.delta = float(d)
    rows = [r for r, _ in results]
    return (rows, [s for _, s in results]) if return_solutions else rows


def smallest_delta(rows) -> Optional[float]:
    ok = [r.delta for r in rows if r.status == "ok"]
    return min(ok) if ok else None


def q_testfunction_study(L_list: Sequence[int], K: float, fam: PotentialFamily, q: int = 4,
                         R: Optional[float] = None) -> list:
    """``Q`` of the plateaus ``W_L`` against the lower bound they certify and the supremum ``Q(K)``."""
    QK = q_of_k(fam, K)
    rows = []
    for L in L_list:
        grid = Grid(q, R if R is not None else float(L) + 1.0)
        if grid.R < L + grid.h:
            raise GridError("grid half-width must exceed the plateau half-width L")
        # the node sample at the jump carries half height; rescale into C_K
        W = normalize_to(make_wl(K, L, grid), K)
        Qw = float(quadratic_energy(W, fam).total)
        s = math.sqrt(L)
        m = np.arange(1, int(math.floor(s)) + 1)
        d2 = np.array([float(fam.phi(int(k), fam.nu * k, 2)) for k in m])
        lower = float(np.sum(d2 * K * m**2)) * (1 - 1 / (2 * s))
        rows.append({"L": int(L), "Qcal_WL": Qw, "lower_bound": lower, "Q_of_K": QK,
                     "sandwich": bool(lower <= Qw <= QK)})
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_COLUMNS)
        for r in rows:
            wr.writerow([_fmt(v) for v in r.csv_row()])


def write_table_csv(path, rows: list, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_fmt(r[c]) for c in columns])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v
