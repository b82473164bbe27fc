"""Fixed-point iteration ``W <- mu(W) dP(W)`` on the cone of kinetic energy K."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .operators import (SingularityError, a1_center, energy_and_gradient, gradient, q_of_k,
                        wave_residual)
from .potentials import CUSTOM, PotentialFamily, check_assumptions, truncation_order
from .profiles import (Grid, Profile, cone_defects, kinetic_energy, l2_distance, l2_norm,
                       make_gaussian_seed, make_wl, normalize_to, project_to_cone)

SEEDS = ("gaussian", "indicator_wl", "user_profile")
# relative energy gain treated as zero; P itself carries about 1e-15 rounding
STALL_GAIN = 1e-14


class SolverError(RuntimeError):
    pass


class NonAdmissibleError(SolverError):
    def __init__(self, report):
        names = ", ".join(report.failed_conditions)
        super().__init__(f"configuration is not admissible: {names}")
        self.report = report


class NonConvergenceError(SolverError):
    """Iteration cap reached or the iteration stagnated; ``history`` holds diagnostics."""

    def __init__(self, msg, history=None, profile=None):
        super().__init__(msg)
        self.history = history
        self.profile = profile


class StagnationError(NonConvergenceError):
    pass


class GuardError(SolverError):
    def __init__(self, msg, eps1):
        super().__init__(msg)
        self.eps1 = eps1


@dataclass(frozen=True)
class SolverConfig:
    K: float
    grid: Grid = field(default_factory=Grid)
    tol_tail: float = 1e-12
    tol_fp: float = 1e-10
    max_iter: int = 100_000
    guard: Optional[float] = None  # default 1e-10 * nu
    seed: str = "gaussian"
    seed_width: Optional[float] = None  # gaussian width (2) or plateau half-width L (0.5)
    user_profile: Optional[Profile] = field(default=None, compare=False, repr=False)
    M: Optional[int] = None  # explicit truncation; None resolves from tol_tail
    projection: str = "isotonic"
    stagnation_window: int = 100
    check: bool = True

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("kinetic energy K must be positive")
        if self.seed not in SEEDS:
            raise ValueError(f"unknown seed {self.seed!r}; choose from {SEEDS}")
        if self.seed == "user_profile" and self.user_profile is None:
            raise ValueError("seed 'user_profile' needs a profile")
        if self.tol_fp <= 0 or self.tol_tail <= 0 or self.max_iter < 1:
            raise ValueError("tolerances and max_iter must be positive")

    def guard_for(self, fam: PotentialFamily) -> float:
        return 1e-10 * fam.nu if self.guard is None else float(self.guard)

    def to_dict(self) -> dict:
        return {"K": self.K, "grid": self.grid.to_dict(), "tol_tail": self.tol_tail,
                "tol_fp": self.tol_fp, "max_iter": self.max_iter, "guard": self.guard,
                "seed": self.seed, "seed_width": self.seed_width, "M": self.M,
                "projection": self.projection}


@dataclass
class SolverHistory:
    """Per-iterate diagnostics; index i describes the i-th iterate ``W_i``."""

    P: list = field(default_factory=list)
    update: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    cone_defect: list = field(default_factory=list)
    am_ratio: list = field(default_factory=list)
    eps1: list = field(default_factory=list)

    def monotone(self, rel: float = 1e-12) -> bool:
        P = np.asarray(self.P)
        return bool(np.all(np.diff(P) >= -rel * np.abs(P[:-1]))) if P.size > 1 else True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class WaveSolution:
    profile: Profile
    c: float
    K: float
    P: float
    Q_of_K: float
    residual: dict
    iterations: int
    eps1: float
    tail_bound: float
    monotone_certificate: bool
    config: dict = field(default_factory=dict)
    family: dict = field(default_factory=dict)
    M: Optional[int] = None
    history: Optional[SolverHistory] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"config": self.config, "potential": self.family, "c": self.c, "K": self.K,
                "P": self.P, "Q_of_K": self.Q_of_K, "residual_l2": self.residual["l2"],
                "residual_linf": self.residual["linf"], "eps1": self.eps1,
                "iterations": self.iterations, "tail_bound": self.tail_bound,
                "monotone_certificate": self.monotone_certificate, "M": self.M,
                "profile": self.profile.to_dict()}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "WaveSolution":
        return cls(profile=Profile.from_dict(d["profile"]), c=d["c"], K=d["K"], P=d["P"],
                   Q_of_K=d.get("Q_of_K", math.nan),
                   residual={"l2": d["residual_l2"], "linf": d["residual_linf"]},
                   iterations=d["iterations"], eps1=d["eps1"], tail_bound=d.get("tail_bound", 0.0),
                   monotone_certificate=d.get("monotone_certificate", False),
                   config=d.get("config", {}), family=d.get("potential", {}), M=d.get("M"))

    @classmethod
    def from_json(cls, path) -> "WaveSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def resolve_truncation(fam: PotentialFamily, K: float, tol_tail: float, M: Optional[int] = None):
    """Explicit range count for the operators, or None for the full series.

    Power laws and finite ranges are summed completely; custom families are
    truncated where the certified tail drops below ``tol_tail``.
    """
    if M is not None:
        return int(M)
    if fam.kind == CUSTOM:
        return truncation_order(fam, K, tol_tail)
    return None


def make_seed(cfg: SolverConfig, fam: PotentialFamily) -> Profile:
    if cfg.seed == "gaussian":
        return make_gaussian_seed(cfg.K, cfg.seed_width or 2.0, cfg.grid)
    if cfg.seed == "indicator_wl":
        return normalize_to(make_wl(cfg.K, cfg.seed_width or 0.5, cfg.grid), cfg.K)
    prof = cfg.user_profile
    if prof.grid != cfg.grid:
        raise SolverError("user profile lives on a different grid")
    return normalize_to(prof, cfg.K)


def _step(W: Profile, fam: PotentialFamily, M, guard: float, K: float, projection: str):
    E, G, diag = energy_and_gradient(W, fam, M, guard=guard)
    if diag["eps1"] < guard:
        raise GuardError("A_1 W reached the singularity guard", diag["eps1"])
    gn = l2_norm(G)
    if gn == 0.0:
        raise SolverError("gradient of the potential energy vanishes")
    mu = l2_norm(W) / gn
    raw = G * mu
    T = normalize_to(project_to_cone(raw, method=projection), K)
    return T, E, mu, raw, diag


def improve_step(W: Profile, fam: PotentialFamily, M: Optional[int] = None, guard: float = 0.0,
                 projection: str = "isotonic") -> Profile:
    """``T(W) = mu(W) dP(W)``, projected onto the cone and renormalised to ``K(W)``."""
    return _step(W, fam, M, guard, kinetic_energy(W), projection)[0]


def wave_speed(W: Profile, fam: PotentialFamily, M: Optional[int] = None) -> float:
    """``mu(W)^(-1/2)``."""
    gn = l2_norm(gradient(W, fam, M))
    if gn == 0.0:
        raise SolverError("gradient of the potential energy vanishes")
    return math.sqrt(gn / l2_norm(W))


def _stalled(updates) -> bool:
    """Update norms have not shrunk across the window (noise floor, not slow convergence)."""
    q = max(1, len(updates) // 4)
    return float(np.median(updates[-q:])) >= 0.9 * float(np.median(updates[:q]))


def solve(cfg: SolverConfig, fam: PotentialFamily, record: bool = True) -> WaveSolution:
    """Iterate the improvement map from the configured seed to a fixed point."""
    if cfg.check:
        rep = check_assumptions(fam, cfg.K)
        if not rep.passed:
            raise NonAdmissibleError(rep)
    M = resolve_truncation(fam, cfg.K, cfg.tol_tail, cfg.M)
    guard = cfg.guard_for(fam)
    K = cfg.K
    scale = math.sqrt(2 * K)
    W = make_seed(cfg, fam)
    hist = SolverHistory()
    window = cfg.stagnation_window
    flat = 0
    recent = deque(maxlen=window)
    P_prev = None
    converged = False
    it = 0
    while it < cfg.max_iter:
        try:
            T, E, mu, raw, diag = _step(W, fam, M, guard, K, cfg.projection)
        except SingularityError as exc:
            raise GuardError(str(exc), exc.eps1) from exc
        it += 1
        step = l2_distance(T, W) / scale
        if record:
            hist.P.append(E.total)
            hist.update.append(step)
            hist.kinetic.append(kinetic_energy(W))
            hist.cone_defect.append(max(cone_defects(raw.values).values()))
            hist.am_ratio.append(diag["am_ratio"])
            hist.eps1.append(diag["eps1"])
        W = T
        if step <= cfg.tol_fp:
            converged = True
            break
        # stalled: energy gain at the rounding floor and no progress of the update norm
        recent.append(step)
        if P_prev is not None and E.total - P_prev < STALL_GAIN * abs(E.total):
            flat += 1
        else:
            flat = 0
        P_prev = E.total
        if flat >= window and _stalled(list(recent)):
            raise StagnationError(f"iteration stagnated after {it} steps (update {step:.3e})",
                                  history=hist, profile=W)
    if not converged:
        raise NonConvergenceError(f"no fixed point within {cfg.max_iter} iterations", history=hist,
                                  profile=W)
    E, G, diag = energy_and_gradient(W, fam, M, guard=guard)
    if record:
        hist.P.append(E.total)
        hist.kinetic.append(kinetic_energy(W))
        hist.am_ratio.append(diag["am_ratio"])
        hist.eps1.append(diag["eps1"])
    c = math.sqrt(l2_norm(G) / l2_norm(W))
    res = wave_residual(W, c, fam, M)
    return WaveSolution(
        profile=W, c=c, K=K, P=E.total, Q_of_K=q_of_k(fam, K),
        residual={"l2": res["l2"], "linf": res["linf"]}, iterations=it,
        eps1=fam.nu - a1_center(W), tail_bound=E.tail_bound,
        monotone_certificate=hist.monotone() if record else False,
        config=cfg.to_dict(), family=fam.to_dict(), M=E.M, history=hist if record else None)
