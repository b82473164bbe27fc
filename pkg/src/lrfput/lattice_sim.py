"""Direct integration of the particle chain started from a computed traveling wave."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from .operators import apply_am
from .potentials import CUSTOM, PotentialFamily, _power_deriv
from .profiles import Profile, reconstruct_x, total_mass

M_SIM_CAP = 64


class SimulationError(RuntimeError):
    pass


class ChainTooShortError(SimulationError):
    pass


class CollisionError(SimulationError):
    pass


class BoundaryContaminationError(SimulationError):
    pass


@dataclass
class LatticeState:
    """Mobile particles ``j = -N..N`` plus ``M_sim`` frozen particles on each side.

    ``x`` and ``v`` cover the mobile particles only; ``ghost_left`` and
    ``ghost_right`` hold the frozen positions.
    """

    N: int
    x: np.ndarray
    v: np.ndarray
    fam: PotentialFamily
    M_sim: int
    ghost_left: np.ndarray
    ghost_right: np.ndarray
    t: float = 0.0
    c_predicted: float = math.nan
    profile: Optional[Profile] = field(default=None, repr=False)
    force_tail_bound: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.positions()) <= 0):
            raise CollisionError("particle ordering violated")

    @property
    def j_range(self) -> tuple:
        return (-self.N, self.N)

    def positions(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        return np.concatenate([self.ghost_left, self.x if x is None else x, self.ghost_right])

    def strain(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        """``nu - (x_{j+1} - x_j)`` for the bonds ``j = -N..N`` (the last one ends on a ghost)."""
        full = self.positions(x)
        g = self.M_sim
        return self.fam.nu - np.diff(full)[g:g + 2 * self.N + 1]


@dataclass
class PropagationReport:
    c_measured: float
    c_predicted: float
    shape_error: float
    energy_drift: float
    energy_error_max: float = 0.0  # largest sampled |H(t) - H(0)| / |H(0)| during the run
    c_fit: float = math.nan
    ordering_ok: bool = True
    min_spacing: float = math.nan
    force_tail_bound: float = 0.0
    steps: int = 0
    dt: float = 0.0
    T: float = 0.0
    M_sim: int = 0
    speed_defined: bool = True

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


# ---------------------------------------------------------------------------


def _x_at_integers(profile: Profile, j: np.ndarray) -> tuple:
    """``X(j)`` and ``W(j)`` at integer sites, zero / total mass outside the profile grid."""
    grid = profile.grid
    X = reconstruct_x(profile)
    xtot = total_mass(profile)
    k = j * grid.q
    inside = np.abs(j) <= grid.R
    idx = np.clip(k + grid.N, 0, grid.n - 1).astype(int)
    Xj = np.where(inside, X[idx], np.where(j < 0, 0.0, xtot))
    Wj = np.where(inside, profile.values[idx], 0.0)
    return Xj, Wj


def force_tail_bound(fam: PotentialFamily, M_sim: int, compression: float) -> float:
    """Bound on the dropped forces from ranges ``m > M_sim`` when bond compressions stay below ``compression``."""
    if fam.max_range is not None and M_sim >= fam.max_range:
        return 0.0
    if fam.kind == CUSTOM:
        m = np.arange(M_sim + 1, 100 * (M_sim + 1))
        return float(2 * compression * np.sum(np.abs(fam.phi(m, fam.nu * m - compression, 2))))
    a = fam.alpha
    # |Phi'(nu m - s) - Phi'(nu m)| <= s a(a+1) (nu m - s)^(-a-2), summed over both neighbours
    start = M_sim + 1 - compression / fam.nu
    return float(2 * compression * a * (a + 1) * fam.nu ** (-a - 2) * zeta(a + 2, start))


def init_from_wave(sol, N: int, M_sim: Optional[int] = None) -> LatticeState:
    """Chain ``x_j = nu j - X(j)``, ``v_j = c W(j)`` for a WaveSolution."""
    fam = PotentialFamily(**sol.family) if isinstance(sol.family, dict) else sol.family
    W = sol.profile
    if M_sim is None:
        M_sim = min(sol.M or M_SIM_CAP, M_SIM_CAP)
    if fam.max_range is not None:
        M_sim = min(M_sim, fam.max_range)
    M_sim = max(int(M_sim), 1)
    jm = np.arange(-N, N + 1)
    _, Wm = _x_at_integers(W, jm)
    peak = float(np.max(W.values)) if W.values.size else 0.0
    edge = np.abs(jm) >= N - M_sim
    if peak > 0 and np.any(np.abs(Wm[edge]) >= 1e-8 * peak):
        raise ChainTooShortError("profile is not flat at the chain ends; increase N")
    j_all = np.arange(-N - M_sim, N + M_sim + 1)
    Xa, Wa = _x_at_integers(W, j_all)
    pos = fam.nu * j_all - Xa
    vel = sol.c * Wa
    g = M_sim
    return LatticeState(N=N, x=pos[g:-g].copy(), v=vel[g:-g].copy(), fam=fam, M_sim=M_sim,
                        ghost_left=pos[:g].copy(), ghost_right=pos[-g:].copy(), c_predicted=sol.c,
                        profile=W, force_tail_bound=force_tail_bound(fam, M_sim, total_mass(W)))


class _Pairs:
    """All pairs with range ``m <= M_sim`` that touch a mobile particle."""

    def __init__(self, state: LatticeState):
        g, n = state.M_sim, 2 * state.N + 1
        total = n + 2 * g
        ii, jj, mm = [], [], []
        for m in range(1, g + 1):
            if not state.fam.active(m):
                continue
            i = np.arange(total - m)
            keep = (i + m >= g) & (i < g + n)
            ii.append(i[keep])
            jj.append(i[keep] + m)
            mm.append(np.full(int(keep.sum()), m))
        self.i = np.concatenate(ii)
        self.j = np.concatenate(jj)
        self.m = np.concatenate(mm).astype(float)
        self.g, self.n, self.total = g, n, total
        fam = state.fam
        self.rest = fam.nu * self.m
        if fam.kind == CUSTOM:
            self.phi = lambda d, k: np.asarray(fam.custom(self.m, d, k), dtype=float)
        else:
            self.phi = lambda d, k: _power_deriv(fam.alpha, d, k)
        self.phi_rest = self.phi(self.rest, 0)


def _accel(P: _Pairs, full: np.ndarray) -> np.ndarray:
    d = full[P.j] - full[P.i]
    if np.any(d <= 0):
        raise CollisionError("particles collided")
    f = P.phi(d, 1)
    a = np.bincount(P.i, f, P.total) - np.bincount(P.j, f, P.total)
    return a[P.g:P.g + P.n]


def forces(state: LatticeState) -> np.ndarray:
    """Accelerations of the mobile particles (unit masses)."""
    return _accel(_Pairs(state), state.positions())


def hamiltonian(state: LatticeState, P: Optional[_Pairs] = None, x=None, v=None) -> float:
    """Kinetic plus pair energy, rebased so that the undisturbed chain has zero energy."""
    P = P or _Pairs(state)
    full = state.positions(x)
    d = full[P.j] - full[P.i]
    v = state.v if v is None else v
    return 0.5 * float(np.dot(v, v)) + float(np.sum(P.phi(d, 0) - P.phi_rest))


def _verlet(state, P, dt, steps, stride=None, sink=None, probe=None, probe_every=0):
    x, v = state.x.copy(), state.v.copy()
    gl, gr = state.ghost_left, state.ghost_right
    a = _accel(P, np.concatenate([gl, x, gr]))
    min_gap = math.inf
    for s in range(steps):
        v += 0.5 * dt * a
        x += dt * v
        full = np.concatenate([gl, x, gr])
        a = _accel(P, full)
        v += 0.5 * dt * a
        min_gap = min(min_gap, float(np.min(np.diff(full))))
        if sink is not None and stride and (s + 1) % stride == 0:
            sink(state.t + (s + 1) * dt, x, v)
        if probe is not None and (s + 1) % probe_every == 0:
            probe(x, v)
    return x, v, min_gap


def _shift_by_correlation(r0: np.ndarray, r1: np.ndarray) -> float:
    corr = np.correlate(r1, r0, mode="full")
    k = int(np.argmax(corr))
    lag = k - (r0.size - 1)
    if 0 < k < corr.size - 1:
        y0, y1, y2 = corr[k - 1], corr[k], corr[k + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            lag += 0.5 * (y0 - y2) / den
    return float(lag)


def _strain_model(state: LatticeState):
    """Smooth interpolant of the predicted strain ``(A_1 W)(xi)``."""
    xi, a = apply_am(state.profile, 1, extended=True)
    return CubicSpline(xi, a, extrapolate=False)


def run(state: LatticeState, dt: float, T: float, stride: Optional[int] = None,
        trajectory_path=None, boundary_tol: float = 1e-3) -> PropagationReport:
    """Velocity-Verlet integration over ``[0, T]`` and comparison with the predicted wave."""
    c = state.c_predicted
    if math.isfinite(c) and dt * c >= 0.2:
        raise SimulationError("time step too large: need dt * c < 0.2")
    steps = int(round(T / dt))
    P = _Pairs(state)
    H0 = hamiltonian(state, P)
    r0 = state.strain()
    rows = []
    sink = None
    if trajectory_path is not None and stride:
        j = np.arange(-state.N, state.N + 1)

        def sink(t, x, v):
            rows.append((t, x.copy(), v.copy(), state.strain(x)))

        sink(0.0, state.x, state.v)
    errs = [0.0]
    scale_H = abs(H0) if H0 != 0 else 1.0

    def probe(x, v):
        errs.append(abs(hamiltonian(state, P, x, v) - H0) / scale_H)

    x, v, gap = _verlet(state, P, dt, steps, stride, sink, probe, max(1, steps // 200))
    H1 = hamiltonian(state, P, x, v)
    r1 = state.strain(x)
    if trajectory_path is not None and stride:
        _write_trajectory(trajectory_path, rows, j)
    state.x, state.v, state.t = x, v, state.t + steps * dt
    drift = abs(H1 - H0) / abs(H0) if H0 != 0 else abs(H1 - H0)
    peak = float(np.max(np.abs(r0)))
    rep = PropagationReport(c_measured=math.nan, c_predicted=c, shape_error=0.0, energy_drift=drift,
                            energy_error_max=max(errs + [drift]),
                            ordering_ok=gap > 0, min_spacing=gap, force_tail_bound=state.force_tail_bound,
                            steps=steps, dt=dt, T=steps * dt, M_sim=state.M_sim)
    if peak == 0.0:
        rep.speed_defined = False
        return rep
    edge = np.zeros(r1.size, bool)
    edge[:state.M_sim] = edge[-state.M_sim:] = True
    if np.max(np.abs(r1[edge])) > boundary_tol * peak:
        raise BoundaryContaminationError("wave reached the frozen chain ends")
    lag = _shift_by_correlation(r0, r1)
    rep.c_measured = lag / rep.T
    if state.profile is not None:
        model = _strain_model(state)
        bonds = np.arange(-state.N, state.N + 1) + 0.5

        def err(s):
            pred = np.nan_to_num(model(bonds - s))
            return float(np.linalg.norm(r1 - pred))

        res = minimize_scalar(err, bounds=(lag - 2, lag + 2), method="bounded",
                              options={"xatol": 1e-10})
        scale = float(np.linalg.norm(np.nan_to_num(model(bonds))))
        rep.shape_error = res.fun / scale
        rep.c_fit = float(res.x) / rep.T
    else:
        rep.shape_error = float(np.linalg.norm(np.roll(r1, -int(round(lag))) - r0) / np.linalg.norm(r0))
    return rep


def reverse(state: LatticeState, dt: float, T: float) -> LatticeState:
    """Integrate for ``T`` with the velocities flipped (time reversal test)."""
    state.v = -state.v
    x, v, _ = _verlet(state, _Pairs(state), dt, int(round(T / dt)))
    state.x, state.v = x, -v
    return state


def _write_trajectory(path, rows, j) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "j", "x", "v", "strain"])
        for t, x, v, r in rows:
            for jj, xx, vv, rr in zip(j, x, v, r):
                wr.writerow([repr(float(t)), int(jj), repr(float(xx)), repr(float(vv)), repr(float(rr))])
