"""Grid-sampled velocity profiles.

A profile stores point samples ``w_k = W(x_k)`` on the symmetric grid
``x_k = k h``, ``|k| <= N``, ``h = 1/q``, ``N = R q``, and is zero outside.
Integrals use the trapezoid rule ``h sum``; for smooth decaying profiles
this is accurate far beyond the grid's algebraic order.  Jumps (indicator
test functions) are sampled by cell averages, which is exact whenever the
jump sits on a cell edge.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression


class GridError(ValueError):
    pass


class ConeError(ValueError):
    """Samples violate evenness, nonnegativity or unimodality."""


@dataclass(frozen=True)
class Grid:
    q: int = 16
    R: float = 60.0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise GridError("q must be an integer >= 2")
        if not self.R > 0:
            raise GridError("half-width R must be positive")
        N = self.R * self.q
        if abs(N - round(N)) > 1e-9:
            raise GridError("R must be an integer multiple of h = 1/q")

    @property
    def h(self) -> float:
        return 1.0 / self.q

    @property
    def N(self) -> int:
        """Nodes on each side of the centre."""
        return int(round(self.R * self.q))

    @property
    def n(self) -> int:
        return 2 * self.N + 1

    @property
    def x(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1) * self.h

    def node(self, xi: float) -> int:
        """Array index of the node at ``xi`` (must lie on the grid)."""
        k = xi * self.q
        if abs(k - round(k)) > 1e-9 or abs(k) > self.N + 1e-9:
            raise GridError(f"{xi} is not a grid node")
        return int(round(k)) + self.N

    def to_dict(self) -> dict:
        return {"q": int(self.q), "R": float(self.R)}


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FieldOnGrid:
    """Samples of a (not necessarily cone) field on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} samples, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return FieldOnGrid(self.grid, self.values + _as_values(other, self.grid))

    def __sub__(self, other):
        return FieldOnGrid(self.grid, self.values - _as_values(other, self.grid))

    def __mul__(self, lam):
        return FieldOnGrid(self.grid, self.values * float(lam))

    __rmul__ = __mul__


def _as_values(f, grid: Grid) -> np.ndarray:
    if isinstance(f, FieldOnGrid):
        if f.grid != grid:
            raise GridError("fields live on different grids")
        return f.values
    return np.asarray(f, dtype=float)


def cone_defects(values: np.ndarray) -> dict:
    """Relative violations of evenness, nonnegativity and unimodality."""
    v = np.asarray(values, dtype=float)
    scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    c = v.size // 2
    right = v[c:]
    return {
        "asymmetry": float(np.max(np.abs(v - v[::-1]))) / scale,
        "negativity": max(0.0, -float(np.min(v))) / scale,
        "monotonicity": max(0.0, float(np.max(np.diff(right)))) / scale if right.size > 1 else 0.0,
    }


@dataclass(frozen=True, eq=False)
class Profile(FieldOnGrid):
    """Even, nonnegative profile that is nonincreasing away from the centre."""

    def __post_init__(self):
        super().__post_init__()
        bad = {k: d for k, d in cone_defects(self.values).items() if d > 1e-12}
        if bad:
            raise ConeError(f"profile is not in the cone: {bad}")

    @property
    def center(self) -> float:
        return float(self.values[self.grid.N])

    @property
    def boundary_value(self) -> float:
        return float(self.values[-1])

    def to_dict(self) -> dict:
        return {"h": self.grid.h, "R": self.grid.R, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        q = round(1.0 / float(d["h"]))
        return cls(Grid(q, float(d["R"])), np.asarray(d["values"], dtype=float))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_json(cls, path) -> "Profile":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path) -> None:
        X = reconstruct_x(self)
        data = np.column_stack([self.grid.x, self.values, X])
        np.savetxt(path, data, delimiter=",", header="xi,W,X", comments="", fmt="%.17g")


# ---------------------------------------------------------------------------


def inner(a, b) -> float:
    grid = a.grid
    return grid.h * float(np.dot(a.values, _as_values(b, grid)))


def l2_norm(a) -> float:
    return float(np.sqrt(inner(a, a)))


def l2_distance(a, b) -> float:
    if a.grid != b.grid:
        raise GridError("profiles live on different grids")
    d = a.values - b.values
    return float(np.sqrt(a.grid.h * np.dot(d, d)))


def kinetic_energy(W) -> float:
    """``K(W) = ||W||^2 / 2``."""
    return 0.5 * inner(W, W)


def total_mass(W) -> float:
    """``||W||_1`` for nonnegative profiles."""
    return W.grid.h * float(np.sum(W.values))


def project_to_cone(raw, grid: Grid | None = None, method: str = "isotonic") -> Profile:
    """Map samples onto the discrete cone of even, nonnegative, unimodal profiles.

    The samples are symmetrised by averaging mirror nodes, then the half
    profile ``x >= 0`` is made nonincreasing and clamped at zero.  With
    ``method="isotonic"`` the monotone step is a weighted isotonic regression
    (weights 1 at the centre, 2 elsewhere, matching the full-profile norm), so
    the result is the metric projection onto the discrete cone.
    ``method="rearrange"`` clamps first and sorts the half profile instead.
    """
    if isinstance(raw, FieldOnGrid):
        grid = raw.grid
        raw = raw.values
    if grid is None:
        raise GridError("a grid is required for raw arrays")
    v = np.asarray(raw, dtype=float)
    if v.shape != (grid.n,):
        raise GridError(f"expected {grid.n} samples, got {v.shape}")
    N = grid.N
    sym = 0.5 * (v + v[::-1])
    half = sym[N:]
    if method not in ("isotonic", "rearrange"):
        raise ValueError(f"unknown projection method {method!r}")
    if half[-1] >= 0.0 and np.all(np.diff(half) <= 0.0):
        pass  # already in the cone
    elif method == "isotonic":
        w = np.full(half.size, 2.0)
        w[0] = 1.0
        half = np.maximum(isotonic_regression(half, weights=w, increasing=False).x, 0.0)
    elif method == "rearrange":
        half = np.sort(np.maximum(half, 0.0))[::-1]
    out = np.concatenate([half[:0:-1], half])
    return Profile(grid, out)


def normalize_to(W, K: float) -> Profile:
    """Rescale ``W`` so that ``kinetic_energy`` equals ``K``."""
    if not K > 0:
        raise ValueError("target energy must be positive")
    k0 = kinetic_energy(W)
    if k0 == 0.0:
        raise ValueError("cannot normalise the zero profile")
    out = W.values * np.sqrt(K / k0)
    # second pass absorbs the rounding of the first
    out *= np.sqrt(K / (0.5 * W.grid.h * np.dot(out, out)))
    return Profile(W.grid, out)


def indicator_profile(height: float, half_width: float, grid: Grid) -> Profile:
    """Cell averages of ``height * chi_[-half_width, half_width]``.

    When ``half_width`` is a cell boundary (a half-integer multiple of h)
    the indicator is represented exactly; when it is a node the boundary
    cell carries half the height.
    """
    if grid.R < half_width + grid.h:
        raise GridError("grid half-width too small for the indicator")
    x = grid.x
    h = grid.h
    lo = np.maximum(x - h / 2, -half_width)
    hi = np.minimum(x + h / 2, half_width)
    frac = np.clip(hi - lo, 0.0, None) / h
    frac = np.round(frac, 12)
    return Profile(grid, height * frac)


def make_w0(nu: float, grid: Grid) -> Profile:
    """High-energy limit profile ``nu * chi_[-1/2, 1/2]``."""
    return indicator_profile(nu, 0.5, grid)


def make_wl(K: float, L: int, grid: Grid) -> Profile:
    """Wide plateau ``sqrt(K/L) * chi_[-L, L]`` with ``||W||^2 = 2K`` in the continuum."""
    if L <= 0:
        raise ValueError("L must be positive")
    return indicator_profile(np.sqrt(K / L), float(L), grid)


def make_gaussian_seed(K: float, width: float, grid: Grid) -> Profile:
    if grid.R < 3 * width:
        raise GridError("grid half-width too small for the gaussian seed")
    g = np.exp(-grid.x**2 / (2 * width**2))
    return normalize_to(Profile(grid, g), K)


def reconstruct_x(W) -> np.ndarray:
    """``X(x_k) = int_{-inf}^{x_k} W`` at the nodes.

    Trapezoid cumulative sum with its leading end correction, fourth-order
    accurate for smooth ``W``; ``X(x_j + 1) - X(x_j)`` matches ``A_1 W`` at
    the midpoint to the same order.
    """
    h = W.grid.h
    v = W.values
    S = np.concatenate([[0.0], np.cumsum(v)[:-1]]) * h
    vp = np.concatenate([[0.0], v, [0.0]])
    return S + 0.5 * h * v - h * (vp[2:] - vp[:-2]) / 24.0
