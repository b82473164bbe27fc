"""Moving averages, energy functionals and their gradient.

Profiles are point samples ``w_k = W(x_k)`` (zero outside the grid).  The
moving average ``A_m W(xi) = int_{-m/2}^{m/2} W(xi + s) ds`` is evaluated
on the lattice of points whose windows end on cell edges: cell edges when
``m q`` is even, nodes when it is odd.  There the window integral is the
midpoint rule with the Euler-Maclaurin end correction folded into the
weights,

    ..., 1, 1, 23/24, 1/24, 0, ...

which is fourth-order accurate, positive, symmetric and nonincreasing
away from the centre.  In terms of the corrected primitive at cell edges,
``C_j = h sum_{k<=j} w_k + h (w_{j+1} - w_j) / 24``, every window is a
difference ``C(xi + m/2) - C(xi - m/2)``.

The energies

    P(w) = sum_m h sum_s Psi_m(A_m w(xi_s)),
    Q(w) = sum_m h sum_s Phi_m''(nu m) (A_m w(xi_s))^2 / 2

sum over all sample points ``xi_s`` of each range.  The gradient of ``P``
with respect to ``<u, v> = h sum u_k v_k`` is exactly ``sum_m A_m^T
Psi_m'(A_m w)``, where the adjoint window carries the same weights, so
convexity, cone invariance and monotonicity of the improvement map hold
exactly at the discrete level.

Ranges are handled in three regimes:

* near ranges, ``m q <= 2N + 1``: explicit prefix-sum differences;
* far ranges: every window covers the support, so ``A_m w`` is a left ramp
  ``C``, a plateau at ``||w||_1`` and a right ramp ``||w||_1 - C``; each range
  costs O(n);
* for power laws, all ranges beyond a switch order are summed in closed
  form by expanding ``Psi_m`` in ``r / (nu m)`` and collecting Hurwitz zeta
  sums.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import zeta

from .potentials import (POWER_LAW, CUSTOM, PotentialFamily, PotentialError, TruncationError,
                         binomial_coefficients, eta_exact, series)
from .profiles import FieldOnGrid, Grid, kinetic_energy, l2_norm, total_mass


class SingularityError(ArithmeticError):
    """A moving average reached the hard-core singularity of its potential."""

    def __init__(self, msg, eps1=None):
        super().__init__(msg)
        self.eps1 = eps1


class ZeroGradientError(ArithmeticError):
    pass


@dataclass
class EnergyBreakdown:
    """Energy split into explicit ranges ``1..M`` plus a summed tail.

    ``tail`` is the closed-form contribution of ranges ``> M`` (zero when
    they are truncated); ``tail_bound`` bounds whatever is left out.
    """

    total: float
    per_m: np.ndarray
    tail: float
    tail_bound: float
    M: int

    def to_dict(self) -> dict:
        return {"total": self.total, "tail": self.tail, "tail_bound": self.tail_bound,
                "M": self.M, "per_m": self.per_m.tolist()}


# ---------------------------------------------------------------------------
# integrands


class _Kernel:
    """Per-range integrand ``f_m(r)`` and derivative, optionally as a power series."""

    def __init__(self, value, deriv, series_coef=None, series_exp=None):
        self.value = value
        self.deriv = deriv
        self.series_coef = series_coef
        self.series_exp = series_exp


def _psi_kernel(fam: PotentialFamily, n_terms: int = 0) -> _Kernel:
    coef = exps = None
    if fam.is_power_law and n_terms:
        j = np.arange(n_terms)
        coef = fam.tail_coefficients(n_terms) * fam.nu ** (-fam.alpha - j)
        exps = fam.alpha + j
    return _Kernel(lambda m, r: fam._psi(m, r, 0), lambda m, r: fam._psi(m, r, 1), coef, exps)


def _q_kernel(fam: PotentialFamily, n_terms: int = 0) -> _Kernel:
    def d2(m):
        return float(fam.phi(m, fam.nu * m, 2))

    coef = exps = None
    if fam.is_power_law and n_terms:
        coef = np.zeros(3)
        exps = fam.alpha + np.arange(3.0)
        coef[2] = 0.5 * fam.alpha * (fam.alpha + 1) * fam.nu ** (-fam.alpha - 2)
    return _Kernel(lambda m, r: 0.5 * d2(m) * r * r, lambda m, r: d2(m) * r, coef, exps)


# ---------------------------------------------------------------------------
# window integrals

_END = 1.0 / 24.0


def edge_primitive(w: np.ndarray, h: float) -> np.ndarray:
    """Corrected primitive ``C_j`` at the edges ``x_j + h/2``, ``j = -N-1..N``.

    Below the first entry ``C`` is 0, above the last it is ``h sum w``.
    """
    w = np.asarray(w, dtype=float)
    S = np.concatenate([[0.0], np.cumsum(w)]) * h
    wp = np.concatenate([[0.0], w, [0.0]])
    return S + _END * h * np.diff(wp)


def _samples(C: np.ndarray, xtot: float, mq: int) -> np.ndarray:
    """``A_m w`` at every sample point where it can be nonzero (near ranges).

    Entry ``u`` is the window whose right end is edge ``u - N - 1``.
    """
    top = np.concatenate([C, np.full(mq, xtot)])
    bottom = np.concatenate([np.zeros(mq), C])
    return top - bottom


def _adjoint(f: np.ndarray, mq: int, h: float, n: int) -> np.ndarray:
    """``A_m^T f`` at the grid nodes for ``f`` laid out as in ``_samples``."""
    cums = np.concatenate([[0.0], np.cumsum(f)])
    uR = np.arange(1, n + 1)
    uL = uR + mq
    body = cums[uL] - cums[uR]
    corr = f[uR] - f[uR - 1] - f[uL] + f[uL - 1]
    return h * (body - _END * corr)


def _ramp_adjoint(dl: np.ndarray, dr: np.ndarray, plat: float, dx: float, h: float) -> np.ndarray:
    """``A_m^T f`` when ``f`` is a left ramp ``dl``, ``plat`` copies of ``dx`` and a right ramp ``dr``."""
    suf = np.cumsum(dl[::-1])[::-1][1:]
    pre = np.cumsum(dr)[:-1]
    corr = np.diff(dl) - np.diff(dr)
    return h * (suf + plat * dx + pre - _END * corr)


def far_start(grid: Grid) -> int:
    """Smallest range whose windows always cover the support of a grid field."""
    return -(-(grid.n + 1) // grid.q)


def sample_points(grid: Grid, m: int) -> np.ndarray:
    """Positions of the entries returned by ``apply_am(..., extended=True)``."""
    mq = int(m) * grid.q
    u = np.arange(grid.n + mq + 1)
    return (u - grid.N - 0.5) * grid.h - 0.5 * m


def apply_am(W, m: int, extended: bool = False):
    """Moving average ``A_m W``.

    By default returns a FieldOnGrid at the grid nodes.  Nodes are sample
    points when ``m q`` is odd; otherwise the two neighbouring edge samples
    are averaged.  With ``extended=True`` returns ``(xi, values)`` on every
    sample point of the range where the average can be nonzero.
    """
    if int(m) != m or m < 1:
        raise ValueError("range m must be a positive integer")
    grid = W.grid
    C = edge_primitive(W.values, grid.h)
    mq = int(m) * grid.q
    a = _samples(C, total_mass(W), mq)
    if extended:
        return sample_points(grid, m), a
    # node k sits at u = k + N + (mq + 1)/2, between two samples when mq is even
    k0 = mq // 2 + 1
    if mq % 2:
        vals = a[k0:k0 + grid.n]
    else:
        vals = 0.5 * (a[k0 - 1:k0 - 1 + grid.n] + a[k0:k0 + grid.n])
    return FieldOnGrid(grid, vals)


def a1_center(W) -> float:
    """``(A_1 W)(0)``, interpolated from the two nearest samples when ``q`` is even."""
    return float(apply_am(W, 1).values[W.grid.N])


# ---------------------------------------------------------------------------
# evaluation engine


@dataclass
class _Result:
    per_m: list = field(default_factory=list)
    tail: float = 0.0
    tail_bound: float = 0.0
    grad: Optional[np.ndarray] = None
    am_ratio: float = 0.0
    amax1: float = 0.0
    M: int = 0


def _split(fam: PotentialFamily, grid: Grid, M: Optional[int], xtot: float):
    """Return (explicit order, analytic tail?) for a requested truncation."""
    if M is not None:
        if int(M) != M or M < 1:
            raise TruncationError("truncation order must be a positive integer")
        M = int(M)
        if fam.max_range is not None:
            M = min(M, max(fam.max_range, 1))
        return M, False
    if fam.max_range is not None:
        return max(fam.max_range, 1), False
    if fam.kind == CUSTOM:
        raise TruncationError("custom families need an explicit truncation order")
    # explicit up to the far regime, and far enough that the expansion in
    # r / (nu m) converges with ratio <= 1/4
    return max(far_start(grid) - 1, int(math.ceil(4 * xtot / fam.nu)), 1), True


def _tail_terms(ratio: float) -> int:
    if ratio <= 0:
        return 3
    J = int(math.ceil(math.log(1e-19) / math.log(ratio))) + 4
    return min(max(J, 4), 80)


def _evaluate(W, fam: PotentialFamily, M, kind: str = "P", want_value=True, want_grad=True,
              guard: float = 0.0) -> _Result:
    grid = W.grid
    h, q, n = grid.h, grid.q, grid.n
    w = np.asarray(W.values, dtype=float)
    C = edge_primitive(w, h)
    xtot = h * float(np.sum(w))
    Mx, tail = _split(fam, grid, M, xtot)
    J = _tail_terms(xtot / (fam.nu * (Mx + 1))) if tail else 0
    ker = _psi_kernel(fam, J) if kind == "P" else _q_kernel(fam, J)
    K = 0.5 * h * float(np.dot(w, w))
    res = _Result(M=Mx)
    grad = np.zeros(n) if want_grad else None
    m_far = far_start(grid)

    for m in range(1, min(Mx, m_far - 1) + 1):
        if not fam.active(m):
            res.per_m.append(0.0)
            continue
        mq = m * q
        a = _samples(C, xtot, mq)
        amax = float(a.max())
        if m == 1:
            res.amax1 = amax
        if kind == "P" and amax >= fam.nu * m - guard:
            raise SingularityError(f"A_{m} W reaches the singularity at nu*m",
                                   eps1=fam.nu - amax if m == 1 else None)
        if K > 0:
            res.am_ratio = max(res.am_ratio, amax / math.sqrt(2 * K * m))
        if want_value:
            res.per_m.append(h * float(np.sum(ker.value(m, a))))
        if want_grad:
            grad += _adjoint(ker.deriv(m, a), mq, h, n)

    if Mx >= m_far:
        _far_explicit(C, xtot, fam, ker, grid, range(m_far, Mx + 1), res, grad, want_value, K)
    if tail:
        _far_tail(C, xtot, fam, ker, grid, Mx, J, res, grad, want_value)
        if K > 0:
            # window maxima past Mx equal xtot; the ratio is largest at Mx + 1
            res.am_ratio = max(res.am_ratio, xtot / math.sqrt(2 * K * (Mx + 1)))
    elif fam.max_range is None or Mx < fam.max_range:
        res.tail_bound = _omitted_bound(fam, K, Mx, kind)
    res.grad = grad
    return res


def _far_explicit(C, xtot, fam, ker, grid, mrange, res, grad, want_value, K):
    h, q, n = grid.h, grid.q, grid.n
    xa = np.array([xtot])
    for m in mrange:
        if not fam.active(m):
            if want_value:
                res.per_m.append(0.0)
            continue
        plat = m * q - n - 1
        if m == 1:
            res.amax1 = xtot
        if xtot >= fam.nu * m:
            raise SingularityError(f"A_{m} W reaches the singularity at nu*m")
        if want_value:
            v = float(np.sum(ker.value(m, C)) + np.sum(ker.value(m, xtot - C)))
            res.per_m.append(h * (v + plat * float(ker.value(m, xa)[0])))
        if K > 0:
            res.am_ratio = max(res.am_ratio, xtot / math.sqrt(2 * K * m))
        if grad is not None:
            grad += _ramp_adjoint(ker.deriv(m, C), ker.deriv(m, xtot - C), plat,
                                  float(ker.deriv(m, xa)[0]), h)


def _far_tail(C, xtot, fam, ker, grid, Mx, J, res, grad, want_value):
    """Closed-form sum over all ranges ``m > Mx`` (power laws only)."""
    h, q, n = grid.h, grid.q, grid.n
    coef, exps = ker.series_coef, ker.series_exp
    Z = zeta(exps, Mx + 1)
    Zp = q * zeta(exps - 1, Mx + 1) - (n + 1) * Z
    R = xtot - C
    tail = 0.0
    for j in np.nonzero(coef)[0]:
        if want_value:
            ramps = float(np.sum(C**j) + np.sum(R**j))
            tail += h * coef[j] * (Z[j] * ramps + Zp[j] * xtot**j)
        if grad is not None:
            grad += j * coef[j] * (Z[j] * _ramp_adjoint(C ** (j - 1), R ** (j - 1), 0.0, 0.0, h)
                                   + h * Zp[j] * xtot ** (j - 1))
    res.tail = tail
    if _single_term(coef):
        return
    # omitted expansion orders >= J: coefficients grow by at most `grow` per
    # order and range m has mq + n + 1 <= (q + (n+1)/(Mx+1)) m samples
    ratio = xtot / (fam.nu * (Mx + 1))
    b_J = float(binomial_coefficients(fam.alpha, J + 1)[-1])
    grow = max(1.0, (fam.alpha + J) / (J + 1))
    per_m = q + (n + 1) / (Mx + 1)
    res.tail_bound = (h * per_m * b_J / (1.0 - grow * ratio) * (xtot / fam.nu) ** J
                      * fam.nu ** (-fam.alpha) * float(zeta(fam.alpha + J - 1, Mx + 1)))


def _single_term(coef) -> bool:
    """A series with one quadratic term has no expansion remainder."""
    return np.count_nonzero(coef) == 1


def _omitted_bound(fam: PotentialFamily, K: float, M: int, kind: str) -> float:
    """Bound on ranges ``> M`` of ``sum K m^2 Phi_m''(nu m - sqrt(2 K m))``."""
    if K <= 0:
        return 0.0
    if fam.max_range is not None and M >= fam.max_range:
        return 0.0
    shift = K if kind == "P" else 0.0
    enc = series(fam, 2.0, 2, shift, M)
    return K * (enc.upper - enc.partial)


# ---------------------------------------------------------------------------
# public operations


def _breakdown(res: _Result) -> EnergyBreakdown:
    per = np.asarray(res.per_m, dtype=float)
    return EnergyBreakdown(total=float(np.sum(per)) + res.tail, per_m=per, tail=res.tail,
                           tail_bound=res.tail_bound, M=res.M)


def potential_energy(W, fam: PotentialFamily, M: Optional[int] = None, guard: float = 0.0) -> EnergyBreakdown:
    """``P(W)``; ``M=None`` sums every range (closed-form tail for power laws)."""
    return _breakdown(_evaluate(W, fam, M, "P", want_grad=False, guard=guard))


def quadratic_energy(W, fam: PotentialFamily, M: Optional[int] = None) -> EnergyBreakdown:
    """Quadratic part ``Q(W)`` of the potential energy."""
    return _breakdown(_evaluate(W, fam, M, "Q", want_grad=False))


def gradient(W, fam: PotentialFamily, M: Optional[int] = None, guard: float = 0.0) -> FieldOnGrid:
    """``dP(W) = sum_m A_m Psi_m'(A_m W)`` on the profile grid."""
    res = _evaluate(W, fam, M, "P", want_value=False, guard=guard)
    return FieldOnGrid(W.grid, res.grad)


def energy_and_gradient(W, fam: PotentialFamily, M: Optional[int] = None, guard: float = 0.0):
    """One pass returning ``(EnergyBreakdown, gradient, diagnostics)``."""
    res = _evaluate(W, fam, M, "P", guard=guard)
    diag = {"eps1": fam.nu - res.amax1, "am_ratio": res.am_ratio, "M": res.M}
    return _breakdown(res), FieldOnGrid(W.grid, res.grad), diag


def mu(W, fam: PotentialFamily, M: Optional[int] = None, grad: Optional[FieldOnGrid] = None) -> float:
    """``||W|| / ||dP(W)||``."""
    g = gradient(W, fam, M) if grad is None else grad
    gn = l2_norm(g)
    if gn == 0.0:
        raise ZeroGradientError("gradient of the potential energy vanishes")
    return l2_norm(W) / gn


def q_of_k(fam: PotentialFamily, K: float) -> float:
    """Supremum of ``Q`` over profiles with kinetic energy K: ``sum_m Phi_m''(nu m) K m^2``."""
    if fam.kind == POWER_LAW:
        a = fam.alpha
        if a <= 1:
            raise PotentialError("sum of Phi_m''(nu m) m^2 diverges")
        return K * a * (a + 1) * fam.nu ** (-a - 2) * float(zeta(a))
    if fam.max_range is not None:
        m = np.arange(1, fam.max_range + 1, dtype=float)
        return K * float(np.sum(m**2 * fam.phi(1, fam.nu * m, 2))) if m.size else 0.0
    return K * series(fam, 2.0, 2, 0.0, 10**4).estimate


def q_of_k_truncated(fam: PotentialFamily, K: float, M: int) -> float:
    m = np.arange(1, M + 1)
    vals = np.array([float(fam.phi(int(k), fam.nu * k, 2)) for k in m])
    return K * float(np.sum(vals * m**2))


def eta_value(fam: PotentialFamily, M: Optional[int]) -> float:
    """``sum_{m<=M} m Phi_m'(nu m)``, all ranges when ``M`` is None."""
    if M is None:
        return eta_exact(fam)
    m = np.arange(1, int(M) + 1, dtype=float)
    vals = np.array([float(fam.phi(int(k), fam.nu * k, 1)) for k in m])
    return float(np.sum(m * vals))


def wave_residual(W, c: float, fam: PotentialFamily, M: Optional[int] = None) -> dict:
    """Residual of ``c^2 W = sum_m A_m[-Phi_m'(nu m - A_m W)] + eta`` at the nodes.

    Near ranges use this literal form, independent of the gradient code;
    far ranges and the closed-form tail reuse the gradient, to which they
    are algebraically identical.
    """
    grid = W.grid
    h, q, n = grid.h, grid.q, grid.n
    C = edge_primitive(W.values, h)
    xtot = total_mass(W)
    Mx, tail = _split(fam, grid, M, xtot)
    m_near = min(Mx, far_start(grid) - 1)
    force = np.zeros(n)
    eta_near = 0.0
    for m in range(1, m_near + 1):
        if not fam.active(m):
            continue
        mq = m * q
        a = _samples(C, xtot, mq)
        if float(a.max()) >= fam.nu * m:
            raise SingularityError(f"A_{m} W reaches the singularity at nu*m")
        force += _adjoint(-fam.phi(m, fam.nu * m - a, 1), mq, h, n)
        eta_near += m * float(fam.phi(m, fam.nu * m, 1))
    rho = c * c * np.asarray(W.values) - force - eta_near
    if Mx > m_near or tail:
        res = _Result(M=Mx)
        far = np.zeros(n)
        J = _tail_terms(xtot / (fam.nu * (Mx + 1))) if tail else 0
        ker = _psi_kernel(fam, J)
        if Mx > m_near:
            _far_explicit(C, xtot, fam, ker, grid, range(m_near + 1, Mx + 1), res, far, False, 0.0)
        if tail:
            _far_tail(C, xtot, fam, ker, grid, Mx, J, res, far, False)
        rho -= far
    return {"l2": float(np.sqrt(h * np.dot(rho, rho))), "linf": float(np.max(np.abs(rho))), "field": rho}


def per_m_table(W, fam: PotentialFamily, M: Optional[int] = None) -> list:
    """Rows ``(m, P_m, Q_m, 2 K m^2 C_{m,K})`` for the explicit ranges."""
    P = potential_energy(W, fam, M)
    Q = quadratic_energy(W, fam, P.M)
    K = kinetic_energy(W)
    rows = []
    for m in range(1, P.M + 1):
        if fam.active(m):
            bound = K * m * m * float(fam.phi(m, fam.nu * m - math.sqrt(2 * K * m), 2))
        else:
            bound = 0.0
        rows.append((m, float(P.per_m[m - 1]), float(Q.per_m[m - 1]), bound))
    return rows


def write_per_m_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "P_m", "Q_m", "bound_2Km2C"])
        for r in rows:
            wr.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3])])


def mass(W) -> float:
    return total_mass(W)
