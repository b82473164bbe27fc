"""Interaction potentials of long-range FPUT chains.

A family assigns to every range ``m >= 1`` a repulsive pair potential
``Phi_m`` acting between particles ``j`` and ``j + m``.  Three kinds are
supported:

``power_law``
    ``Phi_m(r) = r**-alpha`` for every ``m``.
``finite_range_power_law``
    ``Phi_m(r) = r**-alpha`` for ``m < m0`` and ``Phi_m = 0`` otherwise.
``custom_tabulated``
    a user hook ``phi(m, r, order)`` returning analytic derivatives up to
    order 4; ``m`` and ``r`` may be broadcast arrays.

Besides evaluation this module provides the corrected potentials ``Psi_m``
(``Phi_m`` re-centred at the rest length ``nu*m`` with its affine Taylor
part removed), the background constant ``eta`` and a numerical check of the
sign and summability conditions under which the variational solver is
meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln, zeta

POWER_LAW = "power_law"
FINITE_RANGE = "finite_range_power_law"
CUSTOM = "custom_tabulated"
KINDS = (POWER_LAW, FINITE_RANGE, CUSTOM)

# Below this relative distance to the rest length the corrected potential is
# evaluated from its Taylor polynomial (the direct formula cancels to O(r^2)).
_TAYLOR_SWITCH = 1e-4
# Power-law corrected potentials switch to their binomial series below this.
_SERIES_SWITCH = 0.02
_SERIES_TERMS = 14


class PotentialError(ValueError):
    """Invalid potential family or evaluation outside its domain."""


class SingularEvaluationError(PotentialError):
    pass


class SeriesDivergenceError(PotentialError):
    pass


class TruncationError(PotentialError):
    pass


def rising(a: float, k: int) -> float:
    """Pochhammer symbol ``a (a+1) ... (a+k-1)``."""
    out = 1.0
    for i in range(k):
        out *= a + i
    return out


def binomial_coefficients(alpha: float, n_terms: int) -> np.ndarray:
    """Coefficients ``c_j`` of ``(1 - x)**-alpha = sum_j c_j x**j``, j < n_terms."""
    j = np.arange(n_terms)
    return np.exp(gammaln(alpha + j) - gammaln(alpha) - gammaln(j + 1.0))


@dataclass(frozen=True)
class PotentialFamily:
    kind: str = POWER_LAW
    nu: float = 1.0
    alpha: float = 2.0
    m0: Optional[int] = None
    custom: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        if not self.nu > 0:
            raise PotentialError("background spacing nu must be positive")
        if self.kind in (POWER_LAW, FINITE_RANGE) and not self.alpha > 0:
            raise PotentialError("power-law exponent alpha must be positive")
        if self.kind == FINITE_RANGE:
            if self.m0 is None or int(self.m0) != self.m0 or self.m0 < 1:
                raise PotentialError("finite-range families need an integer cutoff m0 >= 1")
        if self.kind == CUSTOM and self.custom is None:
            raise PotentialError("custom_tabulated families need a derivative hook")

    # classification
    @property
    def is_power_law(self) -> bool:
        return self.kind == POWER_LAW

    @property
    def max_range(self) -> Optional[int]:
        """Largest interacting range, or None for infinitely many."""
        if self.kind == FINITE_RANGE:
            return int(self.m0) - 1
        return None

    def active(self, m: int) -> bool:
        return self.kind != FINITE_RANGE or m < self.m0

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "nu": self.nu}
        if self.kind != CUSTOM:
            out["alpha"] = self.alpha
        if self.kind == FINITE_RANGE:
            out["m0"] = int(self.m0)
        return out

    # evaluation
    def phi(self, m, r, order: int = 0):
        """``d^order Phi_m / dr^order`` at ``r`` (vectorised over r)."""
        if order not in range(5):
            raise PotentialError(f"unsupported derivative order {order}")
        r = np.asarray(r, dtype=float)
        if self.kind == CUSTOM:
            return np.asarray(self.custom(m, r, order), dtype=float)
        if not self.active(m):
            return np.zeros_like(r)
        if np.any(r <= 0):
            raise SingularEvaluationError("power-law potential evaluated at r <= 0")
        return _power_deriv(self.alpha, r, order)

    def psi(self, m: int, r, order: int = 0):
        """Corrected potential ``Psi_m(r) = Phi_m(nu m - r) - Phi_m(nu m) + Phi_m'(nu m) r``.

        Defined on ``0 <= r < nu m``; ``order`` 1 and 2 give its derivatives.
        """
        if order not in (0, 1, 2):
            raise PotentialError(f"unsupported derivative order {order}")
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r >= self.nu * m):
            raise PotentialError(f"psi_{m} evaluated outside [0, nu*m)")
        return self._psi(m, r, order)

    def _psi(self, m: int, r: np.ndarray, order: int) -> np.ndarray:
        """Unchecked ``psi``; callers guarantee ``0 <= r < nu m``."""
        if not self.active(m):
            return np.zeros_like(r)
        nm = self.nu * m
        if self.kind in (POWER_LAW, FINITE_RANGE):
            return _power_psi(self.alpha, nm, r, order)
        if order == 2:
            return self.phi(m, nm - r, 2)
        d2, d3, d4 = (float(self.phi(m, nm, k)) for k in (2, 3, 4))
        small = r < _TAYLOR_SWITCH * nm
        with np.errstate(invalid="ignore", divide="ignore"):
            if order == 0:
                direct = self.phi(m, nm - r, 0) - float(self.phi(m, nm, 0)) + float(self.phi(m, nm, 1)) * r
                taylor = d2 * r**2 / 2 - d3 * r**3 / 6 + d4 * r**4 / 24
            else:
                direct = -self.phi(m, nm - r, 1) + float(self.phi(m, nm, 1))
                taylor = d2 * r - d3 * r**2 / 2 + d4 * r**3 / 6
        return np.where(small, taylor, direct)

    def tail_coefficients(self, n_terms: int) -> np.ndarray:
        """Coefficients ``a_j`` with ``Psi_m(r) = sum_j a_j r**j (nu m)**-(alpha+j)``.

        Only available for pure power laws; ``a_0 = a_1 = 0``.
        """
        if not self.is_power_law:
            raise PotentialError("series tail only available for power_law families")
        a = binomial_coefficients(self.alpha, n_terms)
        a[:2] = 0.0
        return a


def _power_deriv(alpha: float, r: np.ndarray, order: int) -> np.ndarray:
    return (-1.0) ** order * rising(alpha, order) * r ** (-alpha - order)


def _power_psi(alpha: float, nm: float, r: np.ndarray, order: int) -> np.ndarray:
    x = r / nm
    if order == 2:
        return alpha * (alpha + 1) * (nm - r) ** (-alpha - 2)
    lead = nm ** (-alpha - order)
    if order == 1:
        # alpha nm^(-alpha-1) [(1-x)^(-alpha-1) - 1]; expm1 keeps it accurate
        return alpha * lead * np.expm1(-(alpha + 1) * np.log1p(-x))
    small = x < _SERIES_SWITCH
    out = np.empty_like(x)
    xs = x[small]
    if xs.size:
        c = binomial_coefficients(alpha, _SERIES_TERMS)
        acc = np.zeros_like(xs)
        for cj in c[:1:-1]:
            acc = (acc + cj) * xs
        out[small] = acc * xs
    xl = x[~small]
    out[~small] = np.expm1(-alpha * np.log1p(-xl)) - alpha * xl
    return lead * out


# ---------------------------------------------------------------------------
# series with certified tails


@dataclass(frozen=True)
class SeriesEnclosure:
    """Partial sum over ``m <= M`` and an interval enclosing the full series."""

    partial: float
    lower: float
    upper: float
    M: int
    certified: bool = True

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def to_dict(self) -> dict:
        return {"partial": self.partial, "lower": self.lower, "upper": self.upper,
                "M": self.M, "certified": self.certified}


def _power_tail_integral(p: float, start: float) -> float:
    """``int_start^inf m^-p dm`` (inf when p <= 1)."""
    if p <= 1:
        return math.inf
    return start ** (1 - p) / (p - 1)


def _power_series(fam: PotentialFamily, weight_exp: float, order: int, shift_K: float, M: int) -> SeriesEnclosure:
    """Enclose ``sum_m m**weight_exp * |Phi_m^(order)(nu m - sqrt(2 K m))|``.

    Exact partial sum for m <= M plus integral-test bounds of the tail,
    using that the shift factor ``1 - sqrt(2K)/(nu sqrt(m))`` lies in
    ``[beta_M, 1]`` for m > M.
    """
    alpha, nu = fam.alpha, fam.nu
    m = np.arange(1, M + 1, dtype=float)
    arg = nu * m - np.sqrt(2 * shift_K * m)
    coef = rising(alpha, order)
    partial = float(np.sum(m**weight_exp * coef * arg ** (-alpha - order)))
    if fam.kind == FINITE_RANGE:
        m_hi = fam.max_range
        mm = m[: max(m_hi, 0)]
        partial = float(np.sum(mm**weight_exp * coef * (nu * mm - np.sqrt(2 * shift_K * mm)) ** (-alpha - order)))
        return SeriesEnclosure(partial, partial, partial, M)
    p = alpha + order - weight_exp
    beta = 1.0 - math.sqrt(2 * shift_K) / (nu * math.sqrt(M))
    c_lo = coef * nu ** (-alpha - order)
    c_hi = c_lo * beta ** (-alpha - order)
    lo = partial + c_lo * _power_tail_integral(p, M + 1)
    hi = partial + c_hi * _power_tail_integral(p, M)
    return SeriesEnclosure(partial, lo, hi, M)


def _custom_series(fam: PotentialFamily, weight_exp: float, order: int, shift_K: float, M: int) -> SeriesEnclosure:
    """Same as ``_power_series`` for user hooks.

    The tail is estimated from the local decay exponent between ``10 M`` and
    ``100 M``; this is an estimate, not a certificate.
    """
    def term(mv):
        mv = np.asarray(mv, dtype=float)
        vals = fam.custom(mv, fam.nu * mv - np.sqrt(2 * shift_K * mv), order)
        return mv**weight_exp * np.abs(np.asarray(vals, dtype=float))

    m = np.arange(1, M + 1)
    partial = float(np.sum(term(m)))
    f1, f2, f3 = term([M, 10 * M, 100 * M])
    if f3 == 0.0:
        return SeriesEnclosure(partial, partial, partial, M, certified=False)
    p = -math.log10(f3 / f2) if f2 > 0 else math.inf
    if p <= 1 + 1e-3:
        return SeriesEnclosure(partial, partial, math.inf, M, certified=False)
    return SeriesEnclosure(partial, partial, partial + 2 * f1 * M / (p - 1), M, certified=False)


def series(fam: PotentialFamily, weight_exp: float, order: int, shift_K: float = 0.0, M: int = 1000) -> SeriesEnclosure:
    if fam.kind == CUSTOM:
        return _custom_series(fam, weight_exp, order, shift_K, M)
    return _power_series(fam, weight_exp, order, shift_K, M)


def eta(fam: PotentialFamily, M: int = 10**4) -> SeriesEnclosure:
    """Background constant ``sum_m m Phi_m'(nu m)`` with an enclosure of its tail.

    Raises SeriesDivergenceError when no finite tail bound exists.
    """
    if M < 1:
        raise PotentialError("truncation order must be positive")
    enc = series(fam, 1.0, 1, 0.0, M)
    if not enc.finite:
        raise SeriesDivergenceError("sum of m Phi_m'(nu m) does not converge")
    # Phi' <= 0: flip the enclosure of the absolute series
    return SeriesEnclosure(-enc.partial, -enc.upper, -enc.lower, M, enc.certified)


def eta_exact(fam: PotentialFamily) -> float:
    """Closed form of ``eta`` where one exists (power laws via zeta)."""
    if fam.kind == POWER_LAW:
        if fam.alpha <= 1:
            raise SeriesDivergenceError("sum of m Phi_m'(nu m) does not converge")
        return -fam.alpha * fam.nu ** (-fam.alpha - 1) * float(zeta(fam.alpha))
    if fam.kind == FINITE_RANGE:
        m = np.arange(1, fam.max_range + 1, dtype=float)
        return float(np.sum(m * fam.phi(1, fam.nu * m, 1))) if m.size else 0.0
    return eta(fam).estimate


# ---------------------------------------------------------------------------
# admissibility

GAMMA_LO, GAMMA_HI = 2.5, 3.0
N_GAMMA = 64
SIGN_POINTS_PER_DECADE = 256
SIGN_DECADES = 6
SIGN_RANGES = (1, 2, 3, 4, 5, 8, 16, 64, 256, 1024)

SERIES_NAMES = {
    "first_derivative_series": (1.0, 1, True),
    "second_derivative_series": (2.0, 2, True),
    "gamma_moment_series": (None, 2, False),
    "third_derivative_series": (1.5, 3, True),
}


@dataclass
class AdmissibilityReport:
    passed: bool
    gamma_window: Optional[tuple]
    k_max: float
    series_values: dict
    failures: list

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "gamma_window": list(self.gamma_window) if self.gamma_window else None,
            "k_max": self.k_max,
            "series_values": {k: v.to_dict() for k, v in self.series_values.items()},
            "failures": list(self.failures),
        }

    @property
    def failed_conditions(self) -> list:
        return [f["condition"] for f in self.failures]


def gamma_grid(n: int = N_GAMMA) -> np.ndarray:
    return GAMMA_LO + (GAMMA_HI - GAMMA_LO) * np.arange(1, n + 1) / (n + 1)


def _sign_violations(fam: PotentialFamily) -> list:
    out = []
    n_pts = SIGN_POINTS_PER_DECADE * SIGN_DECADES + 1
    want = (1, -1, 1, -1, 1)
    for m in SIGN_RANGES:
        if not fam.active(m) and fam.kind != CUSTOM:
            continue
        top = 4 * fam.nu * m
        r = top * np.logspace(-SIGN_DECADES, 0, n_pts)
        for order, s in enumerate(want):
            vals = s * np.asarray(fam.phi(m, r, order))
            bad = vals < 0 if m > 1 else vals <= 0
            if np.any(bad):
                out.append({"condition": "sign_pattern",
                            "detail": f"order {order} derivative of Phi_{m} has the wrong sign"})
    return out


def check_assumptions(fam: PotentialFamily, K: float, M: int = 1000) -> AdmissibilityReport:
    """Check sign pattern, energy window and summability conditions for ``(fam, K)``."""
    k_max = fam.nu**2 / 2
    failures = []
    values = {}
    if not 0 < K < k_max:
        failures.append({"condition": "energy_constraint",
                         "detail": f"K={K} outside the open interval (0, nu^2/2={k_max})"})
    failures += _sign_violations(fam)
    shift_ok = 0 < K < k_max
    for name, (w, order, shifted) in SERIES_NAMES.items():
        if w is None:
            continue
        if shifted and not shift_ok:
            continue
        enc = series(fam, w, order, K if shifted else 0.0, M)
        values[name] = enc
        if not enc.finite:
            failures.append({"condition": name, "detail": "series diverges"})
    passing = []
    last = None
    for g in gamma_grid():
        enc = series(fam, float(g), 2, 0.0, M)
        last = (g, enc)
        if enc.finite:
            passing.append(g)
            values["gamma_moment_series"] = enc
    if not passing:
        values["gamma_moment_series"] = last[1]
        failures.append({"condition": "gamma_moment_series",
                         "detail": "no gamma in (5/2, 3) makes sum Phi_m''(nu m) m^gamma finite"})
        window = None
    else:
        lo = GAMMA_LO if passing[0] == gamma_grid()[0] else float(passing[0])
        hi = GAMMA_HI if len(passing) == N_GAMMA else float(passing[-1])
        window = (lo, hi)
    return AdmissibilityReport(not failures, window, k_max, values, failures)


def truncation_order(fam: PotentialFamily, K: float, tol_tail: float, cap: int = 10**6) -> int:
    """Smallest M whose certified tail of ``sum K m^2 Phi_m''(nu m - sqrt(2Km))`` is below
    ``tol_tail`` times the partial sum."""
    if not 0 < K < fam.nu**2 / 2:
        raise TruncationError("K outside (0, nu^2/2)")
    if fam.kind == FINITE_RANGE:
        return max(fam.max_range, 1)
    m = np.arange(1, cap + 1, dtype=float)
    arg = fam.nu * m - np.sqrt(2 * K * m)
    if fam.kind == POWER_LAW:
        alpha = fam.alpha
        head = np.cumsum(K * m**2 * alpha * (alpha + 1) * arg ** (-alpha - 2))
        beta = 1.0 - math.sqrt(2 * K) / (fam.nu * np.sqrt(m))
        c_hi = K * alpha * (alpha + 1) * (fam.nu * beta) ** (-alpha - 2)
        if alpha <= 1:
            raise TruncationError("tail diverges")
        tail = c_hi * m ** (1 - alpha) / (alpha - 1)
    else:
        f = K * m**2 * np.asarray(fam.custom(m, arg, 2), dtype=float)
        head = np.cumsum(f)
        f2 = np.append(f[1:], f[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            p = -np.log(np.where(f2 > 0, f2 / f, 1.0)) / np.log((m + 1) / m)
            tail = np.where(p > 1, f * m / (p - 1), np.inf)
        tail[f == 0] = 0.0
    ok = np.nonzero(tail < tol_tail * head)[0]
    if ok.size == 0:
        raise TruncationError(f"no truncation order <= {cap} meets tol_tail={tol_tail}")
    return int(ok[0] + 1)
