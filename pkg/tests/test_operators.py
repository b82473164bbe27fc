import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrfput.operators import (EnergyBreakdown, SingularityError, ZeroGradientError, a1_center,
                              apply_am, energy_and_gradient, eta_value, far_start, gradient, mu,
                              per_m_table, potential_energy, q_of_k, q_of_k_truncated,
                              quadratic_energy, sample_points, wave_residual, write_per_m_csv)
from lrfput.potentials import CUSTOM, FINITE_RANGE, PotentialFamily
from lrfput.profiles import (FieldOnGrid, Grid, Profile, cone_defects, inner, kinetic_energy,
                             l2_norm, make_gaussian_seed, make_w0, make_wl, normalize_to)

from conftest import SMALL, cone_profile, half_samples

FAM = PotentialFamily(alpha=2.0)
energies = st.floats(0.01, 0.45)


def window_kernel(mq):
    """Node weights of one window: unit weights inside, 1/24 moved across each end."""
    k = np.zeros(mq + 2)
    k[1:-1] = 1.0
    k[[0, -1]] += 1 / 24
    k[[1, -2]] -= 1 / 24
    return k


def oracle_energies(W, M, nu=1.0):
    """P and Q for Phi = r^-2 by dense convolution over every sample of every range."""
    h, q = W.grid.h, W.grid.q
    P = Q = 0.0
    for m in range(1, M + 1):
        a = h * np.convolve(W.values, window_kernel(m * q))
        x = a / (nu * m)
        P += h * np.sum(x**2 * (3 - 2 * x) / (1 - x) ** 2) / (nu * m) ** 2
        Q += 0.5 * 6 / (nu * m) ** 4 * h * np.sum(a**2)
    return P, Q


def test_apply_am_matches_dense_convolution():
    W = make_gaussian_seed(0.2, 0.5, SMALL)
    for m in (1, 2, 5, 9):
        xi, a = apply_am(W, m, extended=True)
        assert np.allclose(a, SMALL.h * np.convolve(W.values, window_kernel(m * SMALL.q)),
                           rtol=0, atol=1e-15)
        assert np.allclose(xi, sample_points(SMALL, m))
        assert xi[0] + xi[-1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("q", [2, 3, 4, 5])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_apply_am_is_self_adjoint_at_nodes(q, m):
    g = Grid(q, 6.0)
    rng = np.random.default_rng(q * 10 + m)
    inside = np.abs(g.x) < 6.0 - m - 1
    U, V = (FieldOnGrid(g, rng.standard_normal(g.n) * inside) for _ in range(2))
    assert inner(apply_am(U, m), V) == pytest.approx(inner(U, apply_am(V, m)), rel=1e-13, abs=1e-14)


def test_apply_am_on_plateau_matches_closed_form():
    K, L = 0.1, 4
    W = make_wl(K, L, Grid(4, 8.0))
    for m in range(1, 2 * L):
        assert apply_am(W, m).values[W.grid.N] == pytest.approx(math.sqrt(K / L) * m, rel=1e-14)


def test_apply_am_on_indicator_is_tent_up_to_jump_correction():
    for q in (5, 11, 21):
        g = Grid(q, 3.0)
        a = apply_am(make_w0(1.0, g), 1).values
        tent = np.maximum(1 - np.abs(g.x), 0.0)
        # the end correction mis-weights a jump by h/24 per window edge
        assert np.max(np.abs(a - tent)) <= g.h / 12 + 1e-14
        assert a[g.N] == pytest.approx(1 - g.h / 12, rel=1e-14)


def test_zero_profile():
    Z = Profile(SMALL, np.zeros(SMALL.n))
    assert not np.any(apply_am(Z, 3).values)
    assert potential_energy(Z, FAM).total == 0.0
    assert quadratic_energy(Z, FAM).total == 0.0
    assert not np.any(gradient(Z, FAM).values)
    assert wave_residual(Z, 3.0, FAM)["linf"] < 1e-15
    with pytest.raises(ZeroGradientError):
        mu(Z, FAM)
    with pytest.raises(ValueError):
        apply_am(Z, 0)


@pytest.mark.parametrize("M", [1, 6, 7, 30])
def test_energies_match_dense_oracle(M):
    # M = 7 is the first range whose windows cover the whole support
    assert far_start(SMALL) == 7
    W = make_gaussian_seed(0.3, 0.5, SMALL)
    P_ref, Q_ref = oracle_energies(W, M)
    P = potential_energy(W, FAM, M)
    assert P.total == pytest.approx(P_ref, rel=1e-12)
    assert quadratic_energy(W, FAM, M).total == pytest.approx(Q_ref, rel=1e-12)
    assert P.M == M and P.per_m.size == M


def far_oracle(W, m_lo, m_hi, chunk=50_000):
    """Ranges m_lo..m_hi, where every window covers the support: ramp, plateau, ramp."""
    h, q, n = W.grid.h, W.grid.q, W.grid.n
    a = h * np.convolve(W.values, window_kernel(m_lo * q))
    ramp = a[: n + 1]
    top = a.max()
    total = 0.0
    for lo in range(m_lo, m_hi + 1, chunk):
        m = np.arange(lo, min(lo + chunk, m_hi + 1), dtype=float)[:, None]
        psi = lambda r: (r / m) ** 2 * (3 - 2 * r / m) / (1 - r / m) ** 2 / m**2
        plateau = (m[:, 0] * q - n - 1) * psi(np.array([[top]]))[:, 0]
        total += h * float(np.sum(psi(ramp[None, :]) + psi(top - ramp[None, :])) + np.sum(plateau))
    return total


def test_full_series_extends_explicit_sums():
    W = make_gaussian_seed(0.3, 0.5, SMALL)
    full = potential_energy(W, FAM)
    P_ref = oracle_energies(W, 200)[0] + far_oracle(W, 201, 10**6)
    # ranges past 10^6 add about 6 Xtot^2 / m^2 h q / 1e12, below 1e-11 relative
    assert full.total == pytest.approx(P_ref, rel=1e-10)
    assert full.total == pytest.approx(float(np.sum(full.per_m)) + full.tail, rel=1e-15)
    assert full.tail > 0 and full.tail_bound >= 0


def test_finite_range_full_series_is_explicit():
    fam = PotentialFamily(kind=FINITE_RANGE, alpha=2.0, m0=4)
    W = make_gaussian_seed(0.2, 0.5, SMALL)
    full = potential_energy(W, fam)
    assert full.total == pytest.approx(oracle_energies(W, 3)[0], rel=1e-12)
    assert full.tail == 0.0


def test_custom_family_needs_explicit_truncation():
    fam = PotentialFamily(kind=CUSTOM, custom=lambda m, r, k: FAM.phi(m, r, k))
    W = make_gaussian_seed(0.2, 0.5, SMALL)
    assert potential_energy(W, fam, 5).total == pytest.approx(potential_energy(W, FAM, 5).total)
    with pytest.raises(ValueError):
        potential_energy(W, fam)


def test_singularity_reported():
    W = Profile(SMALL, 2 * make_w0(1.0, Grid(4, 3.0)).values)
    with pytest.raises(SingularityError) as err:
        potential_energy(W, FAM)
    assert err.value.eps1 < 0


@settings(max_examples=30, deadline=None)
@given(half=half_samples, K=energies)
def test_window_averages_respect_young_and_decay_bounds(half, K):
    W = cone_profile(half, K=K)
    for m in (1, 2, 3, 8):
        xi, a = apply_am(W, m, extended=True)
        assert a.max() <= math.sqrt(2 * K * m) * (1 + 1e-10)
        s = np.abs(xi)
        ok = s > 0
        assert np.all(a[ok] ** 2 * s[ok] <= K * m**2 * (1 + 1e-10))


@settings(max_examples=30, deadline=None)
@given(half=half_samples, K=energies)
def test_averages_and_gradient_stay_in_cone(half, K):
    W = cone_profile(half, K=K)
    for m in (1, 4):
        assert max(cone_defects(apply_am(W, m).values).values()) <= 1e-12
    G = gradient(W, FAM)
    assert max(cone_defects(G.values).values()) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(half=half_samples, K=energies)
def test_quadratic_energy_below_supremum(half, K):
    W = cone_profile(half, K=K)
    assert quadratic_energy(W, FAM).total <= q_of_k(FAM, K) * (1 + 1e-12)
    assert quadratic_energy(W, FAM).total <= potential_energy(W, FAM).total


@settings(max_examples=30, deadline=None)
@given(a=half_samples, b=half_samples, K=energies)
def test_potential_energy_is_convex(a, b, K):
    W = cone_profile(a, K=K)
    V = cone_profile(b, K=K)
    gap = potential_energy(V, FAM).total - potential_energy(W, FAM).total
    assert gap >= inner(gradient(W, FAM), V - W) - 1e-9


def test_gradient_matches_finite_differences():
    W = make_gaussian_seed(0.3, 0.6, SMALL)
    rng = np.random.default_rng(7)
    G = gradient(W, FAM)
    t = 1e-5
    for _ in range(20):
        V = FieldOnGrid(SMALL, rng.standard_normal(SMALL.n) * W.values)
        fd = (potential_energy(W + V * t, FAM).total - potential_energy(W - V * t, FAM).total) / (2 * t)
        assert inner(G, V) == pytest.approx(fd, rel=1e-6)


def test_energy_and_gradient_agree_with_separate_calls():
    W = make_gaussian_seed(0.25, 0.5, SMALL)
    E, G, diag = energy_and_gradient(W, FAM)
    assert E.total == potential_energy(W, FAM).total
    assert np.array_equal(G.values, gradient(W, FAM).values)
    assert diag["eps1"] == pytest.approx(1 - apply_am(W, 1, extended=True)[1].max())
    assert 0 < diag["am_ratio"] < 1


def test_small_amplitude_gradient_linearises_to_quadratic_part():
    W = make_gaussian_seed(0.2, 0.5, SMALL)
    Q = quadratic_energy(W, FAM).total
    for lam in (1e-3, 1e-4):
        lin = inner(gradient(Profile(SMALL, W.values * lam), FAM), W) / lam
        assert lin == pytest.approx(2 * Q, rel=5 * lam)
    small = Profile(SMALL, W.values * 1e-4)
    assert 0 < mu(small, FAM) < math.inf


def test_mu_is_stable_under_refinement():
    vals = []
    for q in (8, 16):
        g = Grid(q, 15.0)
        vals.append(mu(make_gaussian_seed(0.2, 2.0, g), FAM))
    assert vals[1] == pytest.approx(vals[0], rel=1e-6)


def test_q_of_k_closed_form():
    assert q_of_k(FAM, 0.1) == pytest.approx(math.pi**2 / 10, rel=1e-14)
    assert q_of_k_truncated(FAM, 0.1, 10**5) == pytest.approx(math.pi**2 / 10, rel=1e-5)
    fr = PotentialFamily(kind=FINITE_RANGE, alpha=2.0, m0=3)
    assert q_of_k(fr, 0.1) == pytest.approx(0.1 * (6 + 6 * 4 / 16))
    assert eta_value(FAM, None) == pytest.approx(-math.pi**2 / 3, rel=1e-14)
    assert eta_value(FAM, 2) == pytest.approx(-2 - 2 * 2 / 8)


@pytest.mark.parametrize("L", [4, 16])
def test_plateau_energy_gap_lower_bound(L):
    K = 0.1
    W = normalize_to(make_wl(K, L, Grid(4, L + 2.0)), K)
    gap = potential_energy(W, FAM).total - quadratic_energy(W, FAM).total
    c1 = 4 * K**1.5  # -Phi'''(1)/3! for r^-2
    assert gap >= c1 * (2 / math.sqrt(L) - L**-1.5)


def test_per_m_contributions_below_curvature_bound(tmp_path):
    W = make_gaussian_seed(0.3, 0.5, SMALL)
    rows = per_m_table(W, FAM, 40)
    assert len(rows) == 40
    for m, Pm, Qm, bound in rows:
        assert 0 <= Qm <= Pm <= bound
    write_per_m_csv(tmp_path / "per_m.csv", rows)
    head = (tmp_path / "per_m.csv").read_text().splitlines()[0]
    assert head == "m,P_m,Q_m,bound_2Km2C"


def test_energy_breakdown_serialises():
    E = potential_energy(make_gaussian_seed(0.2, 0.5, SMALL), FAM, 3)
    d = E.to_dict()
    assert isinstance(E, EnergyBreakdown) and d["M"] == 3 and len(d["per_m"]) == 3


def test_residual_forms_agree():
    W = make_gaussian_seed(0.3, 0.5, SMALL)
    G = gradient(W, FAM)
    c = 2.5
    rho = wave_residual(W, c, FAM)["field"]
    assert np.allclose(rho, c * c * W.values - G.values, rtol=0, atol=1e-13)
    rho5 = wave_residual(W, c, FAM, 5)["field"]
    assert np.allclose(rho5, c * c * W.values - gradient(W, FAM, 5).values, rtol=0, atol=1e-13)


def test_residual_is_affine_in_speed_squared():
    W = make_gaussian_seed(0.3, 0.5, SMALL)
    r1 = wave_residual(W, 2.0, FAM)["field"]
    r2 = wave_residual(W, 3.0, FAM)["field"]
    assert np.allclose(r2 - r1, 5.0 * W.values, atol=1e-13)


def test_a1_center_symmetric_interpolation():
    W = make_gaussian_seed(0.2, 0.5, SMALL)
    xi, a = apply_am(W, 1, extended=True)
    pair = np.argsort(np.abs(xi))[:2]
    assert a1_center(W) == pytest.approx(a[pair].mean(), rel=1e-15)
