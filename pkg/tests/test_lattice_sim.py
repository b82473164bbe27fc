import csv
import math

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from lrfput.lattice_sim import (BoundaryContaminationError, ChainTooShortError, CollisionError,
                                LatticeState, SimulationError, force_tail_bound, forces,
                                hamiltonian, init_from_wave, reverse, run)
from lrfput.operators import apply_am
from lrfput.potentials import FINITE_RANGE, PotentialFamily
from lrfput.profiles import Grid, Profile
from lrfput.solver import WaveSolution

FAM = PotentialFamily(alpha=2.0)


def resting_wave(fam=FAM, grid=Grid(4, 10.0)):
    return WaveSolution(profile=Profile(grid, np.zeros(grid.n)), c=1.0, K=0.0, P=0.0, Q_of_K=0.0,
                        residual={"l2": 0.0, "linf": 0.0}, iterations=0, eps1=fam.nu,
                        tail_bound=0.0, monotone_certificate=True, family=fam.to_dict(), M=8)


def chain(x, fam, M_sim, ghosts_left, ghosts_right, v=None):
    x = np.asarray(x, float)
    return LatticeState(N=(x.size - 1) // 2, x=x, v=np.zeros_like(x) if v is None else v, fam=fam,
                        M_sim=M_sim, ghost_left=np.asarray(ghosts_left, float),
                        ghost_right=np.asarray(ghosts_right, float))


def test_resting_chain_is_equilibrium():
    st = init_from_wave(resting_wave(), 20)
    j = np.arange(-20, 21)
    assert np.array_equal(st.x, j * 1.0) and not np.any(st.v)
    assert np.max(np.abs(forces(st))) < 1e-12
    assert hamiltonian(st) == pytest.approx(0.0, abs=1e-12)
    rep = run(st, 0.01, 0.5)
    assert not rep.speed_defined and math.isnan(rep.c_measured)
    assert rep.shape_error == 0.0 and rep.energy_drift < 1e-12


def test_interior_disturbance_conserves_momentum():
    fam = PotentialFamily(alpha=3.0)
    rng = np.random.default_rng(3)
    N, g = 30, 8
    j = np.arange(-N - g, N + g + 1, dtype=float)
    x = j.copy()
    x[g + 20:g + 40] += 0.05 * rng.standard_normal(20)
    st = chain(x[g:-g], fam, g, x[:g], x[-g:])
    a = forces(st)
    assert abs(a.sum()) < 1e-12 * np.abs(a).max()
    assert np.abs(a).max() > 1e-3


def test_single_compressed_bond_pushes_endpoints_apart():
    fam = PotentialFamily(kind=FINITE_RANGE, alpha=2.0, m0=2)
    st = chain([-1.0, 0.0, 0.8], fam, 1, [-2.0], [1.8])
    a = forces(st)
    # Phi'(r) = -2 r^-3: the shortened bond 0.8 against unit bonds elsewhere
    expected = -2 * 0.8**-3 + 2
    assert a == pytest.approx([0.0, expected, -expected], abs=1e-14)
    assert a[1] < 0 < a[2]


def test_collision_detected():
    with pytest.raises(CollisionError):
        chain([-1.0, 0.5, 0.2], FAM, 1, [-2.0], [2.0])


def test_initial_strain_matches_unit_window_average(lattice_solution):
    st = init_from_wave(lattice_solution, 256)
    r = st.strain()
    xi, a = apply_am(lattice_solution.profile, 1, extended=True)
    model = CubicSpline(xi, a)
    bonds = np.arange(-256, 257) + 0.5
    inside = np.abs(bonds) < 55
    # two fourth-order routes to the same average at h = 1/16
    assert np.max(np.abs(r[inside] - model(bonds[inside]))) < 1e-5 * r.max()
    assert np.all(r >= -1e-12)
    assert np.all(np.diff(st.positions()) > 0)
    assert st.M_sim == 64
    assert st.v[256] == pytest.approx(lattice_solution.c * lattice_solution.profile.center)


def test_short_chain_rejected(lattice_solution):
    with pytest.raises(ChainTooShortError):
        init_from_wave(lattice_solution, 80)


def test_time_reversal_returns_initial_state(lattice_solution):
    st = init_from_wave(lattice_solution, 256, 16)
    x0, v0 = st.x.copy(), st.v.copy()
    run(st, 1e-3, 1.0)
    reverse(st, 1e-3, 1.0)
    assert np.max(np.abs(st.x - x0)) <= 1e-8 * np.max(np.abs(x0))
    assert np.max(np.abs(st.v - v0)) <= 1e-8 * np.max(np.abs(v0))


def test_energy_error_is_second_order_in_dt(lattice_solution):
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        rep = run(init_from_wave(lattice_solution, 256, 16), dt, 5.0)
        errs.append(rep.energy_error_max)
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5))


def test_short_run_tracks_predicted_speed(lattice_solution, tmp_path):
    st = init_from_wave(lattice_solution, 256, 16)
    path = tmp_path / "traj.csv"
    rep = run(st, 0.01, 5.0, stride=100, trajectory_path=path)
    assert rep.c_fit == pytest.approx(lattice_solution.c, rel=2e-2)
    assert rep.ordering_ok and rep.steps == 500
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "j", "x", "v", "strain"]
    assert len(rows) == 1 + 6 * 513
    rep.to_json(tmp_path / "report.json")


def test_run_guards(lattice_solution):
    st = init_from_wave(lattice_solution, 256, 8)
    with pytest.raises(SimulationError):
        run(st, 0.05, 1.0)
    with pytest.raises(BoundaryContaminationError):
        run(init_from_wave(lattice_solution, 256, 8), 0.02, 34.0)


def test_force_tail_bound():
    fr = PotentialFamily(kind=FINITE_RANGE, alpha=2.0, m0=4)
    assert force_tail_bound(fr, 3, 0.5) == 0.0
    b16, b64 = force_tail_bound(FAM, 16, 0.5), force_tail_bound(FAM, 64, 0.5)
    assert 0 < b64 < b16
    # direct sum of the curvature bound past the cutoff
    m = np.arange(17, 10**6)
    assert b16 >= 2 * 0.5 * np.sum(6 * (m - 0.5) ** -4.0)
