import warnings

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from pulledfront import front, model, operator
from pulledfront.errors import GapFails, WindowUnderflow
from oracles import fkpp_shooting


@pytest.fixture(scope="module")
def fk():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m)
    return m, ss, front.solve_front(m, ss, L=100, n=8192)


def test_fkpp_front_is_monotone_with_small_residual(fk):
    _, _, fr = fk
    assert fr.monotone
    assert fr.residual <= 1e-8
    assert abs(fr.q[0] - 1) <= 1e-6 and abs(fr.q[-1]) <= 1e-6
    # an even node count puts x = 0 between nodes
    assert CubicSpline(fr.x, fr.q)(0.0) == pytest.approx(0.5, abs=1e-8)


def test_fkpp_front_has_linear_prefactor(fk):
    _, _, fr = fk
    a, b, res = front.front_decay_fit(fr)
    assert b > 0.1 * abs(a)
    assert res < 1e-3


def test_fkpp_front_matches_shooting_oracle(fk):
    _, _, fr = fk
    s, left, right = fkpp_shooting()
    assert CubicSpline(fr.x, fr.dq)(0.0) == pytest.approx(s, abs=1e-7)
    for lo, hi, sol in ((-9.0, 0.0, left), (0.0, 20.0, right)):
        sel = (fr.x >= lo) & (fr.x <= hi)
        assert np.max(np.abs(sol.sol(fr.x[sel])[0] - fr.q[sel])) <= 1e-7


def test_decay_fit_stable_under_window_shift(fk):
    _, _, fr = fk
    ratios = []
    for d in (-5, 0, 5):
        a, b, _ = front.front_decay_fit(fr, (10 + d, 30 + d))
        ratios.append(b / a)
    # nonlinear corrections decay like x^2 exp(-x), so the spread shrinks to the right
    assert abs(ratios[0] - ratios[1]) <= 5e-2 * abs(ratios[1])
    assert abs(ratios[2] - ratios[1]) <= 2e-3 * abs(ratios[1])
    assert abs(ratios[2] - ratios[1]) < abs(ratios[0] - ratios[1])


def test_decay_fit_window_errors(fk):
    _, _, fr = fk
    with pytest.raises(ValueError):
        front.front_decay_fit(fr, (-5, 10))
    with pytest.raises(ValueError):
        front.front_decay_fit(fr, (10, 99))


def test_decay_fit_underflow():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    fr = front.solve_front(m, ss, L=100, n=2001)
    with pytest.raises(WindowUnderflow):
        front.front_decay_fit(fr, (60, 90))


def test_pure_exponential_has_no_linear_part(fk):
    _, _, fr = fk
    x = fr.x
    w = np.where(x >= 1, 0.7, fr.w)
    fake = front.FrontProfile(fr.grid, w, fr.c_star, fr.eta_star, 0.0, 0, True)
    a, b, _ = front.front_decay_fit(fake)
    assert a == pytest.approx(0.7, abs=1e-12)
    assert abs(b) <= 1e-12


def test_restart_from_converged_profile(fk):
    m, ss, fr = fk
    again = front.solve_front(m, ss, L=100, n=8192, init=fr)
    assert again.iterations <= 1
    assert np.max(np.abs(again.q - fr.q)) <= 1e-10


def test_bistable_boundary_case_has_pure_exponential_tail():
    m = model.bistable(1.0 / 3.0)
    ss = model.find_spreading_speed(m)
    fr = front.solve_front(m, ss, L=100, n=4001)
    a, b, _ = front.front_decay_fit(fr)
    # compare b/a ~ 0.3 for Fisher-KPP
    assert abs(b) <= 1e-3 * abs(a)
    with pytest.raises(GapFails):
        front.compute_psi(fr, m, ss)


def test_efkpp_gap_and_linear_prefactor(efkpp):
    assert front.gap_condition(efkpp.model, efkpp.ss)
    a, b, _ = front.front_decay_fit(efkpp.front)
    assert b > 0.1 * abs(a)
    assert efkpp.front.residual <= 1e-8


def test_psi_shape(fkpp):
    x, psi = fkpp.psi.x, fkpp.psi.psi
    right = (x >= 50) & (x <= 150)
    slope = np.polyfit(x[right], psi[right], 1)[0]
    assert slope == pytest.approx(1.0, abs=1e-2)
    left = x <= -30
    assert np.max(np.abs(psi[left])) <= 1e-6


@pytest.mark.parametrize("name", ["fkpp", "efkpp"])
def test_psi_is_in_kernel(request, name):
    s = request.getfixturevalue(name)
    res = s.op.apply(s.psi.psi)
    interior = np.abs(s.x) <= s.op.grid.L - 20
    assert np.max(np.abs(res[interior])) <= 1e-6


def test_translation_reproduces_profile(fk):
    m, ss, fr = fk
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        other = front.solve_front(m, ss, L=100, n=8192, phase=0.4)
    # locate where the other profile equals 1/2 and shift it onto x = 0
    x0 = np.interp(-0.5, -other.q, other.x)
    moved = other.shifted(-x0)
    inner = np.abs(fr.x) <= 40
    assert np.max(np.abs(moved[inner] - fr.q[inner])) <= 1e-6


def test_grid_convergence():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    xs = np.linspace(-20, 20, 81)
    vals = [np.interp(xs, f.x, f.q) for f in
            (front.solve_front(m, ss, L=100, n=n) for n in (2001, 4001, 8001))]
    e1 = np.max(np.abs(vals[0] - vals[2]))
    e2 = np.max(np.abs(vals[1] - vals[2]))
    assert e2 < e1 / 3


def test_domain_length_independence():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    a = front.solve_front(m, ss, L=100, n=8001)
    b = front.solve_front(m, ss, L=150, n=12001)
    sel = np.abs(a.x) <= 80
    # both grids have spacing 1/40, so nodes coincide on the common window
    qb = np.interp(a.x[sel], b.x, b.q)
    assert np.max(np.abs(qb - a.q[sel])) <= 1e-7
