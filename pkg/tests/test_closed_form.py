from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from clumplab.closed_form import (
    Barenblatt,
    BesselShoot,
    I_of_C,
    InfeasibleParameters,
    NoCompactSteadyState,
    bessel_fixed_point,
    bessel_implicit_x,
    bessel_limit,
    bessel_limit_mass,
    bessel_limit_residual,
    bessel_trajectory,
    cbar_upper_bound,
    consistency_C,
    gaussian_limit,
    gaussian_limit_residual,
    scan_fixed_point,
    solve_bessel_steady,
    support_length,
)
from clumplab.steady import solve_steady


@pytest.fixture(scope="module")
def bessel_m3():
    return solve_bessel_steady(0.3, 3.0, n_cells=800)


def test_gaussian_limit_m15():
    lim = gaussian_limit(1.5)
    assert lim.sigma2 == pytest.approx(1.0)
    assert lim.nu_inf == pytest.approx(0.4466, abs=5e-5)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(lim(x), np.exp(-x * x / 2) / np.sqrt(2 * np.pi))


def test_gaussian_limit_tends_to_kernel_norm():
    lim = gaussian_limit(1.999)
    assert lim.sigma2 > 900
    assert lim.nu_inf == pytest.approx(1.0, abs=1e-2)


@pytest.mark.parametrize("m", [1.2, 1.5, 1.8])
def test_gaussian_limit_is_a_solution(m):
    res = gaussian_limit_residual(m, np.linspace(-5, 5, 11))
    assert np.max(np.abs(res)) < 1e-6
    lim = gaussian_limit(m)
    assert quad(lim, -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("m", [0.9, 1.0, 2.0, 2.5])
def test_limits_need_sub_quadratic_m(m):
    with pytest.raises(ValueError):
        gaussian_limit(m)
    with pytest.raises(ValueError):
        bessel_limit(m)


def test_bessel_limit_exact_values():
    assert bessel_limit(1.5).nu_inf == pytest.approx(1 / np.sqrt(6), abs=1e-9)
    assert bessel_limit(4 / 3).nu_inf == pytest.approx((2 * np.pi ** 2) ** (-1 / 3), abs=1e-9)


@pytest.mark.parametrize("m", [1.3, 1.5, 1.7])
def test_bessel_limit_mass_and_shape(m):
    lim = bessel_limit(m)
    assert bessel_limit_mass(m, lim.nu_inf, quadrature=False) == pytest.approx(1.0, abs=1e-8)
    x = np.linspace(0, 10, 50)
    assert np.all(np.diff(lim(x)) < 0)
    np.testing.assert_allclose(lim(-x), lim(x))
    assert lim.p(0.0) == pytest.approx(lim.p_inf_0, rel=1e-12)


@pytest.mark.parametrize("m", [1.4, 1.5])
def test_bessel_limit_residual(m):
    res = bessel_limit_residual(m, np.linspace(-6, 6, 9))
    assert np.max(np.abs(res)) < 1e-5


@pytest.mark.parametrize("m", [1.3, 1.5, 1.8])
def test_bessel_limit_first_integral(m):
    lim = bessel_limit(m)
    x = np.linspace(-8, 8, 41)
    p, dp = lim.p(x), lim.p_derivative(x)
    lhs = 0.5 * p ** 2 - 0.5 * dp ** 2
    rhs = (m - 1) / (m * lim.nu_inf) * p ** (m / (m - 1))
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_implicit_x_endpoints_and_monotone():
    Cbar = bessel_fixed_point(0.3, 3.0)
    sh = BesselShoot(1.0, Cbar, 0.3, 3.0)
    assert bessel_implicit_x(sh, 1.0) == 0.0
    xs = [bessel_implicit_x(sh, p) for p in (0.9, 0.5, 0.1, 0.0)]
    assert np.all(np.diff(xs) > 0)
    L = support_length(sh)
    assert L == xs[-1]
    assert bessel_trajectory(sh).L == pytest.approx(L, rel=1e-9)
    with pytest.raises(ValueError):
        bessel_implicit_x(sh, 1.5)


def test_profile_satisfies_ode():
    nubar, m = 0.3, 3.0
    Cbar = bessel_fixed_point(nubar, m)
    traj = bessel_trajectory(BesselShoot(1.0, Cbar, nubar, m))
    h = 1e-3
    x = np.linspace(0.05, 0.9 * traj.L, 25)
    p = traj.p_of_x(x)
    d2 = (traj.p_of_x(x + h) - 2 * p + traj.p_of_x(x - h)) / h ** 2
    res = p - d2 - (p ** (1 / (m - 1)) - Cbar) / nubar
    assert np.max(np.abs(res)) < 1e-5


@pytest.mark.parametrize("nubar,m", [(0.3, 3.0), (0.2, 2.5), (0.4, 1.5)])
def test_feasibility_boundary_is_sharp(nubar, m):
    bound = cbar_upper_bound(nubar, m)
    eps = 1e-6
    BesselShoot(1.0, bound - eps, nubar, m).check_feasible()
    with pytest.raises(InfeasibleParameters):
        BesselShoot(1.0, bound + eps, nubar, m).check_feasible()
    assert BesselShoot(1.0, 0.0, nubar, m).cbar_bound() == pytest.approx(bound)


def test_fixed_point_exists_for_small_nubar_and_is_unique():
    cs, vals = scan_fixed_point(0.2, 3.0, n=100)
    assert np.count_nonzero(np.sign(vals[:-1]) != np.sign(vals[1:])) == 1
    assert all(I_of_C(c, 0.2, 3.0) >= 0 for c in cs[::20])


def test_no_fixed_point_near_feasibility_cap():
    # m = 3: the admissible interval for C is empty once nubar >= 1
    with pytest.raises(NoCompactSteadyState):
        bessel_fixed_point(0.9, 3.0, n_scan=20)
    with pytest.raises(InfeasibleParameters):
        scan_fixed_point(1.0, 3.0)


def test_bessel_steady_state_normalization(bessel_m3):
    ss = bessel_m3
    # trapezoid mass on the grid; the square-root edge limits its accuracy
    assert ss.mass() == pytest.approx(1.0, abs=1e-4)
    assert consistency_C(ss) < 1e-4
    assert np.all(np.diff(ss.rho) <= 1e-14)
    Cbar, mass = ss.history[0][1], ss.history[1][1]
    assert ss.nu == pytest.approx(0.3 * mass, rel=1e-12)
    assert ss.C == pytest.approx(Cbar / mass, rel=1e-12)


def test_bessel_nu_of_L_increasing_for_m3():
    Ls, nus = [], []
    for nubar in (0.15, 0.3, 0.45):
        ss = solve_bessel_steady(nubar, 3.0, n_cells=50)
        Ls.append(ss.L)
        nus.append(ss.nu)
    assert np.all(np.diff(Ls) > 0) and np.all(np.diff(nus) > 0)


def test_bessel_sub_quadratic_stays_below_limit():
    for nubar in (0.2, 0.3):
        ss = solve_bessel_steady(nubar, 1.5, n_cells=50)
        assert ss.nu < 1 / np.sqrt(6)


def test_bessel_lands_on_iterative_curve(bessel_m3):
    it = solve_steady("bessel", 3.0, bessel_m3.L, n_cells=400)
    assert it.nu == pytest.approx(bessel_m3.nu, rel=0.02)


@pytest.mark.parametrize("m", [2.0, 3.0])
def test_barenblatt_mass_and_support(m):
    b = Barenblatt(m, nu=0.7)
    for t in (0.0, 3.0):
        R = b.support(t)
        assert quad(lambda x: b(x, t), -R, R)[0] == pytest.approx(1.0, abs=1e-9)
        assert b(R * 1.0001, t) == 0.0
    assert b.support(3.0) > b.support(0.0)


@pytest.mark.parametrize("m", [2.0, 3.0])
def test_barenblatt_solves_porous_medium(m):
    nu = 0.7
    b = Barenblatt(m, nu)
    D = nu * (m - 1) / m
    t, h, k = 1.0, 1e-3, 1e-4
    x = np.linspace(-0.6, 0.6, 13) * b.support(t)
    rho_t = (b(x, t + k) - b(x, t - k)) / (2 * k)
    um = lambda y: b(y, t) ** m
    lap = (um(x + h) - 2 * um(x) + um(x - h)) / h ** 2
    np.testing.assert_allclose(rho_t, D * lap, atol=1e-5)


def test_barenblatt_rescaled_profile_is_time_invariant():
    b = Barenblatt(3.0, 1.0)
    xt = np.linspace(-2, 2, 21)
    for t in (0.0, 5.0, 50.0):
        lam = b(0.0, t)
        np.testing.assert_allclose(b(xt / lam, t) / lam, b.rescaled(xt), atol=1e-13)
