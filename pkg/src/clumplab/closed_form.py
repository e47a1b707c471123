"""Exact and semi-analytic steady states.

Gaussian kernel
    The infinite-support problem ``nu rho^(m-1) = G * rho`` has a Gaussian
    solution for 1 < m < 2.

Bessel kernel ``exp(-|x|)/2``
    G is the Green's function of ``1 - d^2/dx^2``, so with ``p = rho^(m-1)``
    the steady state obeys the ODE ``p - p'' = (p^(1/(m-1)) - C)/nu`` with
    ``p'(0) = 0``.  One quadrature gives ``x`` as a function of ``p``; the
    support length follows from ``p(L) = 0`` and the constant C from a scalar
    fixed point.  For 1 < m < 2 the limiting (C = 0, L = inf) profile is a
    power of ``sech``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import gamma

from .discretization import Grid
from .kernels import BESSEL, GAUSSIAN
from .steady import SteadyState, compute_C

log = logging.getLogger(__name__)


class InfeasibleParameters(ValueError):
    """The square-root bracket of the implicit profile goes negative."""


class NoCompactSteadyState(RuntimeError):
    """I(C) - C has no sign change: diffusion dominates."""


@dataclass(frozen=True)
class LimitProfile:
    kernel_variant: str
    m: float
    nu_inf: float
    profile: Callable = None
    sigma2: float = float("nan")
    p_inf_0: float = float("nan")
    p_derivative: Callable = None

    def __call__(self, x):
        return self.profile(np.asarray(x, dtype=float))

    def p(self, x):
        return self(x) ** (self.m - 1.0)


def _check_sub_quadratic(m):
    if not 1.0 < m < 2.0:
        raise ValueError(f"limit profiles exist only for 1 < m < 2, got m={m}")


def gaussian_limit(m: float) -> LimitProfile:
    _check_sub_quadratic(m)
    sigma2 = (m - 1.0) / (2.0 - m)
    nu_inf = ((2 * np.pi) ** (m / 2 - 1) * (m - 1) ** ((m - 1) / 2)
              * (2 - m) ** ((2 - m) / 2))

    def profile(x):
        return np.exp(-x * x / (2 * sigma2)) / np.sqrt(2 * np.pi * sigma2)

    return LimitProfile("gaussian", m, float(nu_inf), profile, sigma2=sigma2)


def _sech_profile(m, nu):
    amp = (m * nu / (2 * (m - 1))) ** (1 / (2 - m))
    k = (2 - m) / (2 * (m - 1))

    def profile(x):
        z = np.exp(-np.abs(k * x))
        sech = 2 * z / (1 + z * z)
        return amp * sech ** (2 / (2 - m))

    return profile


def bessel_limit_mass(m: float, nu: float, quadrature: bool = True) -> float:
    profile = _sech_profile(m, nu)
    if quadrature:
        val, _ = quad(profile, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
        return 2.0 * val
    # int sech^a = B(a/2, 1/2)
    a = 2 / (2 - m)
    k = (2 - m) / (2 * (m - 1))
    amp = (m * nu / (2 * (m - 1))) ** (1 / (2 - m))
    return amp / k * np.sqrt(np.pi) * gamma(a / 2) / gamma((a + 1) / 2)


def bessel_limit(m: float) -> LimitProfile:
    """Limiting sech-power profile; nu_inf from the unit-mass condition."""
    _check_sub_quadratic(m)
    nu_inf = brentq(lambda nu: bessel_limit_mass(m, nu) - 1.0, 1e-6, 10.0,
                    xtol=1e-15, rtol=4 * np.finfo(float).eps)
    k = (2 - m) / (2 * (m - 1))
    profile = _sech_profile(m, nu_inf)
    p0 = (m * nu_inf / (2 * (m - 1))) ** ((m - 1) / (2 - m))

    def p_derivative(x):
        x = np.asarray(x, dtype=float)
        return -profile(x) ** (m - 1) * np.tanh(k * x)

    return LimitProfile("bessel", m, float(nu_inf), profile, p_inf_0=float(p0),
                        p_derivative=p_derivative)


@dataclass(frozen=True)
class BesselShoot:
    """Parameters of the implicit Bessel-kernel profile (normalized p(0)=p0)."""

    p0: float
    Cbar: float
    nubar: float
    m: float

    @property
    def _a(self):
        return 2 * (self.m - 1) / (self.m * self.nubar)

    @property
    def _q(self):
        return self.m / (self.m - 1)

    @property
    def _b(self):
        return 2 * self.Cbar / self.nubar

    def bracket(self, p):
        """Radicand of the implicit profile; must be >= 0 on [0, p0]."""
        p = np.asarray(p, dtype=float)
        p0 = self.p0
        return (p * p - p0 * p0 - self._a * (p ** self._q - p0 ** self._q)
                + self._b * (p - p0))

    def bracket_over_t2(self, t):
        """``bracket(p0 - t^2) / t^2``, evaluated without cancellation."""
        t = np.asarray(t, dtype=float)
        p0 = self.p0
        t2 = t * t
        s = t2 / p0
        with np.errstate(invalid="ignore", divide="ignore"):
            pw = np.where(
                t2 > 0,
                p0 ** self._q * np.expm1(self._q * np.log1p(-s)) / np.where(t2 > 0, t2, 1.0),
                -self._q * p0 ** (self._q - 1),
            )
        return -(2 * p0 - t2) - self._a * pw - self._b

    def cbar_bound(self) -> float:
        """Upper bound on C from p''(0) <= 0 and a nonnegative radicand at p=0."""
        m, nu, p0 = self.m, self.nubar, self.p0
        concave = p0 ** (1 / (m - 1)) - nu * p0
        at_zero = (m - 1) / m * p0 ** (1 / (m - 1)) - nu * p0 / 2
        return float(min(concave, at_zero))

    def check_feasible(self, n_scan: int = 400):
        m, nu, p0 = self.m, self.nubar, self.p0
        slope0 = 2 * p0 - 2 / nu * p0 ** (1 / (m - 1)) + self._b
        if slope0 > 0:
            raise InfeasibleParameters(
                f"p''(0) > 0 for C={self.Cbar:g}, nu={nu:g}: C exceeds "
                f"{p0 ** (1 / (m - 1)) - nu * p0:g}")
        t = np.linspace(0.0, np.sqrt(p0), n_scan + 1)
        g = self.bracket_over_t2(t)
        if np.any(g < 0):
            raise InfeasibleParameters(
                f"radicand negative for C={self.Cbar:g}, nu={nu:g}")

    def dxdt(self, t):
        """Integrand after the substitution p = p0 - t^2 (bounded at t = 0)."""
        return 2.0 / np.sqrt(self.bracket_over_t2(t))


def cbar_upper_bound(nubar: float, m: float) -> float:
    """``min(1 - nubar, (m-1)/m - nubar/2)`` for the normalization p(0) = 1."""
    return float(min(1.0 - nubar, (m - 1) / m - nubar / 2))


def bessel_implicit_x(shoot: BesselShoot, p: float) -> float:
    """Position x at which the profile takes the value p (x(p0) = 0)."""
    if not 0.0 <= p <= shoot.p0:
        raise ValueError("p must lie in [0, p0]")
    shoot.check_feasible()
    upper = np.sqrt(shoot.p0 - p)
    if upper == 0.0:
        return 0.0
    val, _ = quad(shoot.dxdt, 0.0, upper, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


def support_length(shoot: BesselShoot) -> float:
    return bessel_implicit_x(shoot, 0.0)


@dataclass
class BesselTrajectory:
    """Dense solution of the profile ODE in the variable t = sqrt(p0 - p)."""

    shoot: BesselShoot
    L: float
    half_mass: float
    cosh_moment: float
    sol: object

    @property
    def I(self) -> float:
        return float(np.exp(-self.L) * self.cosh_moment)

    def x_of_t(self, t):
        return self.sol.sol(t)[0]

    def p_of_x(self, x, newton_steps: int = 6):
        """Invert x(t) by Newton's method from a tabulated starting guess."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.L)
        t_end = np.sqrt(self.shoot.p0)
        t_tab = t_end * np.sin(np.linspace(0.0, np.pi / 2, 4001))
        x_tab = self.x_of_t(t_tab)
        t = np.interp(x, x_tab, t_tab)
        for _ in range(newton_steps):
            t = np.clip(t - (self.x_of_t(t) - x) / self.shoot.dxdt(t), 0.0, t_end)
        return np.maximum(self.shoot.p0 - t * t, 0.0)


def bessel_trajectory(shoot: BesselShoot, rtol: float = 1e-12) -> BesselTrajectory:
    shoot.check_feasible()
    m = shoot.m
    expo = 1.0 / (m - 1.0)

    def rhs(t, y):
        f = shoot.dxdt(t)
        rho = max(shoot.p0 - t * t, 0.0) ** expo
        return [f, rho * f, np.cosh(y[0]) * rho * f]

    t_end = np.sqrt(shoot.p0)
    sol = solve_ivp(rhs, (0.0, t_end), [0.0, 0.0, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True)
    if not sol.success:
        raise InfeasibleParameters(f"profile integration failed: {sol.message}")
    L, half_mass, cosh_moment = sol.y[:, -1]
    return BesselTrajectory(shoot, float(L), float(half_mass), float(cosh_moment), sol)


def I_of_C(Cbar: float, nubar: float, m: float) -> float:
    """``I(C) = exp(-L) int_0^L cosh(y) pbar(y)^(1/(m-1)) dy`` with pbar(0) = 1."""
    return bessel_trajectory(BesselShoot(1.0, Cbar, nubar, m)).I


def scan_fixed_point(nubar: float, m: float, n: int = 100, margin: float = 1e-6):
    """Tabulate ``I(C) - C`` on the admissible interval ``[0, bound)``.

    The last point stays ``margin`` (relative) below the bound: at the bound
    itself the profile flattens at the origin and its support diverges.
    """
    hi = cbar_upper_bound(nubar, m)
    if hi <= 0:
        raise InfeasibleParameters(f"no admissible C for nubar={nubar:g}, m={m:g}")
    cs = np.linspace(0.0, hi * (1 - margin), n)
    vals = np.array([I_of_C(c, nubar, m) - c for c in cs])
    return cs, vals


def bessel_fixed_point(nubar: float, m: float, n_scan: int = 100) -> float:
    cs, vals = scan_fixed_point(nubar, m, n_scan)
    flips = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if flips.size == 0:
        raise NoCompactSteadyState(
            f"I(C) - C has no sign change for nubar={nubar:g}, m={m:g}")
    if flips.size > 1:
        log.warning("I(C) - C changes sign %d times; taking the first", flips.size)
    else:
        log.debug("unique sign change of I(C) - C on a %d-point scan", n_scan)
    i = flips[0]
    return float(brentq(lambda c: I_of_C(c, nubar, m) - c, cs[i], cs[i + 1],
                        xtol=1e-12))


def solve_bessel_steady(nubar: float, m: float, n_cells: int = 1600) -> SteadyState:
    """Bessel-kernel clump for a given nubar, rescaled to unit mass.

    The profile is computed with p(0) = 1, then ``rho -> rho/M``,
    ``nu -> nubar * M^(m-2)`` and ``C -> C/M`` with ``M`` the total mass.
    """
    Cbar = bessel_fixed_point(nubar, m)
    traj = bessel_trajectory(BesselShoot(1.0, Cbar, nubar, m))
    mass = 2.0 * traj.half_mass
    grid = Grid(0.0, traj.L, n_cells)
    rho_bar = traj.p_of_x(grid.nodes) ** (1.0 / (m - 1.0))
    rho_bar[-1] = 0.0
    ss = SteadyState(grid, rho_bar / mass, nubar * mass ** (m - 2.0), Cbar / mass,
                     float(m), BESSEL, iterations=0)
    ss.residual_sup = float("nan")
    ss.history = [("Cbar", Cbar), ("mass_bar", mass)]
    return ss


def gaussian_limit_residual(m: float, x, half_width: float | None = None) -> np.ndarray:
    """``nu_inf rho^(m-1) - G * rho`` at points x, convolution by quadrature."""
    lim = gaussian_limit(m)
    return _limit_residual(lim, GAUSSIAN.eval, x, half_width or 12 * np.sqrt(lim.sigma2) + 12)


def bessel_limit_residual(m: float, x, half_width: float = 200.0) -> np.ndarray:
    return _limit_residual(bessel_limit(m), BESSEL.eval, x, half_width)


def _limit_residual(lim: LimitProfile, G, x, half_width):
    out = []
    for xi in np.atleast_1d(x):
        pts = [xi] if abs(xi) < half_width else None
        conv, _ = quad(lambda y: G(xi - y) * lim(y), -half_width, half_width,
                       points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
        out.append(lim.nu_inf * lim(xi) ** (lim.m - 1) - conv)
    return np.array(out)


def consistency_C(ss: SteadyState) -> float:
    """Difference between the stored C and the quadrature value of (G*rho)(L)."""
    return abs(ss.C - compute_C(ss))


@dataclass(frozen=True)
class Barenblatt:
    """Source solution of ``rho_t = nu (m-1)/m (rho^m)_xx`` (kernel switched off).

    ``rho(x, t) = s^-a (A - k x^2 s^-2a)_+^(1/(m-1))`` with ``s = D (t + t0)``,
    ``D = nu (m-1)/m``, ``a = 1/(m+1)``, ``k = a (m-1)/(2m)``; ``A`` fixes the mass.
    """

    m: float
    nu: float
    mass: float = 1.0
    t0: float = 1.0

    @property
    def alpha(self) -> float:
        return 1.0 / (self.m + 1.0)

    @property
    def k(self) -> float:
        return self.alpha * (self.m - 1.0) / (2.0 * self.m)

    @property
    def A(self) -> float:
        from scipy.special import beta

        p = 1.0 / (self.m - 1.0)
        return (self.mass * np.sqrt(self.k) / beta(0.5, p + 1.0)) ** (1.0 / (p + 0.5))

    def _s(self, t):
        return self.nu * (self.m - 1.0) / self.m * (t + self.t0)

    def __call__(self, x, t):
        s = self._s(t)
        a = self.alpha
        base = self.A - self.k * np.asarray(x, dtype=float) ** 2 * s ** (-2 * a)
        return s ** (-a) * np.maximum(base, 0.0) ** (1.0 / (self.m - 1.0))

    def support(self, t) -> float:
        return float(np.sqrt(self.A / self.k) * self._s(t) ** self.alpha)

    def cell_averages(self, grid: Grid, t) -> np.ndarray:
        """Cell averages by Gauss-Legendre quadrature on each cell."""
        xg, wg = np.polynomial.legendre.leggauss(8)
        left = grid.nodes[:-1, None]
        pts = left + 0.5 * grid.dx * (xg[None, :] + 1.0)
        return 0.5 * (self(pts, t) @ wg)

    def rescaled(self, x_tilde):
        """The time-independent profile after scaling to unit peak height."""
        t = 0.0
        lam = float(self(0.0, t))
        return self(np.asarray(x_tilde) / lam, t) / lam
