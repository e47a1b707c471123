"""Finite-volume solver for the 1D aggregation-diffusion equation.

    rho_t = -(rho u)_x,    u = (G * rho - nu rho^(m-1))_x

Cell averages on a uniform grid over [-L, L] are advanced by the
semi-discrete conservative scheme

    d rho_j / dt = -(F_{j+1/2} - F_{j-1/2}) / dx,
    F_{j+1/2}    = u^+ rho^E_j + u^- rho^W_{j+1},

with ``u_{j+1/2} = (xi_{j+1} - xi_j)/dx`` and
``xi_j = dx sum_k G(x_j - x_k) rho_k - nu rho_j^(m-1)``.  Interface values
``rho^E``/``rho^W`` are the cell averages (first order) or minmod-limited
linear reconstructions (second order).  Time stepping is SSP-RK3.  Both
domain ends carry zero flux.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import CELL, Grid, GridFunction
from .kernels import Kernel, get_kernel

log = logging.getLogger(__name__)

RHO_FLOOR = 1e-14
BOUNDARY_WARN = 1e-10


class StepFailure(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass
class FVState:
    grid: Grid
    rho_bar: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.rho_bar = np.asarray(self.rho_bar, dtype=float)
        if self.rho_bar.shape != (self.grid.n_cells,):
            raise ValueError("rho_bar must hold one value per cell")

    @property
    def x(self) -> np.ndarray:
        return self.grid.midpoints

    def mass(self) -> float:
        return float(self.grid.dx * np.sum(self.rho_bar))

    def center_of_mass(self) -> float:
        return float(np.sum(self.x * self.rho_bar) / np.sum(self.rho_bar))

    def as_function(self) -> GridFunction:
        return GridFunction(self.grid, self.rho_bar, CELL)

    def copy(self, rho_bar=None, t=None) -> "FVState":
        return FVState(self.grid, self.rho_bar.copy() if rho_bar is None else rho_bar,
                       self.t if t is None else t)


@dataclass(frozen=True)
class SchemeConfig:
    order: int = 2
    cfl: float = 0.4
    limiter: str = "minmod"
    boundary: str = "no-flux"

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.limiter != "minmod":
            raise ValueError(f"unsupported limiter {self.limiter!r}")
        if self.boundary != "no-flux":
            raise ValueError(f"unsupported boundary {self.boundary!r}")


class Convolver:
    """Rectangle-rule convolution on a fixed grid via a cached FFT."""

    def __init__(self, kernel: Kernel, grid: Grid):
        self.kernel = kernel
        self.grid = grid
        n = grid.n_cells
        self.n = n
        self.null = kernel.is_null
        self.size = 1 << int(np.ceil(np.log2(2 * n - 1)))
        g = np.zeros(self.size)
        offsets = grid.dx * np.arange(n)
        g[:n] = kernel.eval(offsets)
        g[self.size - n + 1:] = kernel.eval(-offsets[:0:-1])
        self._spec = np.fft.rfft(g * grid.dx)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if self.null:
            return np.zeros_like(rho)
        out = np.fft.irfft(np.fft.rfft(rho, self.size) * self._spec, self.size)
        return out[: self.n]


def minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


class FVModel:
    """Discrete operators for one (grid, kernel, m, nu, scheme) combination."""

    def __init__(self, grid: Grid, kernel, m: float, nu: float,
                 cfg: SchemeConfig | None = None):
        if m <= 1:
            raise ValueError("m must exceed 1")
        self.grid = grid
        self.kernel = get_kernel(kernel)
        self.m = float(m)
        self.nu = float(nu)
        self.cfg = cfg or SchemeConfig()
        self.conv = Convolver(self.kernel, grid)
        self.dx = grid.dx

    def xi(self, rho, conv=None):
        conv = self.conv(rho) if conv is None else conv
        return conv - self.nu * rho ** (self.m - 1.0)

    def velocities(self, rho, conv=None):
        """Velocities at the n-1 interior interfaces."""
        return np.diff(self.xi(rho, conv)) / self.dx

    def interface_values(self, rho):
        if self.cfg.order == 1:
            return rho[:-1], rho[1:]
        s = np.zeros_like(rho)
        s[1:-1] = minmod(rho[2:] - rho[1:-1], rho[1:-1] - rho[:-2])
        east = rho + 0.5 * s
        west = rho - 0.5 * s
        return east[:-1], west[1:]

    def flux(self, rho, u):
        """Upwind flux at interior interfaces (boundary fluxes are zero)."""
        left, right = self.interface_values(rho)
        return np.maximum(u, 0.0) * left + np.minimum(u, 0.0) * right

    def rhs(self, rho, conv=None, return_aux=False):
        u = self.velocities(rho, conv)
        F = self.flux(rho, u)
        Fp = np.concatenate([[0.0], F, [0.0]])
        out = -(Fp[1:] - Fp[:-1]) / self.dx
        if return_aux:
            return out, u, F
        return out

    def energy(self, rho, conv=None) -> float:
        conv = self.conv(rho) if conv is None else conv
        internal = self.nu / self.m * np.sum(rho ** self.m)
        return float(self.dx * (internal - 0.5 * np.dot(rho, conv)))

    def energy_rate(self, u, F) -> float:
        """Exact dE/dt of the discrete energy under the semi-discrete scheme."""
        return float(-self.dx * np.dot(u, F))

    def max_dt(self, rho, u=None) -> float:
        u = self.velocities(rho) if u is None else u
        umax = np.max(np.abs(u)) if u.size else 0.0
        dx = self.dx
        adv = dx / umax if umax > 0 else np.inf
        r = np.maximum(rho, RHO_FLOOR)
        diff_speed = 2.0 * self.nu * np.max((self.m - 1.0) * r ** (self.m - 2.0) * r)
        dif = dx * dx / (diff_speed + 1e-300)
        return self.cfg.cfl * min(adv, dif)


def velocities(state: FVState, kernel, m, nu, cfg=None):
    return FVModel(state.grid, kernel, m, nu, cfg).velocities(state.rho_bar)


def numerical_flux(state: FVState, u, cfg: SchemeConfig | None = None):
    """Interior-interface fluxes for given interface velocities."""
    model = FVModel.__new__(FVModel)
    model.cfg = cfg or SchemeConfig()
    return FVModel.flux(model, state.rho_bar, np.asarray(u, dtype=float))


def rhs(state: FVState, kernel, m, nu, cfg=None):
    return FVModel(state.grid, kernel, m, nu, cfg).rhs(state.rho_bar)


def _ssprk3(model: FVModel, rho, dt, k1=None):
    k1 = model.rhs(rho) if k1 is None else k1
    r1 = rho + dt * k1
    r2 = 0.75 * rho + 0.25 * (r1 + dt * model.rhs(r1))
    return rho / 3.0 + 2.0 / 3.0 * (r2 + dt * model.rhs(r2)), min(r1.min(), r2.min())


def step_ssprk3(state: FVState, dt: float, kernel=None, m=None, nu=None, cfg=None,
                model: FVModel | None = None, max_retries: int = 20):
    """One SSP-RK3 step; halves dt on loss of positivity.

    Returns ``(new_state, dt_used)``.
    """
    if model is None:
        model = FVModel(state.grid, kernel, m, nu, cfg)
    rho = state.rho_bar
    k1 = model.rhs(rho)
    for _ in range(max_retries + 1):
        new, stage_min = _ssprk3(model, rho, dt, k1)
        if new.min() >= 0.0 and stage_min >= 0.0:
            return state.copy(new, state.t + dt), dt
        dt *= 0.5
    raise StepFailure(f"positivity lost at t={state.t:g} after {max_retries} halvings")


@dataclass
class Trajectory:
    snapshots: list
    report: "EnergyReport"
    steps: int = 0
    rejected: int = 0
    energy_violations: int = 0
    final: FVState | None = None


@dataclass
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    mass: np.ndarray
    max_rho: np.ndarray
    events: list = field(default_factory=list)

    @classmethod
    def from_lists(cls, rows):
        arr = np.array(rows, dtype=float).reshape(-1, 5)
        return cls(*(arr[:, i] for i in range(5)))


def evolve(init: FVState, kernel, m: float, nu: float, cfg: SchemeConfig | None = None,
           t_end: float = 1.0, snapshot_times=(), energy_every: int = 1,
           max_steps: int | None = None, dt_max: float | None = None,
           callback=None) -> Trajectory:
    """Integrate to ``t_end``, landing exactly on each snapshot time.

    Energy, its semi-discrete rate, mass and max density are recorded every
    ``energy_every`` accepted steps (and always at the first and last).
    """
    model = FVModel(init.grid, kernel, m, nu, cfg)
    state = init.copy()
    edge = max(state.rho_bar[0], state.rho_bar[-1])
    if edge > BOUNDARY_WARN:
        log.warning("initial density %.2e at the domain edge; widen the domain", edge)
    pending = sorted(float(t) for t in snapshot_times if t >= state.t)
    snapshots = []
    while pending and pending[0] <= state.t:
        snapshots.append(state.copy())
        pending.pop(0)
    rows = []
    steps = rejected = violations = 0
    last_E = None
    while state.t < t_end - 1e-12 * max(1.0, t_end):
        rho = state.rho_bar
        conv = model.conv(rho)
        k1, u, F = model.rhs(rho, conv, return_aux=True)
        E = model.energy(rho, conv)
        if last_E is not None and E > last_E + 1e-9 * abs(last_E):
            violations += 1
            log.warning("energy increased by %.3e at t=%g", E - last_E, state.t)
        last_E = E
        if steps % energy_every == 0:
            rows.append((state.t, E, model.energy_rate(u, F), state.mass(), rho.max()))
        dt = model.max_dt(rho, u)
        if dt_max is not None:
            dt = min(dt, dt_max)
        target = min(pending[0] if pending else t_end, t_end)
        dt = min(dt, target - state.t)
        for _ in range(21):
            new, stage_min = _ssprk3(model, rho, dt, k1)
            if new.min() >= 0.0 and stage_min >= 0.0:
                break
            dt *= 0.5
            rejected += 1
        else:
            traj = Trajectory(snapshots, EnergyReport.from_lists(rows), steps, rejected,
                              violations, state)
            raise StepFailure(f"positivity lost at t={state.t:g}", traj)
        t_new = state.t + dt
        if pending and abs(t_new - pending[0]) < 1e-12 * max(1.0, t_new):
            t_new = pending[0]
        state = FVState(state.grid, new, t_new)
        steps += 1
        while pending and pending[0] <= state.t:
            snapshots.append(state.copy())
            pending.pop(0)
        if callback is not None:
            callback(state)
        if max_steps is not None and steps >= max_steps:
            break
    conv = model.conv(state.rho_bar)
    _, u, F = model.rhs(state.rho_bar, conv, return_aux=True)
    E = model.energy(state.rho_bar, conv)
    if last_E is not None and E > last_E + 1e-9 * abs(last_E):
        violations += 1
    rows.append((state.t, E, model.energy_rate(u, F), state.mass(), state.rho_bar.max()))
    edge = max(state.rho_bar[0], state.rho_bar[-1])
    if edge > BOUNDARY_WARN:
        log.warning("density %.2e reached the domain edge by t=%g", edge, state.t)
    return Trajectory(snapshots, EnergyReport.from_lists(rows), steps, rejected,
                      violations, state)


def random_initial_density(seed: int, coarse_n: int, envelope_sigma: float,
                           grid: Grid, center: float = 0.0) -> FVState:
    """Random bumpy datum: coarse uniform noise times a Gaussian envelope.

    The coarse values sit on ``coarse_n`` equispaced points spanning the grid
    and are linearly interpolated to the cell centres, then normalized to
    unit mass.
    """
    if coarse_n < 2:
        raise ValueError("coarse_n must be at least 2")
    rng = np.random.default_rng(seed)
    xc = np.linspace(grid.left, grid.right, coarse_n)
    vals = rng.uniform(0.0, 1.0, coarse_n)
    vals *= np.exp(-0.5 * ((xc - center) / envelope_sigma) ** 2)
    rho = np.interp(grid.midpoints, xc, vals)
    rho /= grid.dx * rho.sum()
    return FVState(grid, rho, 0.0)


def gaussian_density(grid: Grid, sigma2: float, center: float = 0.0) -> FVState:
    """Cell averages of a unit-mass Gaussian, renormalized on the grid."""
    from scipy.special import erf

    s = np.sqrt(2.0 * sigma2)
    cdf = 0.5 * (1 + erf((grid.nodes - center) / s))
    rho = np.diff(cdf) / grid.dx
    rho /= grid.dx * rho.sum()
    return FVState(grid, rho, 0.0)


def longwave_diffusive(rho, nu: float, m: float, kernel) -> np.ndarray:
    """Where the long-wave reduction is net diffusive.

    Replacing ``G * rho`` by ``|G|_1 rho`` leaves the effective diffusivity
    ``rho (nu (m-1) rho^(m-2) - |G|_1)``; it is positive exactly when the
    local repulsion beats the long-wave attraction.
    """
    kernel = get_kernel(kernel)
    rho = np.maximum(np.asarray(rho, dtype=float), RHO_FLOOR)
    return nu * (m - 1.0) * rho ** (m - 2.0) > kernel.l1
