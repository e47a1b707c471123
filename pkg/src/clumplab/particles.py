"""Particle system with nearest-neighbour power-law repulsion.

N ordered particles of mass 1/N move by

    dX_i/dt = -N R'(N (X_i - X_{i-1})) + N R'(N (X_{i+1} - X_i))
              + 1/N sum_{j != i} G'(X_i - X_j),

with ``R(z) = nu/m z^(1-m)``.  This is the gradient flow of

    E_N = sum_i R(N (X_i - X_{i-1})) - 1/(2N) sum_{i != j} G(X_i - X_j),

and ``E_N / N`` approximates the continuum energy of the empirical density.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import NODAL, Grid, GridFunction
from .kernels import Kernel, get_kernel

log = logging.getLogger(__name__)


class OrderingViolation(ValueError):
    """Two particles touched or crossed."""


class StiffnessFailure(RuntimeError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass
class ParticleState:
    positions: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 2:
            raise ValueError("need at least two particles")

    @property
    def N(self) -> int:
        return self.positions.size

    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)

    def check_ordering(self):
        g = self.gaps()
        if np.any(g <= 0):
            i = int(np.argmin(g))
            raise OrderingViolation(f"non-positive gap {g[i]:.3e} between particles {i} and {i + 1}")

    def center_of_mass(self) -> float:
        return float(np.mean(self.positions))


@dataclass(frozen=True)
class RepulsionLaw:
    nu: float
    m: float

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.m <= 1:
            raise ValueError("m must exceed 1")

    def R(self, z):
        return self.nu / self.m * np.asarray(z, dtype=float) ** (1.0 - self.m)

    def dR(self, z):
        return self.nu * (1.0 - self.m) / self.m * np.asarray(z, dtype=float) ** (-self.m)

    def d2R(self, z):
        return self.nu * (self.m - 1.0) * np.asarray(z, dtype=float) ** (-self.m - 1.0)


def _attraction(X: np.ndarray, kernel: Kernel) -> np.ndarray:
    """``1/N sum_{j != i} G'(X_i - X_j)`` for sorted ``X``."""
    N = X.size
    if kernel.is_null:
        return np.zeros(N)
    if kernel.variant == "bessel":
        # O(N) prefix sums; G'(d) = -sign(d) e^{-|d|} / 2
        Y = X - 0.5 * (X[0] + X[-1])
        ep, em = np.exp(Y), np.exp(-Y)
        left = em * (np.cumsum(ep) - ep)
        right = ep * (np.cumsum(em[::-1])[::-1] - em)
        return 0.5 * (right - left) / N
    D = X[:, None] - X[None, :]
    Gp = kernel.eval_derivative(D)
    np.fill_diagonal(Gp, 0.0)
    return Gp.sum(axis=1) / N


def particle_rhs(state: ParticleState, kernel, law: RepulsionLaw) -> np.ndarray:
    kernel = get_kernel(kernel)
    X = state.positions
    N = X.size
    gaps = np.diff(X)
    if np.any(gaps <= 0):
        state.check_ordering()
    f = N * law.dR(N * gaps)
    v = np.zeros(N)
    v[1:] -= f    # left neighbour
    v[:-1] += f   # right neighbour
    return v + _attraction(X, kernel)


def particle_energy(state: ParticleState, kernel, law: RepulsionLaw) -> float:
    kernel = get_kernel(kernel)
    X = state.positions
    N = X.size
    gaps = np.diff(X)
    if np.any(gaps <= 0):
        raise OrderingViolation("zero or negative gap: infinite energy")
    rep = float(np.sum(law.R(N * gaps)))
    if kernel.is_null:
        return rep
    if kernel.variant == "bessel":
        Y = X - 0.5 * (X[0] + X[-1])
        ep, em = np.exp(Y), np.exp(-Y)
        pair = float(np.sum(em * (np.cumsum(ep) - ep)))  # sum_{j<i} e^{-(X_i - X_j)}
        att = 0.5 * pair / N  # (1/2N) * 2 * sum_{j<i} e^{-d}/2
    else:
        G = kernel.eval(X[:, None] - X[None, :])
        np.fill_diagonal(G, 0.0)
        att = 0.5 * float(G.sum()) / N
    return rep - att


def stable_dt(state: ParticleState, law: RepulsionLaw, safety: float = 0.8) -> float:
    """Explicit step bound from the stiffest nearest-neighbour spring.

    The repulsion Jacobian scales like ``N^2 R''(N g_min)``; SSP-RK3 is
    stable up to roughly 2.5 over its spectral radius, and each gap couples
    two particles, hence the factor 4 below.
    """
    N = state.N
    g = float(np.min(state.gaps()))
    stiff = 4.0 * N * N * float(law.d2R(N * g))
    return safety * 2.5 / stiff


@dataclass
class ParticleTrajectory:
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    energy_times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    steps: int = 0
    halvings: int = 0
    final: ParticleState | None = None

    def energy_nonincreasing(self, rtol: float = 1e-9) -> bool:
        E = np.asarray(self.energy)
        return bool(np.all(np.diff(E) <= rtol * np.abs(E[:-1]) + 1e-300))


def _rk3(X, dt, f):
    k1 = f(X)
    X1 = X + dt * k1
    X2 = 0.75 * X + 0.25 * (X1 + dt * f(X1))
    return X / 3.0 + 2.0 / 3.0 * (X2 + dt * f(X2))


def evolve_particles(state: ParticleState, kernel, law: RepulsionLaw, t_end: float,
                     dt: float | None = None, snapshot_times=(), energy_every: int = 10,
                     max_halvings: int = 30, method: str = "rk3",
                     n_energy: int = 400) -> ParticleTrajectory:
    """Integrate the particle system to ``t_end``.

    ``method="rk3"``: SSP-RK3 with ordering-violation rejection.  ``dt``
    caps the step; each step also respects :func:`stable_dt`.  A step that
    produces a non-positive gap (or raises the energy) is retried with half
    the step, up to ``max_halvings`` times.

    ``method="bdf"``: the stiff BDF integrator from scipy, for long runs at
    large N where the explicit step bound (which shrinks like ``N^-2``)
    is prohibitive.  Ordering and energy are then checked on ``n_energy``
    equispaced output times.
    """
    kernel = get_kernel(kernel)
    state.check_ordering()
    if method == "bdf":
        return _evolve_bdf(state, kernel, law, t_end, snapshot_times, n_energy)
    if method != "rk3":
        raise ValueError(f"unknown particle integrator {method!r}")
    X = state.positions.copy()
    t = float(state.t)
    N = X.size

    def f(Y):
        g = np.diff(Y)
        if np.any(g <= 0):
            raise OrderingViolation("crossing inside a stage")
        return particle_rhs(ParticleState(Y, t), kernel, law)

    def energy_of(Y):
        return particle_energy(ParticleState(Y, t), kernel, law)

    traj = ParticleTrajectory()
    pending = sorted(float(s) for s in snapshot_times if s >= t)
    while pending and pending[0] <= t:
        traj.times.append(t)
        traj.positions.append(X.copy())
        pending.pop(0)
    E = energy_of(X)
    traj.energy_times.append(t)
    traj.energy.append(E)
    while t < t_end - 1e-12 * max(1.0, t_end):
        h = stable_dt(ParticleState(X, t), law)
        if dt is not None:
            h = min(h, dt)
        target = min(pending[0] if pending else t_end, t_end)
        h = min(h, target - t)
        for _ in range(max_halvings + 1):
            try:
                Xn = _rk3(X, h, f)
                if np.all(np.diff(Xn) > 0):
                    En = energy_of(Xn)
                    if En <= E + 1e-11 * abs(E):
                        break
            except OrderingViolation:
                pass
            h *= 0.5
            traj.halvings += 1
        else:
            traj.final = ParticleState(X, t)
            raise StiffnessFailure(f"step underflow at t={t:g} after {max_halvings} halvings",
                                   traj)
        X, E = Xn, En
        t = target if abs(t + h - target) < 1e-12 * max(1.0, target) else t + h
        traj.steps += 1
        if traj.steps % energy_every == 0:
            traj.energy_times.append(t)
            traj.energy.append(E)
        while pending and pending[0] <= t:
            traj.times.append(t)
            traj.positions.append(X.copy())
            pending.pop(0)
    if traj.energy_times[-1] != t:
        traj.energy_times.append(t)
        traj.energy.append(E)
    traj.final = ParticleState(X, t)
    log.info("particles: N=%d, %d steps, %d halvings", N, traj.steps, traj.halvings)
    return traj


def _evolve_bdf(state, kernel, law, t_end, snapshot_times, n_energy):
    from scipy.integrate import solve_ivp

    t0 = float(state.t)
    snaps = sorted(float(s) for s in snapshot_times if t0 <= s <= t_end)
    grid_t = np.linspace(t0, t_end, max(n_energy, 2))
    t_eval = np.union1d(grid_t, snaps)

    def f(_t, Y):
        return particle_rhs(ParticleState(Y), kernel, law)

    sol = solve_ivp(f, (t0, t_end), state.positions, method="BDF", rtol=1e-9,
                    atol=1e-12, t_eval=t_eval)
    traj = ParticleTrajectory(steps=int(sol.t.size))
    if sol.status != 0:
        raise StiffnessFailure(f"BDF integration failed: {sol.message}", traj)
    snapset = set(snaps)
    for t, Y in zip(sol.t, sol.y.T):
        ps = ParticleState(Y, float(t))
        ps.check_ordering()
        traj.energy_times.append(float(t))
        traj.energy.append(particle_energy(ps, kernel, law))
        if t in snapset:
            traj.times.append(float(t))
            traj.positions.append(Y.copy())
    traj.final = ParticleState(sol.y[:, -1].copy(), float(sol.t[-1]))
    return traj


def empirical_density(state: ParticleState, grid: Grid, m: float | None = None) -> GridFunction:
    """Density ``1/(N gap)`` at gap midpoints, interpolated to the grid nodes.

    Without ``m`` the profile is interpolated linearly and closed with zeros
    at the extreme particles.  With ``m`` the interpolation is done on the
    pressure ``rho^(m-1)``, which is linear near a free boundary, and the
    edges are placed where the extrapolated pressure vanishes.  The result
    is normalized to unit mass on the grid either way.
    """
    X = state.positions
    N = X.size
    if N < 3:
        raise ValueError("need at least three particles")
    gaps = np.diff(X)
    mids = 0.5 * (X[:-1] + X[1:])
    dens = 1.0 / (N * gaps)
    if m is None:
        xs = np.concatenate([[X[0]], mids, [X[-1]]])
        vals = np.interp(grid.nodes, xs, np.concatenate([[0.0], dens, [0.0]]),
                         left=0.0, right=0.0)
    else:
        p = m - 1.0
        q = dens ** p

        def edge(x0, x1, q0, q1, fallback):
            slope = (q1 - q0) / (x1 - x0)
            if slope <= 0:
                return fallback
            return x0 - q0 / slope

        a = edge(mids[0], mids[1], q[0], q[1], X[0])
        b = -edge(-mids[-1], -mids[-2], q[-1], q[-2], -X[-1])
        xs = np.concatenate([[a], mids, [b]])
        qs = np.concatenate([[0.0], q, [0.0]])
        vals = np.interp(grid.nodes, xs, qs, left=0.0, right=0.0) ** (1.0 / p)
    out = GridFunction(grid, vals, NODAL)
    return out.with_values(vals / out.integral())


def quantile_particles(cdf_inverse, N: int) -> ParticleState:
    """Particles at the midpoint quantiles ``(i - 1/2)/N`` of a density."""
    s = (np.arange(N) + 0.5) / N
    return ParticleState(np.asarray(cdf_inverse(s), dtype=float))


def quantile_particles_from_grid(rho: GridFunction, N: int) -> ParticleState:
    """Quantile placement for a tabulated nonnegative density."""
    x = rho.x
    v = np.maximum(rho.values, 0.0)
    if rho.layout == NODAL:
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(x) * (v[1:] + v[:-1]))])
        nodes = x
    else:
        nodes = rho.grid.nodes
        cdf = np.concatenate([[0.0], np.cumsum(v * rho.grid.dx)])
    cdf /= cdf[-1]
    # drop flat stretches so the inverse is single valued
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return quantile_particles(lambda s: np.interp(s, cdf[keep], nodes[keep]), N)


def continuum_energy_per_particle(state: ParticleState, kernel, law: RepulsionLaw) -> float:
    """``E_N / N``, the quantity that approximates the continuum energy."""
    return particle_energy(state, kernel, law) / state.N
