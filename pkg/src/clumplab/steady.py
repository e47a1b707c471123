"""Compactly supported steady states by eigenvalue iteration.

For a prescribed support [-L, L] the symmetric steady state satisfies, after
differentiation on [0, L],

    nu (m-1) rho^(m-2) rho' = H_L[rho'],

which is read as a generalized eigenvalue problem for rho' with rho frozen.
Each outer step solves that problem on a uniform grid (rho' piecewise
constant, rho evaluated at cell midpoints) and rebuilds rho by integrating
the eigenfunction from L and normalizing to unit mass.  The fixed point gives
the density together with nu(L).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discretization import (
    NODAL,
    Grid,
    GridFunction,
    apply_GL,
    assemble_H_matrix,
    reflect_even,
)
from .kernels import Kernel, get_kernel

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-14


class SolverError(RuntimeError):
    """A numerical solver failed; ``partial`` carries the last iterate."""

    def __init__(self, msg, partial=None, iterations=None, residual=None):
        super().__init__(msg)
        self.partial = partial
        self.iterations = iterations
        self.residual = residual


class DegenerateInputError(ValueError):
    pass


@dataclass
class EigenPair:
    lam: float
    e: np.ndarray
    iterations: int = 0


@dataclass
class SteadyState:
    grid: Grid
    rho: np.ndarray
    nu: float
    C: float
    m: float
    kernel: Kernel
    iterations: int = 0
    residual_sup: float = float("nan")
    converged: bool = True
    history: list = field(default_factory=list, repr=False)

    @property
    def L(self) -> float:
        return self.grid.right

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def half(self) -> GridFunction:
        return GridFunction(self.grid, self.rho, NODAL)

    def full(self) -> GridFunction:
        """Density on [-L, L] after even reflection."""
        return reflect_even(self.half())

    def mass(self) -> float:
        return 2.0 * self.half().integral()

    def __call__(self, x):
        """Piecewise-linear density at arbitrary points; zero off the support."""
        x = np.abs(np.asarray(x, dtype=float))
        return np.interp(x, self.grid.nodes, self.rho, right=0.0)


def leading_eigenpair(weights, M, dx: float = 1.0, v0=None, tol: float = 1e-12,
                      max_iter: int = 100_000) -> EigenPair:
    """Perron eigenpair of ``diag(weights)^-1 M`` by power iteration.

    The returned eigenvector is flipped to be nonpositive and scaled so that
    its integral (cell width ``dx``) equals -1.
    """
    d = np.asarray(weights, dtype=float)
    M = np.asarray(M, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise DegenerateInputError("eigen weights must be positive and finite")
    A = M / d[:, None]
    v = np.ones(d.size) if v0 is None else np.abs(np.asarray(v0, dtype=float))
    v = v / np.max(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = A @ v
        lam = np.max(np.abs(w))
        if lam == 0.0:
            raise SolverError("power iteration hit the null space", iterations=it)
        w /= lam
        delta = np.max(np.abs(w - v))
        v = w
        if delta < tol:
            break
    else:
        raise SolverError(
            f"power iteration did not converge in {max_iter} iterations",
            iterations=max_iter, residual=delta,
        )
    e = -np.abs(v)
    e /= -np.sum(e) * dx
    return EigenPair(float(lam), e, it)


def _midpoint_weights(rho: np.ndarray, m: float) -> np.ndarray:
    mid = 0.5 * (rho[:-1] + rho[1:])
    if m < 2 and np.any(mid <= 0):
        raise DegenerateInputError("density vanishes at a cell midpoint")
    with np.errstate(divide="ignore", over="ignore"):
        w = mid ** (m - 2.0)
    if np.any(w < WEIGHT_FLOOR):
        log.debug("clamping %d eigen weights at %g", np.sum(w < WEIGHT_FLOOR), WEIGHT_FLOOR)
        w = np.maximum(w, WEIGHT_FLOOR)
    return w


def integrate_eigenfunction(e: np.ndarray, grid: Grid) -> np.ndarray:
    """Nodal ``int_x^L e`` normalized so the even extension has unit mass."""
    tail = np.concatenate([np.cumsum((e * grid.dx)[::-1])[::-1], [0.0]])
    # int_0^L int_x^L e = int_0^L x e(x) dx, exact for piecewise constant e
    first_moment = np.sum(e * grid.midpoints) * grid.dx
    return tail / (2.0 * first_moment)


def iterate_step(rho_k, kernel: Kernel, m: float, grid: Grid, M=None, v0=None,
                 eig_tol: float = 1e-12):
    """One outer step: eigenproblem with frozen density, then integration.

    Returns ``(lam, rho_next, eigpair)`` where ``lam = (m-1) nu`` at the
    fixed point.
    """
    rho_k = np.asarray(rho_k, dtype=float)
    if M is None:
        M = assemble_H_matrix(kernel, grid)
    w = _midpoint_weights(rho_k, m)
    pair = leading_eigenpair(w, M, grid.dx, v0=v0, tol=eig_tol)
    return pair.lam, integrate_eigenfunction(pair.e, grid), pair


def initial_guess(grid: Grid) -> np.ndarray:
    L = grid.right
    return (1.0 - grid.nodes / L) / L


def compute_C(ss: SteadyState, kernel: Kernel | None = None) -> float:
    """``C = (G * rho)(L)`` by the trapezoid rule on the reflected density."""
    kernel = ss.kernel if kernel is None else kernel
    full = ss.full()
    return float(np.dot(full.grid.weights(NODAL) * full.values,
                        kernel.eval(ss.L - full.x)))


def residual_sup(ss: SteadyState) -> float:
    """``sup |nu rho^(m-1) - G_L[rho]|`` over the nodes."""
    gl = apply_GL(ss.kernel, ss.half()).values
    return float(np.max(np.abs(ss.nu * ss.rho ** (ss.m - 1.0) - gl)))


def solve_steady(kernel, m: float, L: float, n_cells: int = 800, tol: float = 1e-8,
                 max_iter: int = 20_000, eig_tol: float = 1e-12,
                 rho0=None) -> SteadyState:
    """Fixed point of :func:`iterate_step` on [0, L].

    Iterates until the sup-norm change of the density drops below ``tol``.
    """
    kernel = get_kernel(kernel)
    if m <= 1:
        raise ValueError("m must exceed 1")
    if L <= 0:
        raise ValueError("L must be positive")
    if not kernel.strict:
        log.warning(
            "kernel %r is not strictly decreasing: steady states are not unique "
            "(disconnected, non-interacting bumps can coexist)", kernel.variant)
    grid = Grid(0.0, float(L), int(n_cells))
    M = assemble_H_matrix(kernel, grid)
    rho = initial_guess(grid) if rho0 is None else np.asarray(rho0, dtype=float)
    v = None
    history = []
    change = np.inf
    for k in range(1, max_iter + 1):
        lam, rho_next, pair = iterate_step(rho, kernel, m, grid, M=M, v0=v,
                                           eig_tol=eig_tol)
        v = pair.e
        change = float(np.max(np.abs(rho_next - rho)))
        history.append((lam, change))
        rho = rho_next
        if change < tol:
            break
    ss = SteadyState(grid, rho, lam / (m - 1.0), float("nan"), float(m), kernel,
                     iterations=k, history=history, converged=change < tol)
    ss.C = compute_C(ss)
    ss.residual_sup = residual_sup(ss)
    if not ss.converged:
        raise SolverError(
            f"steady iteration did not converge in {max_iter} steps "
            f"(last change {change:.3e})",
            partial=ss, iterations=k, residual=ss.residual_sup,
        )
    return ss


def nu_of_L_curve(kernel, m: float, L_list, n_cells: int = 800, workers: int = 1,
                  **kw) -> list[tuple[float, float]]:
    """``(L, nu)`` rows; failed solves yield ``nu = nan`` and the sweep goes on."""
    L_list = [float(L) for L in L_list]
    if any(b < a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be ascending")

    def one(L):
        try:
            return L, solve_steady(kernel, m, L, n_cells, **kw).nu
        except (SolverError, DegenerateInputError) as exc:
            log.error("solve failed at L=%g: %s", L, exc)
            return L, float("nan")

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, L_list))
    return [one(L) for L in L_list]


def solve_steady_for_nu(kernel, m: float, nu: float, L_bracket=(0.5, 40.0),
                        n_cells: int = 800, dx: float | None = None,
                        xtol: float = 1e-6, **kw) -> SteadyState:
    """Steady state with a prescribed diffusion coefficient.

    The scheme is parametrized by L; this inverts nu(L) by bracketed root
    finding.  With ``dx`` given the cell count follows L so that the
    resolution is fixed.
    """
    from scipy.optimize import brentq

    kernel = get_kernel(kernel)

    def cells(L):
        return max(8, int(round(L / dx))) if dx else n_cells

    cache = {}

    def f(L):
        ss = solve_steady(kernel, m, L, cells(L), **kw)
        cache[L] = ss
        return ss.nu - nu

    lo, hi = L_bracket
    L = brentq(f, lo, hi, xtol=xtol)
    return cache.get(L) or solve_steady(kernel, m, L, cells(L), **kw)


def rescale(rho, nu: float, C: float, m: float, factor: float):
    """Map ``rho -> factor * rho``, keeping the steady-state equation.

    ``nu`` picks up ``factor**(2-m)`` and ``C`` scales linearly, since
    ``C = (G * rho)(L)``.
    """
    return factor * np.asarray(rho), nu * factor ** (2.0 - m), C * factor


def to_unit_mass(rho, nu: float, C: float, m: float, mass: float):
    return rescale(rho, nu, C, m, 1.0 / mass)


def extrapolated_nu(kernel, m: float, L: float, cells_per_unit=(40, 80, 160),
                    **kw) -> tuple[float, list[float]]:
    """Richardson-extrapolated ``nu(L)`` from solves at successively halved dx.

    The scheme is second order in dx, so with three levels the h^2 and h^4
    terms are eliminated.  Returns ``(extrapolated, raw_values)``.
    """
    raw = [solve_steady(kernel, m, L, max(8, int(round(L * c))), **kw).nu
           for c in cells_per_unit]
    table = list(raw)
    order = 2
    while len(table) > 1:
        f = 2.0 ** order
        table = [(f * b - a) / (f - 1.0) for a, b in zip(table, table[1:])]
        order += 2
    return table[0], raw
