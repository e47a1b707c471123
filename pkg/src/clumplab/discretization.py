"""Uniform grids, quadrature and the discrete integral operators.

Two quadratures are used on purpose.  The steady-state scheme works with
nodal, piecewise-linear densities on the half domain [0, L] and uses the
trapezoid rule; the finite-volume engine works with cell averages on
[-L, L] and uses the rectangle (midpoint) rule.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .kernels import Kernel

NODAL = "nodal"
CELL = "cell"


@dataclass(frozen=True)
class Grid:
    left: float
    right: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("n_cells must be positive")
        if not self.right > self.left:
            raise ValueError("grid requires right > left")

    @property
    def dx(self) -> float:
        return (self.right - self.left) / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return self.left + self.dx * np.arange(self.n_cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.left + self.dx * (np.arange(self.n_cells) + 0.5)

    @property
    def length(self) -> float:
        return self.right - self.left

    @classmethod
    def symmetric(cls, half_width: float, n_cells: int) -> "Grid":
        return cls(-half_width, half_width, n_cells)

    def points(self, layout: str) -> np.ndarray:
        return self.nodes if layout == NODAL else self.midpoints

    def weights(self, layout: str) -> np.ndarray:
        """Quadrature weights: trapezoid for nodal data, rectangle for cells."""
        if layout == NODAL:
            w = np.full(self.n_cells + 1, self.dx)
            w[0] = w[-1] = 0.5 * self.dx
            return w
        return np.full(self.n_cells, self.dx)


@dataclass
class GridFunction:
    """Values on a grid, tagged as nodal or cell-wise."""

    grid: Grid
    values: np.ndarray
    layout: str = NODAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.grid.n_cells + (1 if self.layout == NODAL else 0)
        if self.layout not in (NODAL, CELL):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.values.shape != (expected,):
            raise ValueError(
                f"{self.layout} function on {self.grid.n_cells} cells needs "
                f"{expected} values, got {self.values.shape}"
            )

    @property
    def x(self) -> np.ndarray:
        return self.grid.points(self.layout)

    def integral(self) -> float:
        return float(np.dot(self.grid.weights(self.layout), self.values))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values, self.layout)

    def to_csv(self, path, header: dict | None = None, name: str = "value"):
        write_csv(path, {"x": self.x, name: self.values}, header)


def write_csv(path, columns: dict, header: dict | None = None):
    """Write equal-length columns with '#'-prefixed ``key = value`` metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with path.open("w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key} = {val}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> tuple[dict, dict]:
    """Inverse of :func:`write_csv`: returns ``(columns, header)``."""
    header: dict = {}
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            elif line.strip():
                rows.append(line.strip().split(","))
    names = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}, header


def assemble_H_matrix(kernel: Kernel, grid: Grid) -> np.ndarray:
    """Cell integrals of the differentiated steady-state kernel.

    ``M[i, j]`` is the trapezoid approximation of
    ``int_{x_j}^{x_{j+1}} G(x_{i+1/2} - y) - G(x_{i+1/2} + y) dy``.
    """
    if grid.left != 0.0:
        raise ValueError("the H matrix lives on a half grid [0, L]")
    xm = grid.midpoints[:, None]
    y = grid.nodes[None, :]
    h = kernel.eval(xm - y) - kernel.eval(xm + y)
    return 0.5 * grid.dx * (h[:, :-1] + h[:, 1:])


def GL_kernel_matrix(kernel: Kernel, x: np.ndarray, y: np.ndarray, L: float):
    """Kernel of the symmetric steady-state operator on [0, L]."""
    x = np.asarray(x)[:, None]
    y = np.asarray(y)[None, :]
    return (
        kernel.eval(x - y) + kernel.eval(x + y)
        - kernel.eval(L - y) - kernel.eval(L + y)
    )


def apply_GL(kernel: Kernel, rho: GridFunction) -> GridFunction:
    """Trapezoid discretization of the half-domain operator at the nodes.

    The integrand vanishes identically at x = L, so the last value is 0.
    """
    grid = rho.grid
    if rho.layout != NODAL or grid.left != 0.0:
        raise ValueError("apply_GL expects nodal values on [0, L]")
    x = grid.nodes
    K = GL_kernel_matrix(kernel, x, x, grid.right)
    out = K @ (grid.weights(NODAL) * rho.values)
    out[-1] = 0.0
    return rho.with_values(out)


def apply_HL(kernel: Kernel, u, grid: Grid, x=None) -> np.ndarray:
    """Direct trapezoid quadrature of ``int_0^L [G(x-y) - G(x+y)] u(y) dy``.

    ``u`` is nodal on ``grid``; evaluated at ``x`` (default: midpoints).
    """
    x = grid.midpoints if x is None else np.asarray(x)
    y = grid.nodes
    K = kernel.eval(x[:, None] - y[None, :]) - kernel.eval(x[:, None] + y[None, :])
    return K @ (grid.weights(NODAL) * np.asarray(u, dtype=float))


def convolution_matrix(kernel: Kernel, grid: Grid, layout: str = CELL) -> np.ndarray:
    x = grid.points(layout)
    return kernel.eval(x[:, None] - x[None, :]) * grid.weights(layout)[None, :]


def convolve(kernel: Kernel, rho: GridFunction, method: str = "dense") -> GridFunction:
    """``(G * rho)(x_j) ~ sum_k w_k G(x_j - x_k) rho_k`` on the grid itself.

    Density is taken as zero outside the grid.  ``method="fft"`` gives an
    O(N log N) path which agrees with the dense sum to rounding.
    """
    grid = rho.grid
    if method == "dense":
        out = convolution_matrix(kernel, grid, rho.layout) @ rho.values
    elif method == "fft":
        n = rho.values.size
        offsets = grid.dx * np.arange(-(n - 1), n)
        g = kernel.eval(offsets)
        out = fftconvolve(grid.weights(rho.layout) * rho.values, g, mode="full")
        out = out[n - 1: 2 * n - 1]
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return rho.with_values(out)


def reflect_even(rho_half: GridFunction) -> GridFunction:
    """Even extension of nodal data on [0, L] to [-L, L]."""
    g = rho_half.grid
    if rho_half.layout != NODAL or g.left != 0.0:
        raise ValueError("reflect_even expects nodal values on [0, L]")
    vals = np.concatenate([rho_half.values[:0:-1], rho_half.values])
    return GridFunction(Grid(-g.right, g.right, 2 * g.n_cells), vals, NODAL)


def cell_average_of_nodal(rho: GridFunction, target: Grid) -> np.ndarray:
    """Exact cell averages of the piecewise-linear interpolant of nodal data.

    Zero outside the support of ``rho``.  Used to hand nodal steady states to
    the finite-volume engine.
    """
    xs = rho.x
    ys = rho.values
    # antiderivative of the piecewise linear interpolant at the nodes
    prim = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(xs) * (ys[1:] + ys[:-1]))])

    def antideriv(z):
        z = np.clip(z, xs[0], xs[-1])
        k = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, xs.size - 2)
        h = z - xs[k]
        slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
        return prim[k] + ys[k] * h + 0.5 * slope * h * h

    edges = target.nodes
    return np.diff(antideriv(edges)) / target.dx
