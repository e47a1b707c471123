"""Energy, first variation and metastability diagnostics.

    E[rho]      = int nu/m rho^m - 1/2 int int G(x-y) rho(x) rho(y)
    dE/drho     = nu rho^(m-1) - G * rho
    dE/dt       = -int rho |d/dx dE/drho|^2

Quadrature follows the layout of the data: trapezoid for nodal values,
rectangle rule for cell averages (so that it matches the finite-volume
energy exactly).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import NODAL, Grid, GridFunction, convolve
from .kernels import get_kernel
from .steady import DegenerateInputError, SteadyState

SUPPORT_THRESHOLD = 1e-12


def energy_terms(rho: GridFunction, kernel, m: float, nu: float) -> tuple[float, float]:
    """``(internal, interaction)`` with ``E = internal - interaction``."""
    kernel = get_kernel(kernel)
    w = rho.grid.weights(rho.layout)
    vals = rho.values
    internal = float(np.dot(w, nu / m * vals ** m))
    conv = convolve(kernel, rho).values
    interaction = 0.5 * float(np.dot(w * vals, conv))
    return internal, interaction


def energy(rho: GridFunction, kernel, m: float, nu: float) -> float:
    internal, interaction = energy_terms(rho, kernel, m, nu)
    return internal - interaction


def variation(rho: GridFunction, kernel, m: float, nu: float) -> GridFunction:
    """First variation ``nu rho^(m-1) - G * rho`` at the grid points."""
    kernel = get_kernel(kernel)
    conv = convolve(kernel, rho).values
    return rho.with_values(nu * rho.values ** (m - 1.0) - conv)


def dissipation(rho: GridFunction, kernel, m: float, nu: float) -> float:
    """``-int rho |d/dx dE/drho|^2`` with a central-difference derivative."""
    var = variation(rho, kernel, m, nu).values
    dvar = np.gradient(var, rho.grid.dx)
    w = rho.grid.weights(rho.layout)
    return -float(np.dot(w, rho.values * dvar * dvar))


def support_components(rho: GridFunction, threshold: float = SUPPORT_THRESHOLD):
    """Index ranges ``[(i0, i1), ...]`` (inclusive) of the discrete support."""
    on = np.asarray(rho.values) > threshold
    if not on.any():
        return []
    edges = np.diff(on.astype(int))
    starts = list(np.nonzero(edges == 1)[0] + 1)
    stops = list(np.nonzero(edges == -1)[0])
    if on[0]:
        starts.insert(0, 0)
    if on[-1]:
        stops.append(on.size - 1)
    return list(zip(starts, stops))


def variation_per_component(rho: GridFunction, kernel, m: float, nu: float,
                            threshold: float = SUPPORT_THRESHOLD, trim: int = 0,
                            min_mass: float = 0.0):
    """Mean and max deviation of the first variation on each support component.

    ``trim`` drops that many points at each end of a component, where the
    discrete density is still resolving the free boundary.  Components
    carrying less than ``min_mass`` are skipped.
    """
    var = variation(rho, kernel, m, nu).values
    w = rho.grid.weights(rho.layout)
    out = []
    for i0, i1 in support_components(rho, threshold):
        if np.dot(w[i0: i1 + 1], rho.values[i0: i1 + 1]) < min_mass:
            continue
        seg = var[i0 + trim: i1 + 1 - trim]
        if seg.size == 0:
            continue
        mean = float(np.mean(seg))
        out.append((rho.x[i0], rho.x[i1], mean, float(np.max(np.abs(seg - mean)))))
    return out


def _shift(values, x, x0, dx):
    """Sample ``values(x + x0)``; integer cell shifts are done exactly."""
    s = x0 / dx
    k = int(round(s))
    if abs(s - k) < 1e-9:
        out = np.zeros_like(values)
        if k >= 0:
            out[: values.size - k] = values[k:]
        else:
            out[-k:] = values[: values.size + k]
        return out
    return np.interp(x + x0, x, values, left=0.0, right=0.0)


def symmetrize(rho: GridFunction, m: float, nu: float = 1.0, kernel=None) -> GridFunction:
    """Centre a compactly supported density and symmetrize ``f(rho)``.

    With ``f(rho) = nu rho^(m-1)`` the result is
    ``((rho(x)^(m-1) + rho(-x)^(m-1)) / 2)^(1/(m-1))`` after translating the
    support to be centred at 0.  Requires a grid symmetric about 0.
    """
    g = rho.grid
    x = rho.x
    if not np.isclose(g.left, -g.right):
        raise ValueError("symmetrize needs a grid symmetric about 0")
    comps = support_components(rho)
    if not comps:
        raise DegenerateInputError("empty support")
    a, b = x[comps[0][0]], x[comps[-1][1]]
    x0 = 0.5 * (a + b)
    centred = _shift(rho.values, x, x0, g.dx)
    f = centred ** (m - 1.0)
    sym = (0.5 * (f + f[::-1])) ** (1.0 / (m - 1.0))
    return rho.with_values(sym)


def steady_energy_identity(ss: SteadyState) -> tuple[float, float]:
    """``(C, -2E + int (2F - f rho))`` for a steady state; these should agree."""
    full = ss.full()
    E = energy(full, ss.kernel, ss.m, ss.nu)
    w = full.grid.weights(NODAL)
    r = full.values
    extra = float(np.dot(w, ss.nu * (2.0 / ss.m - 1.0) * r ** ss.m))
    return ss.C, -2.0 * E + extra


@dataclass
class PlateauAnalysis:
    mergers: list = field(default_factory=list)
    plateaus: list = field(default_factory=list)
    transient_end: float = 0.0

    @property
    def n_mergers(self) -> int:
        return len(self.mergers)


def detect_plateaus(report, drop_threshold: float | None = None,
                    flat_threshold: float | None = None,
                    min_plateau: float = 0.0, contrast: float = 0.5) -> PlateauAnalysis:
    """Split an energy history into flat stretches and sharp drops.

    Mergers are local maxima of ``|dE/dt|`` that stand out from their
    surroundings (prominence at least ``contrast`` times the peak value) and
    whose energy drop, measured between the rate minima on either side,
    reaches ``drop_threshold``;
    each is reported as ``(time of peak rate, drop)``.  A peak that starts
    at the first sample while the rate is already above ``flat_threshold``
    is the initial coarsening, not a merger.  Plateaus are maximal
    stretches with ``|dE/dt| < flat_threshold`` longer than ``min_plateau``.
    Defaults: flat = 1e-6 |E(0)|, drop = 1e-2 |E(0)|.

    The rate is taken from ``report.dissipation`` when present, otherwise
    differentiated from the energy.  Detected mergers are also stored on
    ``report.events``.
    """
    from scipy.signal import find_peaks

    t = np.asarray(report.times, dtype=float)
    E = np.asarray(report.energy, dtype=float)
    out = PlateauAnalysis()
    if t.size < 3:
        return out
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be nondecreasing")
    scale = abs(E[0]) if E[0] != 0 else 1.0
    flat = 1e-6 * scale if flat_threshold is None else flat_threshold
    drop = 1e-2 * scale if drop_threshold is None else drop_threshold
    diss = getattr(report, "dissipation", None)
    rate = np.abs(np.asarray(diss if diss is not None else np.gradient(E, t), dtype=float))

    # interior maxima only: a rate that peaks at either end is not a merger
    peaks, props = find_peaks(rate, prominence=0.0)
    peaks = peaks[props["prominences"] >= contrast * rate[peaks]]
    # drops are measured between the rate minima separating significant peaks
    valleys = [0]
    for a, b in zip(peaks[:-1], peaks[1:]):
        valleys.append(a + int(np.argmin(rate[a: b + 1])))
    if peaks.size:
        valleys.append(peaks[-1] + int(np.argmin(rate[peaks[-1]:])))
    for k, pk in enumerate(peaks):
        lb, rb = valleys[k], valleys[k + 1]
        if k == 0:
            lb = int(np.argmin(rate[: pk + 1]))
        d = E[lb] - E[rb]
        if d < drop:
            continue
        if lb == 0 and rate[0] >= flat:
            out.transient_end = max(out.transient_end, float(t[rb]))
            continue
        out.mergers.append((float(t[pk]), float(d)))
    out.mergers.sort()

    quiet = rate < flat
    i = 0
    while i < t.size:
        if not quiet[i]:
            i += 1
            continue
        j = i
        while j + 1 < t.size and quiet[j + 1]:
            j += 1
        if t[j] - t[i] > min_plateau:
            out.plateaus.append((float(t[i]), float(t[j])))
        i = j + 1
    report.events = list(out.mergers)
    return out


def rescale_barenblatt(rho: GridFunction) -> GridFunction:
    """``rho~(x~) = rho(x~/lam)/lam`` with ``lam = max rho`` (unit peak)."""
    lam = float(np.max(rho.values))
    if lam <= 0:
        raise DegenerateInputError("density is identically zero")
    g = rho.grid
    grid = Grid(g.left * lam, g.right * lam, g.n_cells)
    return GridFunction(grid, rho.values / lam, rho.layout)


def rescaled_sup_distance(rho: GridFunction, reference) -> float:
    """Sup distance between rescaled profiles; ``reference`` is a callable
    rescaled profile or another :class:`GridFunction`."""
    a = rescale_barenblatt(rho)
    if isinstance(reference, GridFunction):
        b = rescale_barenblatt(reference)
        ref = np.interp(a.x, b.x, b.values, left=0.0, right=0.0)
    else:
        ref = reference(a.x)
    return float(np.max(np.abs(a.values - ref)))
