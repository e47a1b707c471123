"""Steady states, evolution and particle simulations for 1D aggregation-diffusion
equations with nonlocal attraction and power-law degenerate diffusion."""
from __future__ import annotations

__version__ = "0.1.0"

from .kernels import BESSEL, GAUSSIAN, HAT, NULL, Kernel, get_kernel  # noqa: E402
from .discretization import Grid, GridFunction  # noqa: E402
from .steady import SteadyState, solve_steady, solve_steady_for_nu  # noqa: E402
from .closed_form import Barenblatt, bessel_limit, gaussian_limit, solve_bessel_steady  # noqa: E402
from .evolution import FVState, SchemeConfig, evolve  # noqa: E402
from .particles import ParticleState, RepulsionLaw, evolve_particles  # noqa: E402
from .diagnostics import detect_plateaus, energy, symmetrize, variation  # noqa: E402

__all__ = [
    "BESSEL", "GAUSSIAN", "HAT", "NULL", "Kernel", "get_kernel", "Grid", "GridFunction",
    "SteadyState", "solve_steady", "solve_steady_for_nu", "Barenblatt", "bessel_limit",
    "gaussian_limit", "solve_bessel_steady", "FVState", "SchemeConfig", "evolve",
    "ParticleState", "RepulsionLaw", "evolve_particles", "detect_plateaus", "energy",
    "symmetrize", "variation",
]
