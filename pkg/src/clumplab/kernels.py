"""Attractive interaction kernels G(x) = g(|x|).

Three kernels are provided, all normalized to unit L1 norm:

* ``gaussian``  ``exp(-x**2 / 2) / sqrt(2 pi)``
* ``bessel``    ``exp(-|x|) / 2``
* ``hat``       ``max(1 - |x|, 0)``

The hat kernel is compactly supported and only non-strictly decreasing, so
steady states built with it need not be unique.  A ``null`` kernel (G = 0) is
available for switching the attraction off, which turns the evolution
equation into the porous medium equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_SQRT_2PI = np.sqrt(2.0 * np.pi)

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _gaussian(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _gaussian_d(x):
    return -x * np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _bessel(x):
    return 0.5 * np.exp(-np.abs(x))


def _bessel_d(x):
    # sign(0) = 0 gives the symmetric choice G'(0) = 0
    return -0.5 * np.sign(x) * np.exp(-np.abs(x))


def _hat(x):
    return np.maximum(1.0 - np.abs(x), 0.0)


def _hat_d(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1.0, -np.sign(x), 0.0)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Kernel:
    """An even, nonnegative attraction kernel.

    Custom kernels can be built directly from a pair of vectorized callables;
    the solvers only ever call :meth:`eval`, :meth:`eval_derivative` and read
    :attr:`l1`.
    """

    variant: str
    value_fn: ArrayFn = field(repr=False)
    derivative_fn: ArrayFn = field(repr=False)
    l1: float
    strict: bool = True
    kinks: tuple[float, ...] = ()

    def eval(self, x):
        out = self.value_fn(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    __call__ = eval

    def eval_derivative(self, x):
        out = self.derivative_fn(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def l1_norm(self) -> float:
        return self.l1

    @property
    def is_null(self) -> bool:
        return self.variant == "null"


GAUSSIAN = Kernel("gaussian", _gaussian, _gaussian_d, 1.0)
BESSEL = Kernel("bessel", _bessel, _bessel_d, 1.0, kinks=(0.0,))
HAT = Kernel("hat", _hat, _hat_d, 1.0, strict=False, kinks=(-1.0, 0.0, 1.0))
NULL = Kernel("null", _zero, _zero, 0.0, strict=False)

KERNELS = {k.variant: k for k in (GAUSSIAN, BESSEL, HAT, NULL)}


def get_kernel(name: str | Kernel) -> Kernel:
    if isinstance(name, Kernel):
        return name
    try:
        return KERNELS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; expected one of {sorted(KERNELS)}"
        ) from None


def eval(kernel: Kernel, x):
    return kernel.eval(x)


def eval_derivative(kernel: Kernel, x):
    return kernel.eval_derivative(x)


def l1_norm(kernel: Kernel) -> float:
    return kernel.l1
