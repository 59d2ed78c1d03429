"""Classical four-stage Runge-Kutta on tuples of numpy arrays."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _axpy(y: Sequence[np.ndarray], a: float, k: Sequence[np.ndarray]) -> tuple:
    return tuple(yi + a * ki for yi, ki in zip(y, k))


def rk4(y: Sequence[np.ndarray], f: Callable, dt: float) -> tuple:
    """Advance ``y`` by one RK4 step of ``dt`` for the autonomous system y' = f(y)."""
    k1 = f(y)
    k2 = f(_axpy(y, dt / 2, k1))
    k3 = f(_axpy(y, dt / 2, k2))
    k4 = f(_axpy(y, dt, k3))
    return tuple(yi + dt / 6 * (a + 2 * b + 2 * c + d)
                 for yi, a, b, c, d in zip(y, k1, k2, k3, k4))
