"""Tier 1: momentum-form Euler-Poincare fluid on the periodic domain.

State variables are the mass density ``rho``, momentum density ``p``, the
back-to-labels map stored as a displacement ``h = x + D``, and the Lagrange
multiplier ``chi``. With ``v = dH/dp`` and ``w = dH/d(grad rho)``::

    d_t rho = -div(rho v)
    d_t p_j = -d_i(v_i p_j + w_i d_j rho) - d_j Pi
    d_t D_j = -v_j - v . grad D_j
    d_t chi = -v . grad chi + dH/drho - div w

with ``Pi = rho dH/drho - rho div w + p . v - H``. The (rho, p) block does
not see (D, chi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepRejected
from .hamiltonian import RHO_FLOOR, HamiltonianSpec, require_positive
from .integrate import rk4
from .torus import ScalarField, TorusGrid, VectorField, dealias_x, deriv_x

DEFAULT_CFL = 0.4


@dataclass(frozen=True, eq=False)
class BaseState:
    rho: ScalarField
    p: VectorField
    h: VectorField
    chi: ScalarField
    t: float = 0.0

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid

    def arrays(self) -> tuple:
        return (self.rho.values, self.p.values, self.h.values, self.chi.values)

    @classmethod
    def from_arrays(cls, grid: TorusGrid, arrs, t: float = 0.0) -> "BaseState":
        rho, p, h, chi = arrs
        return cls(ScalarField(grid, rho), VectorField(grid, p), VectorField(grid, h),
                   ScalarField(grid, chi), t)

    @classmethod
    def at_rest(cls, grid: TorusGrid, rho0: float = 1.0) -> "BaseState":
        z = np.zeros(grid.shape)
        zv = np.zeros((grid.dim,) + grid.shape)
        return cls.from_arrays(grid, (np.full(grid.shape, rho0), zv, zv.copy(), z))


def gradient(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.stack([deriv_x(f, grid, i) for i in range(grid.dim)])


def divergence(F: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return sum(deriv_x(F[i], grid, i) for i in range(grid.dim))


def rhs_arrays(arrs, grid: TorusGrid, H: HamiltonianSpec) -> tuple:
    rho, p, D, chi = arrs
    require_positive(rho, "rho", RHO_FLOOR)
    grho = gradient(rho, grid)
    v = H.d_p(p, rho, grho)
    w = H.d_grad_rho(p, rho, grho)
    dr = H.d_rho(p, rho, grho)
    divw = divergence(w, grid)
    Pi = rho * dr - rho * divw + np.sum(p * v, axis=0) - H.eval(p, rho, grho)

    d_rho = -divergence(rho * v, grid)
    d_p = np.empty_like(p)
    for j in range(grid.dim):
        flux = v * p[j] + w * grho[j]
        d_p[j] = -divergence(flux, grid) - deriv_x(Pi, grid, j)
    d_D = np.empty_like(D)
    for j in range(grid.dim):
        d_D[j] = -v[j] - np.sum(v * gradient(D[j], grid), axis=0)
    d_chi = -np.sum(v * gradient(chi, grid), axis=0) + dr - divw

    return (dealias_x(d_rho, grid), dealias_x(d_p, grid, lead=1),
            dealias_x(d_D, grid, lead=1), dealias_x(d_chi, grid))


def rhs_base(state: BaseState, H: HamiltonianSpec) -> BaseState:
    """Time derivatives of all four fields, returned as a BaseState-shaped tangent."""
    d = rhs_arrays(state.arrays(), state.grid, H)
    return BaseState.from_arrays(state.grid, d, 0.0)


def cfl_limit(state: BaseState, H: HamiltonianSpec, cfl: float = DEFAULT_CFL,
              c_wave: float | None = None) -> float:
    grid = state.grid
    rho = state.rho.values
    require_positive(rho)
    v = H.d_p(state.p.values, rho, gradient(rho, grid))
    speed = float(np.max(np.sqrt(np.sum(v * v, axis=0))))
    c = H.wave_speed if c_wave is None else c_wave
    return cfl * min(grid.dx) / (speed + c)


def check_admissible(rho: np.ndarray, D: np.ndarray, grid: TorusGrid, *arrays) -> None:
    for name, a in (("rho", rho), ("h", D)) + tuple(("field", a) for a in arrays):
        if not np.all(np.isfinite(a)):
            raise StepRejected("non-finite values after step", field=name)
    if rho.min() <= RHO_FLOOR:
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise StepRejected("density fell to the floor", field="rho",
                           value=float(rho.min()), location=idx)
    J = np.empty((grid.dim, grid.dim) + grid.shape)
    for j in range(grid.dim):
        for i in range(grid.dim):
            J[j, i] = (i == j) + deriv_x(D[j], grid, i)
    det = J[0, 0] if grid.dim == 1 else J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if det.min() <= 0:
        idx = np.unravel_index(np.argmin(det), det.shape)
        raise StepRejected("label map lost orientation", field="det grad h",
                           value=float(det.min()), location=idx)


def step_rk4(state: BaseState, H: HamiltonianSpec, dt: float,
             cfl: float = DEFAULT_CFL, c_wave: float | None = None) -> BaseState:
    limit = cfl_limit(state, H, cfl, c_wave)
    if dt > limit * (1 + 1e-12):
        raise StepRejected("time step exceeds the CFL limit", field="dt", value=dt)
    grid = state.grid
    new = rk4(state.arrays(), lambda y: rhs_arrays(y, grid, H), dt)
    check_admissible(new[0], new[2], grid, new[1], new[3])
    return BaseState.from_arrays(grid, new, state.t + dt)


def run_base(state: BaseState, H: HamiltonianSpec, dt: float, n_steps: int,
             callback=None, **kw) -> BaseState:
    for _ in range(n_steps):
        state = step_rk4(state, H, dt, **kw)
        if callback is not None:
            callback(state)
    return state


# --- diagnostics -----------------------------------------------------------


def mass(state: BaseState) -> float:
    return state.rho.integral()


def momentum(state: BaseState) -> np.ndarray:
    return state.grid.integrate(state.p.values)


def energy(state: BaseState, H: HamiltonianSpec) -> float:
    grid = state.grid
    rho = state.rho.values
    return float(grid.integrate(H.eval(state.p.values, rho, gradient(rho, grid))))


def circulation_base(state: BaseState) -> float:
    """Loop integral of p/rho around the full circle (d = 1)."""
    grid = state.grid
    if grid.dim != 1:
        raise NotImplementedError("circulation over marker contours is only provided for d = 1")
    require_positive(state.rho.values)
    return float(grid.integrate(state.p.values[0] / state.rho.values))


__all__ = ["BaseState", "rhs_base", "cfl_limit", "step_rk4", "run_base", "mass",
           "momentum", "energy", "circulation_base"]
