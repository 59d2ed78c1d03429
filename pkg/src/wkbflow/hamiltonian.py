"""Euler-Poincare Hamiltonian densities H(p, rho, grad_rho).

A :class:`HamiltonianSpec` bundles the density and its three partial
derivatives. Inputs are numpy arrays; vectors carry the component axis first
so the same callables serve pointwise samples and whole grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonPositiveDensity

RHO_FLOOR = 1e-10


def require_positive(rho, name: str = "rho", floor: float = RHO_FLOOR) -> None:
    rho = np.asarray(rho)
    if rho.size and rho.min() <= floor:
        idx = np.unravel_index(np.argmin(rho), rho.shape) if rho.ndim else ()
        raise NonPositiveDensity("density fell to the floor", field=name,
                                 value=float(rho.min()), location=idx)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Hamiltonian density and partial derivatives.

    ``wave_speed`` is the signal speed used by CFL estimates; ``params`` is
    kept for closures that need the isothermal constants.
    """

    eval: Callable
    d_p: Callable
    d_rho: Callable
    d_grad_rho: Callable
    wave_speed: float = 1.0
    name: str = "custom"
    params: object = None


@dataclass(frozen=True)
class IsothermalParams:
    c_s: float = 1.0
    rho_ref: float = 1.0

    def __post_init__(self):
        if not (self.c_s > 0 and self.rho_ref > 0):
            raise ValueError("c_s and rho_ref must be strictly positive")


def isothermal_hamiltonian(params: IsothermalParams) -> HamiltonianSpec:
    """H = |p|^2/(2 rho) + c^2 rho ln(rho/rho0)."""
    c2 = params.c_s ** 2
    rho0 = params.rho_ref

    def H(p, rho, grad_rho):
        p = np.asarray(p, dtype=float)
        require_positive(rho)
        return np.sum(p * p, axis=0) / (2 * rho) + c2 * rho * np.log(rho / rho0)

    def d_p(p, rho, grad_rho):
        require_positive(rho)
        return np.asarray(p, dtype=float) / rho

    def d_rho(p, rho, grad_rho):
        p = np.asarray(p, dtype=float)
        require_positive(rho)
        return -np.sum(p * p, axis=0) / (2 * rho ** 2) + c2 * (np.log(rho / rho0) + 1.0)

    def d_grad_rho(p, rho, grad_rho):
        return np.zeros_like(np.asarray(grad_rho, dtype=float))

    return HamiltonianSpec(H, d_p, d_rho, d_grad_rho, wave_speed=params.c_s,
                           name="isothermal", params=params)


def legendre_velocity(spec: HamiltonianSpec, p, rho, grad_rho):
    """Fluid velocity v = dH/dp."""
    require_positive(rho)
    return spec.d_p(p, rho, grad_rho)


def fd_check(spec: HamiltonianSpec, p, rho, grad_rho, step: float = 1e-6) -> dict:
    """Relative errors of the derivative callables against centred differences."""
    p = np.asarray(p, dtype=float)
    g = np.asarray(grad_rho, dtype=float)

    def rel(a, b):
        a, b = np.asarray(a), np.asarray(b)
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)) if b.size else 0.0

    fd_p = np.stack([(spec.eval(p + step * e, rho, g) - spec.eval(p - step * e, rho, g)) / (2 * step)
                     for e in np.eye(p.shape[0]).reshape((p.shape[0], p.shape[0]) + (1,) * (p.ndim - 1))])
    fd_r = (spec.eval(p, rho + step, g) - spec.eval(p, rho - step, g)) / (2 * step)
    fd_g = np.stack([(spec.eval(p, rho, g + step * e) - spec.eval(p, rho, g - step * e)) / (2 * step)
                     for e in np.eye(g.shape[0]).reshape((g.shape[0], g.shape[0]) + (1,) * (g.ndim - 1))])
    dg = spec.d_grad_rho(p, rho, g)
    err_g = float(np.max(np.abs(dg - fd_g))) if np.max(np.abs(dg)) == 0 else rel(fd_g, dg)
    return {"d_p": rel(fd_p, spec.d_p(p, rho, g)),
            "d_rho": rel(fd_r, spec.d_rho(p, rho, g)),
            "d_grad_rho": err_g}
