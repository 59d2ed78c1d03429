"""Tier 3: reduced wave-mean-flow system for an isothermal fluid.

With ``U = p_bar/rho_bar``, ``K = grad S``, ``kappa = |K|`` and ``e = K/kappa``::

    d_t rho_bar = -div p_bar
    d_t p_bar   = -div(p_bar p_bar / rho_bar + eps^2 c I K K / kappa + c^2 rho_bar Id)
    d_t I       = -div((U + c e) I)
    d_t S       = -U . K - c kappa
    d_t chi_bar = -U . grad chi_bar - |U|^2/2 + c^2 (ln(rho_bar/rho0) + 1)

``I`` is the wave action density. The wave stress carries the sound speed so
that it equals the theta-averaged Reynolds stress of slaved acoustic
fluctuations; this also makes the wave-corrected circulation
``loop integral of (U - eps^2 (I/rho_bar) K)`` an exact invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CausticWarning, StepRejected, VanishingPhaseGradient
from .hamiltonian import RHO_FLOOR, IsothermalParams, require_positive
from .integrate import rk4
from .torus import LoopField, PhaseField, ScalarField, TorusGrid, VectorField, dealias_x, deriv_x

DEFAULT_CFL = 0.4


def _floor(grid: TorusGrid) -> float:
    return 1e-6 * 2 * np.pi / max(grid.lengths)


def _grad(f, grid):
    return np.stack([deriv_x(f, grid, i) for i in range(grid.dim)])


def _div(F, grid):
    return sum(deriv_x(F[i], grid, i) for i in range(grid.dim))


@dataclass(frozen=True, eq=False)
class MeanWaveState:
    rho_bar: ScalarField
    p_bar: VectorField
    chi_bar: ScalarField
    action: ScalarField
    S: PhaseField
    eps: float
    t: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def grid(self) -> TorusGrid:
        return self.rho_bar.grid

    def arrays(self) -> tuple:
        return (self.rho_bar.values, self.p_bar.values, self.chi_bar.values,
                self.action.values, self.S.periodic_part.values)

    @classmethod
    def from_arrays(cls, grid, arrs, winding, eps, t=0.0) -> "MeanWaveState":
        r, p, c, I, s = arrs
        return cls(ScalarField(grid, r), VectorField(grid, p), ScalarField(grid, c),
                   ScalarField(grid, I), PhaseField(grid, winding, ScalarField(grid, s)), eps, t)


def _check_phase(S: PhaseField, K: np.ndarray) -> np.ndarray:
    kappa = np.sqrt(np.sum(K * K, axis=0))
    if kappa.min() < _floor(S.grid):
        idx = np.unravel_index(np.argmin(kappa), kappa.shape)
        raise VanishingPhaseGradient("wave vector vanishes", field="|grad S|",
                                     value=float(kappa.min()), location=idx)
    return kappa


def rhs_arrays(arrs, grid, winding, eps, params: IsothermalParams,
               wave_stress: bool = True) -> tuple:
    rho, p, chi, I, s = arrs
    require_positive(rho, "rho_bar", RHO_FLOOR)
    c = params.c_s
    S = PhaseField(grid, winding, ScalarField(grid, s))
    K = S.gradient().values
    kappa = _check_phase(S, K)
    e = K / kappa
    U = p / rho
    dim = grid.dim

    d_rho = -_div(p, grid)
    d_p = np.empty_like(p)
    for j in range(dim):
        flux = U * p[j]
        if wave_stress:
            flux = flux + eps ** 2 * c * I * K * K[j] / kappa
        d_p[j] = -_div(flux, grid) - deriv_x(c * c * rho, grid, j)
    d_I = -_div((U + c * e) * I, grid)
    d_S = -np.sum(U * K, axis=0) - c * kappa
    d_chi = (-np.sum(U * _grad(chi, grid), axis=0) - 0.5 * np.sum(U * U, axis=0)
             + c * c * (np.log(rho / params.rho_ref) + 1.0))
    return (dealias_x(d_rho, grid), dealias_x(d_p, grid, lead=1), dealias_x(d_chi, grid),
            dealias_x(d_I, grid), dealias_x(d_S, grid))


def rhs_reduced(state: MeanWaveState, params: IsothermalParams) -> MeanWaveState:
    """Time derivatives; the S slot holds d_t S (winding rate is zero)."""
    d = rhs_arrays(state.arrays(), state.grid, state.S.winding, state.eps, params)
    return MeanWaveState.from_arrays(state.grid, d, tuple(0.0 for _ in state.S.winding),
                                     state.eps, 0.0)


def cfl_limit(state: MeanWaveState, params: IsothermalParams, cfl: float = DEFAULT_CFL) -> float:
    U = state.p_bar.values / state.rho_bar.values
    speed = float(np.max(np.sqrt(np.sum(U * U, axis=0))))
    return cfl * min(state.grid.dx) / (speed + params.c_s)


def _check_post(arrs, grid, winding):
    rho, p, chi, I, s = arrs
    for name, a in zip(("rho_bar", "p_bar", "chi_bar", "action", "S"), arrs):
        if not np.all(np.isfinite(a)):
            raise StepRejected("non-finite values after step", field=name)
    if rho.min() <= RHO_FLOOR:
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise StepRejected("mean density fell to the floor", field="rho_bar",
                           value=float(rho.min()), location=idx)
    S = PhaseField(grid, winding, ScalarField(grid, s))
    wg = S.winding_gradient
    gp = _grad(s, grid)
    for i in range(grid.dim):
        if wg[i] != 0 and np.max(np.abs(gp[i])) >= abs(wg[i]):
            idx = np.unravel_index(np.argmax(np.abs(gp[i])), gp[i].shape)
            raise CausticWarning("phase gradient about to fold (pre-caustic guard)",
                                 field="grad periodic(S)", value=float(np.max(np.abs(gp[i]))),
                                 location=idx)
    K = S.gradient().values
    kappa = np.sqrt(np.sum(K * K, axis=0))
    if kappa.min() < _floor(grid):
        raise CausticWarning("wave vector vanished", field="|grad S|", value=float(kappa.min()))


def step_reduced(state: MeanWaveState, params: IsothermalParams, dt: float,
                 cfl: float = DEFAULT_CFL, wave_stress: bool = True) -> MeanWaveState:
    limit = cfl_limit(state, params, cfl)
    if dt > limit * (1 + 1e-12):
        raise StepRejected("time step exceeds the CFL limit", field="dt", value=dt)
    grid, w, eps = state.grid, state.S.winding, state.eps
    new = rk4(state.arrays(), lambda y: rhs_arrays(y, grid, w, eps, params, wave_stress), dt)
    _check_post(new, grid, w)
    return MeanWaveState.from_arrays(grid, new, w, eps, state.t + dt)


# --- diagnostics -----------------------------------------------------------


def mass(state: MeanWaveState) -> float:
    return state.rho_bar.integral()


def momentum(state: MeanWaveState) -> np.ndarray:
    return state.grid.integrate(state.p_bar.values)


def total_action(state: MeanWaveState) -> float:
    return state.action.integral()


def wave_action_from_fluctuations(rho_bar: ScalarField, rho_hat: LoopField, S: PhaseField,
                                  c_s: float = 1.0) -> ScalarField:
    """I = theta-mean of rho_bar (c/kappa) (rho_hat/rho_bar)^2, by Parseval on harmonics."""
    K = S.gradient().values
    kappa = _check_phase(S, K)
    h = rho_hat.harmonics
    n = rho_hat.grid.harmonic_index
    weights = np.where(n == 0, 1.0, 2.0)
    mean_sq = np.sum(weights * np.abs(h) ** 2, axis=-1)
    return ScalarField(rho_bar.grid, c_s * mean_sq / (kappa * rho_bar.values))


def reynolds_stress_check(split, eps: float | None = None) -> tuple:
    """Theta-quadrature Reynolds stress against the closed form c I K K / kappa.

    The quadrature uses the full tensor
    ``mean(p_hat p_hat/rho_bar - p_bar rho_hat p_hat/rho_bar^2
    - p_hat rho_hat p_bar/rho_bar^2 + p_bar p_bar rho_hat^2/rho_bar^3)``.
    Returns ``(T_quadrature, T_closed, relative Frobenius discrepancy)``;
    tensors have shape ``(dim, dim, *n_x)``.
    """
    slow = split.slow
    grid = slow.grid
    rb, pb = slow.rho_bar, slow.p_bar
    r = split.rho_hat.values()
    ph = split.fast.p.values()
    pbc = pb[..., None]
    rbc = rb[..., None]
    T = (np.einsum("i...,j...->ij...", ph, ph) / rbc
         - np.einsum("i...,j...->ij...", pbc * r, ph) / rbc ** 2
         - np.einsum("i...,j...->ij...", ph * r, pbc) / rbc ** 2
         + np.einsum("i...,j...->ij...", pbc, pbc) * r ** 2 / rbc ** 3).mean(axis=-1)
    I = wave_action_from_fluctuations(ScalarField(grid, rb), split.rho_hat, slow.S,
                                      slow.c_s).values
    K, kappa = slow.K, slow.kappa
    closed = slow.c_s * I * np.einsum("i...,j...->ij...", K, K) / kappa
    scale = np.sqrt(np.sum(closed ** 2))
    disc = np.sqrt(np.sum((T - closed) ** 2)) / scale if scale > 0 else float(np.sqrt(np.sum(T ** 2)))
    return T, closed, float(disc)


def mean_circulation(state: MeanWaveState, include_pseudomomentum: bool = True) -> float:
    """Loop integral of p_bar/rho_bar - eps^2 (I/rho_bar) grad S over the circle (d = 1)."""
    grid = state.grid
    if grid.dim != 1:
        raise NotImplementedError("mean circulation is only provided for d = 1")
    rho = state.rho_bar.values
    form = state.p_bar.values[0] / rho
    if include_pseudomomentum:
        K = state.S.gradient().values[0]
        form = form - state.eps ** 2 * state.action.values * K / rho
    return float(grid.integrate(form))


def run_reduced(state, params, dt, n_steps, callback=None, **kw):
    for _ in range(n_steps):
        state = step_reduced(state, params, dt, **kw)
        if callback is not None:
            callback(state)
    return state
