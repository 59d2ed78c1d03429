"""Tier 2: the extended system on (x, theta) with phase function S.

Every base field becomes a loop field ``f(x, theta)``; the physical field is
recovered by evaluating at ``theta = S(x)/eps``. Writing
``grad^S = grad + (grad S/eps) d_theta`` and ``Om = (d_t S)/eps``::

    d_t rho = -Om d_theta rho - div^S(rho v)
    d_t p_j = -Om d_theta p_j - sum_i grad^S_i(v_i p_j + w_i grad^S_j rho) - grad^S_j Pi
    d_t D_j = -Om d_theta D_j - v_j - v . grad^S D_j
    d_t chi = -Om d_theta chi - v . grad^S chi + dH/drho - div^S w

The evolution of S is not fixed by the extension itself; it is supplied by a
pluggable closure. The default closure is the acoustic eikonal equation
driven by the theta-averaged density and momentum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import BaseState
from .errors import (NonPositiveDensity, SingularLabelMap, StepRejected,
                     VanishingPhaseGradient)
from .hamiltonian import RHO_FLOOR, HamiltonianSpec, IsothermalParams
from .integrate import rk4
from .torus import (LoopField, PhaseField, ScalarField, TorusGrid,
                    VectorLoopField, _check_shift_scale, dealias_x, deriv_x,
                    evaluate_harmonics, interpolate, to_collocation, to_harmonics)

DEFAULT_CFL = 0.4


def grad_S_floor(grid: TorusGrid) -> float:
    return 1e-6 * 2 * np.pi / max(grid.lengths)


@dataclass(frozen=True, eq=False)
class ExtendedState:
    rho: LoopField
    p: VectorLoopField
    h: VectorLoopField
    chi: LoopField
    S: PhaseField
    eps: float
    t: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid

    def arrays(self) -> tuple:
        return (self.rho.harmonics, self.p.harmonics, self.h.harmonics,
                self.chi.harmonics, self.S.periodic_part.values)

    @classmethod
    def from_arrays(cls, grid, arrs, winding, eps, t=0.0) -> "ExtendedState":
        rho, p, h, chi, sp = arrs
        return cls(LoopField(grid, rho), VectorLoopField(grid, p), VectorLoopField(grid, h),
                   LoopField(grid, chi), PhaseField(grid, winding, ScalarField(grid, np.real(sp))),
                   eps, t)

    @classmethod
    def from_base(cls, base: BaseState, S: PhaseField, eps: float) -> "ExtendedState":
        """Embed base fields as theta-independent loop fields."""
        grid = base.grid

        def lift(a):
            h = np.zeros(a.shape + (grid.n_harm,), dtype=complex)
            h[..., 0] = a
            return h

        arrs = (lift(base.rho.values), lift(base.p.values), lift(base.h.values),
                lift(base.chi.values), S.periodic_part.values)
        return cls.from_arrays(grid, arrs, S.winding, eps, base.t)

    def has_waves(self) -> bool:
        return bool(np.any(self.rho.harmonics[..., 1:] != 0)
                    or np.any(self.p.harmonics[..., 1:] != 0))


# --- phase closures ---------------------------------------------------------


class PhaseClosure:
    """Rule producing d_t S from the theta-mean fields."""

    def __call__(self, S: PhaseField, rho_bar: np.ndarray, p_bar: np.ndarray,
                 has_waves: bool) -> np.ndarray:
        raise NotImplementedError


class EikonalClosure(PhaseClosure):
    """d_t S = -(p_bar/rho_bar) . grad S - c_s |grad S| (positive branch)."""

    def __init__(self, c_s: float = 1.0):
        self.c_s = float(c_s)

    def __call__(self, S, rho_bar, p_bar, has_waves):
        K = S.gradient().values
        kappa = np.sqrt(np.sum(K * K, axis=0))
        floor = grad_S_floor(S.grid)
        if has_waves and kappa.min() < floor:
            idx = np.unravel_index(np.argmin(kappa), kappa.shape)
            raise VanishingPhaseGradient("eikonal closure needs a nonvanishing wavevector",
                                         field="|grad S|", value=float(kappa.min()), location=idx)
        return -np.sum(p_bar * K, axis=0) / rho_bar - self.c_s * kappa


class PrescribedClosure(PhaseClosure):
    """d_t S given as a fixed spatial field, independent of the state."""

    def __init__(self, rate):
        self.rate = np.asarray(rate, dtype=float)

    def __call__(self, S, rho_bar, p_bar, has_waves):
        return np.broadcast_to(self.rate, S.grid.shape).copy()


# --- right-hand side --------------------------------------------------------


class _Ops:
    """Shifted-derivative helpers bound to one phase gradient."""

    def __init__(self, grid: TorusGrid, K: np.ndarray, eps: float):
        self.grid = grid
        self.Ke = K[..., None] / eps
        self.n = 1j * grid.harmonic_index

    def col(self, h):
        return to_collocation(h, self.grid.n_theta)

    def harm(self, v):
        return to_harmonics(v)

    def grad(self, h):
        return np.stack([deriv_x(h, self.grid, i) + self.Ke[i] * self.n * h
                         for i in range(self.grid.dim)])

    def div(self, F):
        return sum(deriv_x(F[i], self.grid, i) + self.Ke[i] * self.n * F[i]
                   for i in range(self.grid.dim))

    def clean(self, h, lead=0):
        return dealias_x(h, self.grid, lead=lead) * self.grid.theta_mask


def rhs_arrays(arrs, grid: TorusGrid, winding, eps: float, H: HamiltonianSpec,
               closure: PhaseClosure) -> tuple:
    rho_h, p_h, D_h, chi_h, s_per = arrs
    S = PhaseField(grid, winding, ScalarField(grid, np.real(s_per)))
    K = S.gradient().values
    op = _Ops(grid, K, eps)
    dim = grid.dim

    rho = op.col(rho_h)
    if rho.min() <= RHO_FLOOR:
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise NonPositiveDensity("density fell to the floor", field="rho",
                                 value=float(rho.min()), location=idx)
    p = op.col(p_h)
    grho = op.col(op.grad(rho_h))
    v = H.d_p(p, rho, grho)
    w = H.d_grad_rho(p, rho, grho)
    dr = H.d_rho(p, rho, grho)
    divw_h = op.div(op.harm(w))
    Pi = rho * dr - rho * op.col(divw_h) + np.sum(p * v, axis=0) - H.eval(p, rho, grho)

    waves = bool(np.any(rho_h[..., 1:] != 0) or np.any(p_h[..., 1:] != 0))
    dS = closure(S, rho_h[..., 0].real, p_h[..., 0].real, waves)
    om = (dS / eps)[..., None] * op.n

    d_rho = -om * rho_h - op.div(op.harm(rho * v))
    gPi = op.grad(op.harm(Pi))
    d_p = np.empty_like(p_h)
    d_D = np.empty_like(D_h)
    for j in range(dim):
        flux = op.harm(v * p[j] + w * grho[j])
        d_p[j] = -om * p_h[j] - op.div(flux) - gPi[j]
        gD = op.col(op.grad(D_h[j]))
        d_D[j] = -om * D_h[j] - op.harm(v[j] + np.sum(v * gD, axis=0))
    gchi = op.col(op.grad(chi_h))
    d_chi = -om * chi_h - op.harm(np.sum(v * gchi, axis=0) - dr) - divw_h

    return (op.clean(d_rho), op.clean(d_p, 1), op.clean(d_D, 1), op.clean(d_chi),
            dealias_x(dS, grid))


def rhs_extended(state: ExtendedState, H: HamiltonianSpec, closure: PhaseClosure) -> ExtendedState:
    """Time derivative of every field; the S slot carries d_t S in its periodic part."""
    d = rhs_arrays(state.arrays(), state.grid, state.S.winding, state.eps, H, closure)
    return ExtendedState.from_arrays(state.grid, d, tuple(0.0 for _ in state.S.winding),
                                     state.eps, 0.0)


def cfl_limit(state: ExtendedState, H: HamiltonianSpec, closure: PhaseClosure,
              cfl: float = DEFAULT_CFL) -> float:
    """cfl * min(eps dtheta / (max|Om| + c max|grad S|), dx / (max|v| + c))."""
    grid = state.grid
    rho = state.rho.values()
    p = state.p.values()
    K = state.S.gradient().values
    op = _Ops(grid, K, state.eps)
    v = H.d_p(p, rho, op.col(op.grad(state.rho.harmonics)))
    dS = closure(state.S, state.rho.harmonics[..., 0].real, state.p.harmonics[..., 0].real,
                 state.has_waves())
    Om = dS[..., None] + np.sum(v * K[..., None], axis=0)
    kappa = np.sqrt(np.sum(K * K, axis=0))
    c = H.wave_speed
    speed = float(np.max(np.sqrt(np.sum(v * v, axis=0)))) + c
    fast = float(np.max(np.abs(Om)) + c * kappa.max())
    lim_x = min(grid.dx) / speed
    lim_th = state.eps * (2 * np.pi / grid.n_theta) / fast if fast > 0 else np.inf
    return cfl * min(lim_x, lim_th)


def _check_post(arrs, grid, winding, eps):
    rho_h, p_h, D_h, chi_h, s_per = arrs
    for name, a in zip(("rho", "p", "h", "chi", "S"), arrs):
        if not np.all(np.isfinite(a)):
            raise StepRejected("non-finite values after step", field=name)
    rho = to_collocation(rho_h, grid.n_theta)
    if rho.min() <= RHO_FLOOR:
        idx = np.unravel_index(np.argmin(rho), rho.shape)
        raise StepRejected("density fell to the floor", field="rho",
                           value=float(rho.min()), location=idx)
    S = PhaseField(grid, winding, ScalarField(grid, np.real(s_per)))
    op = _Ops(grid, S.gradient().values, eps)
    if grid.dim == 1:
        det = 1 + op.col(op.grad(D_h[0]))[0]
    else:
        J = [[op.col(op.grad(D_h[j]))[i] + (i == j) for i in range(2)] for j in range(2)]
        det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    if det.min() <= 0:
        idx = np.unravel_index(np.argmin(det), det.shape)
        raise StepRejected("label map lost orientation", field="det grad^S h",
                           value=float(det.min()), location=idx)


def step_extended(state: ExtendedState, H: HamiltonianSpec, closure: PhaseClosure,
                  dt: float, cfl: float = DEFAULT_CFL) -> ExtendedState:
    limit = cfl_limit(state, H, closure, cfl)
    if dt > limit * (1 + 1e-12):
        raise StepRejected("time step exceeds the stiff CFL limit", field="dt", value=dt)
    grid, w, eps = state.grid, state.S.winding, state.eps
    new = rk4(state.arrays(), lambda y: rhs_arrays(y, grid, w, eps, H, closure), dt)
    new = new[:4] + (np.real(new[4]),)
    _check_post(new, grid, w, eps)
    return ExtendedState.from_arrays(grid, new, w, eps, state.t + dt)


# --- reconstruction and diagnostics ----------------------------------------


def _fast_phase(state: ExtendedState) -> np.ndarray:
    _check_shift_scale(state.S, 1.0 / state.eps)
    return state.S.values() / state.eps


def reconstruct(state: ExtendedState) -> BaseState:
    """Evaluate every loop field on the graph theta = S(x)/eps."""
    th = _fast_phase(state)
    ev = [evaluate_harmonics(f.harmonics, th) for f in (state.rho, state.p, state.h, state.chi)]
    return BaseState.from_arrays(state.grid, ev, state.t)


def total_mass(state: ExtendedState) -> float:
    return float(state.grid.integrate(state.rho.harmonics[..., 0].real))


def total_momentum(state: ExtendedState) -> np.ndarray:
    return state.grid.integrate(state.p.harmonics[..., 0].real)


def specific_wave_action(state: ExtendedState) -> LoopField:
    """rho d_theta chi + (p + rho grad^S chi) . zeta with (grad^S h)^T zeta = -d_theta h."""
    grid = state.grid
    op = _Ops(grid, state.S.gradient().values, state.eps)
    dim = grid.dim
    rho = state.rho.values()
    p = state.p.values()
    D_h = state.h.harmonics
    dthD = op.col(op.n * D_h)
    J = np.stack([op.col(op.grad(D_h[j])) for j in range(dim)])
    for j in range(dim):
        J[j, j] += 1.0
    if dim == 1:
        det = J[0, 0]
        zeta = -dthD / det
    else:
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        # zeta solves J^T zeta = -d_theta h, J[j, i] = grad_i h_j
        zeta = np.stack([-(J[1, 1] * dthD[0] - J[1, 0] * dthD[1]) / det,
                         -(-J[0, 1] * dthD[0] + J[0, 0] * dthD[1]) / det])
    if det.min() < 1e-12:
        idx = np.unravel_index(np.argmin(det), det.shape)
        raise SingularLabelMap("grad^S h is not orientation preserving", field="det grad^S h",
                               value=float(det.min()), location=idx)
    chi_h = state.chi.harmonics
    gchi = op.col(op.grad(chi_h))
    dthchi = op.col(op.n * chi_h)
    Itil = rho * dthchi + np.sum((p + rho * gchi) * zeta, axis=0)
    return LoopField.from_values(grid, Itil)


def circulation_family(state: ExtendedState, n_theta_samples: int = 16) -> np.ndarray:
    """Per-theta loop integrals of p^{S/eps}/rho^{S/eps} around the full circle (d = 1)."""
    grid = state.grid
    if grid.dim != 1:
        raise NotImplementedError("circulation families over marker contours are only provided for d = 1")
    th0 = _fast_phase(state)
    out = np.empty(n_theta_samples)
    for j in range(n_theta_samples):
        th = th0 + 2 * np.pi * j / n_theta_samples
        rho = evaluate_harmonics(state.rho.harmonics, th)
        p = evaluate_harmonics(state.p.harmonics[0], th)
        out[j] = grid.integrate(p / rho)
    return out


def init_slow_manifold(mean, rho_hat: LoopField, eps: float | None = None,
                       params: IsothermalParams | None = None,
                       mean_displacement: np.ndarray | None = None) -> ExtendedState:
    """Extended state on the leading-order slow manifold over a mean state.

    ``mean`` is a :class:`~wkbflow.reduced.MeanWaveState`. The fluctuating
    momentum, label displacement and multiplier are slaved to ``rho_hat``.
    """
    from .slow_manifold import SlowFields, slaving_leading

    eps = mean.eps if eps is None else float(eps)
    params = IsothermalParams() if params is None else params
    grid = mean.rho_bar.grid
    dim = grid.dim
    slow = SlowFields.from_mean(mean, params, mean_displacement)
    fast = slaving_leading(slow, rho_hat)

    def lift(a):
        h = np.zeros(np.shape(a) + (grid.n_harm,), dtype=complex)
        h[..., 0] = a
        return h

    rho = lift(mean.rho_bar.values) + eps * rho_hat.harmonics
    p = lift(mean.p_bar.values) + eps * fast.p.harmonics
    chi = lift(mean.chi_bar.values) + eps ** 2 * fast.chi.harmonics
    alpha = fast.alpha.values()
    D = eps ** 2 * alpha
    if mean_displacement is not None and np.any(mean_displacement != 0):
        xs = [c[..., None] + eps ** 2 * alpha[i] for i, c in enumerate(grid.coords)]
        D = D + np.stack([interpolate(mean_displacement[j], grid, xs) for j in range(dim)])
    D_h = to_harmonics(D)
    return ExtendedState.from_arrays(grid, (rho, p, D_h, chi, mean.S.periodic_part.values),
                                     mean.S.winding, eps, mean.t)
