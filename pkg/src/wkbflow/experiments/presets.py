"""Named initial conditions for every tier.

Each preset takes the grid, the Hamiltonian parameters, eps and a parameter
dict, and returns the initial state for the requested tier. The
``wave_packet`` preset is tier-aware: the reduced tier gets the mean state and
wave action directly, the extended tier gets the slow-manifold lift of that
mean state, and the base tier gets the reconstruction of the extended state.
"""

from __future__ import annotations

import numpy as np

from ..base import BaseState
from ..errors import ConfigInvalid
from ..extended import ExtendedState, init_slow_manifold, reconstruct
from ..hamiltonian import IsothermalParams
from ..reduced import MeanWaveState
from ..torus import LoopField, PhaseField, TorusGrid, dealias_x

DEFAULTS = {
    "rest": {"winding": 1.0},
    "acoustic": {"amplitude": 1e-3, "mode": 1, "u0": 0.0, "direction": 1.0, "winding": 1.0},
    "random_smooth": {"amplitude": 0.05, "modes": 3, "winding": 1.0},
    "wave_packet": {"action": 0.02, "width": 0.6, "center": 0.5, "winding": 1.0,
                    "u0": 0.0, "mean_amplitude": 0.0},
}

PARAM_KEYS = sorted({k for d in DEFAULTS.values() for k in d})


def _coords(grid: TorusGrid):
    return grid.coords


def _wave_phase(grid: TorusGrid, winding, eps: float) -> PhaseField:
    w = tuple(float(winding) if i == 0 else 0.0 for i in range(grid.dim))
    S = PhaseField.linear(grid, w)
    m = w[0] / eps
    if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
        raise ConfigInvalid("winding/eps must be an integer so that S/eps is single valued",
                            field="initial.winding", value=w[0])
    return S


def _mean_fields(grid, params: IsothermalParams, p: dict, rng):
    """rho_bar, p_bar for presets (theta independent)."""
    x = _coords(grid)
    L = grid.lengths
    rho0 = params.rho_ref
    name = p["preset"]
    if name == "rest":
        rho = np.full(grid.shape, rho0)
        mom = np.zeros((grid.dim,) + grid.shape)
    elif name == "acoustic":
        a, m = p["amplitude"], int(p["mode"])
        k = 2 * np.pi * m / L[0]
        shape = np.cos(k * x[0])
        speed = p["u0"] + p["direction"] * params.c_s
        rho = rho0 * (1 + a * shape)
        mom = np.zeros((grid.dim,) + grid.shape)
        mom[0] = p["u0"] * rho0 + speed * rho0 * a * shape
    elif name == "random_smooth":
        a, nm = p["amplitude"], int(p["modes"])
        rho = np.full(grid.shape, rho0)
        mom = np.zeros((grid.dim,) + grid.shape)
        for m in range(1, nm + 1):
            for i in range(grid.dim):
                k = 2 * np.pi * m / L[i]
                ph = rng.uniform(0, 2 * np.pi, size=2 + grid.dim)
                amp = a * rng.normal(size=2 + grid.dim) / m
                rho = rho + rho0 * amp[0] * np.cos(k * x[i] + ph[0])
                for j in range(grid.dim):
                    mom[j] = mom[j] + rho0 * params.c_s * amp[1 + j] * np.cos(k * x[i] + ph[1 + j])
    elif name == "wave_packet":
        a = p["mean_amplitude"]
        k = 2 * np.pi / L[0]
        rho = rho0 * (1 + a * np.cos(k * x[0]))
        mom = np.zeros((grid.dim,) + grid.shape)
        mom[0] = rho * p["u0"] + rho0 * params.c_s * a * np.cos(k * x[0])
    else:
        raise ConfigInvalid(f"unknown preset {name!r}", field="initial.preset")
    if rho.min() <= 0:
        raise ConfigInvalid("preset produces non-positive density", field="initial.amplitude")
    return dealias_x(rho, grid), dealias_x(mom, grid, lead=1)


def packet_action(grid: TorusGrid, p: dict) -> np.ndarray:
    """Periodised Gaussian wave-action profile along the first axis."""
    L = grid.lengths[0]
    x = grid.coords[0]
    c = p["center"] * L
    w = p["width"]
    I = np.zeros(grid.shape)
    for shift in (-1, 0, 1):
        I += np.exp(-0.5 * ((x - c + shift * L) / w) ** 2)
    return dealias_x(p["action"] * I, grid)


def _mean_wave_state(grid, params, eps, p, rng) -> tuple:
    rho, mom = _mean_fields(grid, params, p, rng)
    S = _wave_phase(grid, p["winding"], eps)
    I = packet_action(grid, p) if p["preset"] == "wave_packet" else np.zeros(grid.shape)
    zero = np.zeros(grid.shape)
    mean = MeanWaveState.from_arrays(grid, (rho, mom, zero, I, zero), S.winding, eps)
    return mean


def rho_hat_for_action(mean: MeanWaveState, c_s: float) -> LoopField:
    """rho_hat = a cos(theta) with amplitude chosen so the wave action equals mean.action."""
    grid = mean.grid
    kappa = mean.S.grad_norm().values
    amp = np.sqrt(np.maximum(2 * mean.action.values * kappa * mean.rho_bar.values / c_s, 0.0))
    h = np.zeros(grid.shape + (grid.n_harm,), dtype=complex)
    h[..., 1] = 0.5 * amp
    return LoopField(grid, h)


def build_initial(tier: str, grid: TorusGrid, params: IsothermalParams, eps: float,
                  initial: dict, seed: int = 0):
    p = dict(DEFAULTS.get(initial.get("preset", ""), {}))
    if not p:
        raise ConfigInvalid(f"unknown preset {initial.get('preset')!r}", field="initial.preset")
    for key, val in initial.items():
        if key == "preset":
            p[key] = val
            continue
        if key not in p:
            raise ConfigInvalid(f"preset {initial['preset']!r} does not take {key!r}",
                                field=f"initial.{key}")
        p[key] = float(val)
    p["preset"] = initial["preset"]
    rng = np.random.default_rng(seed)
    mean = _mean_wave_state(grid, params, eps, p, rng)
    if tier == "reduced":
        return mean
    if p["preset"] == "wave_packet":
        rho_hat = rho_hat_for_action(mean, params.c_s)
        if (eps * np.abs(rho_hat.values()).max()) >= 0.5 * mean.rho_bar.values.min():
            raise ConfigInvalid("wave amplitude too large for a positive density",
                                field="initial.action")
        ext = init_slow_manifold(mean, rho_hat, eps, params)
    else:
        zero = np.zeros((grid.dim,) + grid.shape)
        base = BaseState.from_arrays(grid, (mean.rho_bar.values, mean.p_bar.values, zero,
                                            mean.chi_bar.values))
        ext = ExtendedState.from_base(base, mean.S, eps)
    if tier == "extended":
        return ext
    if tier == "base":
        return reconstruct(ext)
    raise ConfigInvalid(f"unknown tier {tier!r}", field="run.tier")
