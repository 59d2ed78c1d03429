"""Invariant check suites with fixed seeds and machine-readable results.

Every suite returns a list of entries ``{name, value, threshold, relation,
passed}``. Failures are entries, never exceptions.
"""

from __future__ import annotations

import numpy as np

from .. import base as tier1
from .. import extended as tier2
from .. import reduced as tier3
from .. import slow_manifold as sm
from ..hamiltonian import IsothermalParams, fd_check, isothermal_hamiltonian
from ..torus import (LoopField, PhaseField, ScalarField, TorusGrid, VectorLoopField, grad_S,
                     phase_shift, spectral_deriv, theta_antiderivative, theta_average,
                     theta_derivative)

SEED = 20240601
L = 2 * np.pi


def entry(name, value, threshold, relation="<"):
    value = float(value)
    ok = {"<": value < threshold, ">=": value >= threshold, "<=": value <= threshold}[relation]
    return {"name": name, "value": value, "threshold": threshold, "relation": relation,
            "passed": bool(ok)}


def entry_range(name, value, lo, hi):
    value = float(value)
    return {"name": name, "value": value, "threshold": [lo, hi], "relation": "in",
            "passed": bool(lo <= value <= hi)}


def random_loop(grid: TorusGrid, rng, kx: int = 4, kt: int = 4, vector: bool = False,
                zero_mean: bool = False):
    """Band-limited random loop field with at most kx spatial and kt theta modes."""
    lead = (grid.dim,) if vector else ()
    h = np.zeros(lead + grid.shape + (grid.n_harm,), dtype=complex)
    x = grid.coords
    for n in range(0 if not zero_mean else 1, kt + 1):
        amp = np.zeros(lead + grid.shape, dtype=complex)
        for m in range(0, kx + 1):
            for i in range(grid.dim):
                k = 2 * np.pi * m / grid.lengths[i]
                c = (rng.normal(size=lead + (1,) * grid.dim) + 1j * rng.normal(size=lead + (1,) * grid.dim))
                amp = amp + c * np.exp(1j * k * x[i]) / (1 + m + n)
        h[..., n] = amp if n else amp.real
    cls = VectorLoopField if vector else LoopField
    f = cls(grid, h)
    return cls.from_values(grid, f.values())


def random_smooth(grid: TorusGrid, rng, amp: float, kmax: int = 3) -> np.ndarray:
    out = np.zeros(grid.shape)
    for i in range(grid.dim):
        x = grid.coords[i]
        for m in range(1, kmax + 1):
            k = 2 * np.pi * m / grid.lengths[i]
            out += amp * rng.normal() * np.cos(k * x + rng.uniform(0, 2 * np.pi)) / m
    return out


def rel_err(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# --- suites ---------------------------------------------------------------


def suite_operators() -> list:
    rng = np.random.default_rng(SEED)
    grid = TorusGrid(1, (L,), (256,), 16)
    f = random_loop(grid, rng)
    g = random_loop(grid, rng, zero_mean=True)
    S = PhaseField.linear(grid, (0.75,), random_smooth(grid, rng, 0.1))
    eps = 1 / 4
    out = []
    back = theta_antiderivative(theta_derivative(g))
    out.append(entry("antiderivative of d_theta g recovers g", np.max(np.abs(back.harmonics - g.harmonics)), 1e-10))
    fm = LoopField(grid, f.harmonics - np.eye(grid.n_harm)[0] * f.harmonics[..., :1])
    back = theta_antiderivative(theta_derivative(f))
    out.append(entry("antiderivative(d_theta f) = f - mean f", np.max(np.abs(back.harmonics - fm.harmonics)), 1e-10))
    rt = phase_shift(phase_shift(f, S, 1 / eps), S, -1 / eps)
    out.append(entry("phase shift round trip", np.max(np.abs(rt.values() - f.values())), 1e-10))
    sh = phase_shift(f, S, 1 / eps)
    out.append(entry("phase shift preserves the theta average",
                     np.max(np.abs(theta_average(sh).values - theta_average(f).values)), 1e-10))
    out.append(entry("theta average of d_theta f vanishes",
                     np.max(np.abs(theta_average(theta_derivative(f)).values)), 1e-10))
    # chain rule: grad^S f = shift_{-S/eps}( d_x shift_{S/eps} f )
    lhs = grad_S(f, S, eps).component(0)
    rhs = phase_shift(spectral_deriv(phase_shift(f, S, 1 / eps), 0), S, -1 / eps)
    out.append(entry("grad_S chain-rule oracle", rel_err(lhs.values(), rhs.values()), 1e-10))
    avg = theta_average(grad_S(f, S, eps)).values[0]
    out.append(entry("mean of grad_S f is grad of mean f",
                     np.max(np.abs(avg - spectral_deriv(theta_average(f), 0).values)), 1e-10))
    g2 = TorusGrid(2, (L, 3.0), (16, 24), 8)
    u = ScalarField(g2, random_smooth(g2, rng, 1.0))
    a = spectral_deriv(spectral_deriv(u, 0), 1).values
    b = spectral_deriv(spectral_deriv(u, 1), 0).values
    out.append(entry("mixed spectral derivatives commute", np.max(np.abs(a - b)), 1e-11))
    return out


def suite_hamiltonian() -> list:
    rng = np.random.default_rng(SEED)
    P = IsothermalParams(1.3, 0.8)
    H = isothermal_hamiltonian(P)
    p = rng.normal(size=(2, 50))
    rho = rng.uniform(0.5, 2.0, size=50)
    gr = rng.normal(size=(2, 50))
    errs = fd_check(H, p, rho, gr)
    out = [entry(f"isothermal {k} matches finite differences", v, 1e-6) for k, v in errs.items()]
    v = H.d_p(p, rho, gr)
    lag = rho * np.sum(v * v, axis=0) / 2 - P.c_s ** 2 * rho * np.log(rho / P.rho_ref)
    out.append(entry("Legendre identity H = v.p - L",
                     np.max(np.abs(H.eval(p, rho, gr) - (np.sum(v * p, axis=0) - lag))), 1e-12))
    return out


def acoustic_frequency(u0: float, direction: float, k: int = 3, n_x: int = 128, periods: int = 10,
                       c_s: float = 1.0, amp: float = 1e-6) -> float:
    """Measured angular frequency of a small travelling acoustic wave (tier 1)."""
    grid = TorusGrid(1, (L,), (n_x,), 8)
    P = IsothermalParams(c_s, 1.0)
    H = isothermal_hamiltonian(P)
    x = grid.coords[0]
    speed = u0 + direction * c_s
    rho = 1 + amp * np.cos(k * x)
    p = (u0 * rho + speed * amp * np.cos(k * x))[None]
    state = tier1.BaseState.from_arrays(grid, (rho, p, np.zeros((1, n_x)), np.zeros(n_x)))
    T = periods * 2 * np.pi / abs(speed * k)
    n = int(np.ceil(T / (0.9 * tier1.cfl_limit(state, H))))
    dt = T / n
    ts, ph = [], []
    for _ in range(n):
        state = tier1.step_rk4(state, H, dt)
        ts.append(state.t)
        ph.append(np.angle(np.fft.fft(state.rho.values)[k]))
    return float(-np.polyfit(ts, np.unwrap(ph), 1)[0])


def suite_base() -> list:
    rng = np.random.default_rng(SEED)
    grid = TorusGrid(1, (L,), (64,), 8)
    P = IsothermalParams(1.0, 1.0)
    H = isothermal_hamiltonian(P)
    rho = 1 + random_smooth(grid, rng, 0.1)
    p = random_smooth(grid, rng, 0.1)[None]
    s0 = tier1.BaseState.from_arrays(grid, (rho, p, random_smooth(grid, rng, 0.05)[None],
                                            random_smooth(grid, rng, 0.1)))
    d = tier1.rhs_base(s0, H)
    out = [entry("integral of the momentum tendency", abs(d.p.values.sum() * grid.dx[0]), 1e-11)]
    s1 = tier1.BaseState.from_arrays(grid, (rho, p, s0.h.values + 0.1, s0.chi.values + 1.0))
    d1 = tier1.rhs_base(s1, H)
    out.append(entry("(rho, p) tendency independent of (h, chi)",
                     np.max(np.abs(d1.rho.values - d.rho.values)) + np.max(np.abs(d1.p.values - d.p.values)),
                     1e-300, "<="))
    dt = 0.9 * tier1.cfl_limit(s0, H)
    s = s0
    for _ in range(1000):
        s = tier1.step_rk4(s, H, dt)
    out.append(entry("mass drift over 1000 steps", abs(tier1.mass(s) / tier1.mass(s0) - 1), 1e-10))
    m0 = tier1.momentum(s0)[0]
    out.append(entry("momentum drift over 1000 steps", abs(tier1.momentum(s)[0] - m0) / max(abs(m0), 1e-3), 1e-10))
    s0 = tier1.BaseState.from_arrays(grid, (rho, p + 0.3, s0.h.values, s0.chi.values))
    s = s0
    c0 = tier1.circulation_base(s0)
    n = int(np.ceil(1.0 / (0.25 * tier1.cfl_limit(s0, H))))
    e0 = tier1.energy(s0, H)
    for _ in range(n):
        s = tier1.step_rk4(s, H, 1.0 / n)
    out.append(entry("energy drift over T = 1", abs(tier1.energy(s, H) / e0 - 1), 1e-8))
    out.append(entry("base circulation drift over T = 1", abs(tier1.circulation_base(s) - c0) / max(abs(c0), 1e-3), 1e-10))
    om = acoustic_frequency(0.0, 1.0)
    out.append(entry("acoustic frequency / (c k) - 1", abs(om / 3.0 - 1), 0.01))
    for sign in (1.0, -1.0):
        om = acoustic_frequency(0.3, sign)
        out.append(entry(f"Doppler frequency / ((u0 {'+' if sign > 0 else '-'} c) k) - 1",
                         abs(om / ((0.3 + sign) * 3.0) - 1), 0.01))
    return out


def embedding_error(n_steps: int = 100) -> float:
    rng = np.random.default_rng(SEED)
    grid = TorusGrid(1, (L,), (64,), 16)
    H = isothermal_hamiltonian(IsothermalParams(1.0, 1.0))
    arrs = (1 + random_smooth(grid, rng, 0.1), random_smooth(grid, rng, 0.1)[None],
            random_smooth(grid, rng, 0.05)[None], random_smooth(grid, rng, 0.1))
    b = tier1.BaseState.from_arrays(grid, arrs)
    e = tier2.ExtendedState.from_base(b, PhaseField.linear(grid, (0.0,)), 1 / 16)
    closure = tier2.EikonalClosure(1.0)
    dt = 0.5 * tier1.cfl_limit(b, H)
    for _ in range(n_steps):
        b = tier1.step_rk4(b, H, dt)
        e = tier2.step_extended(e, H, closure, dt)
    r = tier2.reconstruct(e)
    return max(rel_err(a, c) for a, c in zip(r.arrays(), b.arrays()))


def packet_mean(grid, eps, rng=None, pbar=0.1, action_amp=0.3):
    """Mean state with smooth nonuniform background for slow-manifold studies."""
    x = grid.coords[0]
    rb = 1 + 0.1 * np.cos(x)
    pb = (pbar * np.sin(x))[None]
    cb = 0.1 * np.cos(2 * x)
    mean = tier3.MeanWaveState.from_arrays(grid, (rb, pb, cb, 0 * rb, 0.1 * np.sin(x)), (1.0,), eps)
    rho_hat = LoopField.from_function(grid, lambda x, th: (action_amp + 0.1 * np.sin(x)) * np.cos(th))
    return mean, rho_hat


def suite_extended() -> list:
    out = [entry("theta-independent run matches tier 1 (100 steps)", embedding_error(), 1e-10)]
    rng = np.random.default_rng(SEED)
    grid = TorusGrid(1, (L,), (128,), 64)
    H = isothermal_hamiltonian(IsothermalParams(1.0, 1.0))
    eps = 1 / 8
    x = grid.coords[0]
    rho = LoopField.from_values(grid, 1 + 0.1 * random_loop(grid, rng, 2, 2).values() / 4)
    p = VectorLoopField.from_values(grid, 0.05 * random_loop(grid, rng, 2, 2, vector=True).values())
    zero = VectorLoopField(grid, np.zeros((1,) + grid.shape + (grid.n_harm,), complex))
    S = PhaseField.linear(grid, (1.0,), 0.2 * np.sin(x))
    ext = tier2.ExtendedState(rho, p, zero, LoopField(grid, zero.harmonics[0]), S, eps)
    closure = tier2.PrescribedClosure(-1.0 - 0.1 * np.cos(x))
    psi = PhaseField.linear(grid, (0.0,), 0.05 * np.cos(x))
    sh = lambda f: phase_shift(f, psi, -1 / eps)
    ext2 = tier2.ExtendedState(sh(rho), sh(p), zero, LoopField(grid, zero.harmonics[0]),
                               S.shifted(psi), eps)
    dt = 0.9 * min(tier2.cfl_limit(ext, H, closure), tier2.cfl_limit(ext2, H, closure))
    for _ in range(50):
        ext = tier2.step_extended(ext, H, closure, dt)
        ext2 = tier2.step_extended(ext2, H, closure, dt)
    r1, r2 = tier2.reconstruct(ext), tier2.reconstruct(ext2)
    out.append(entry("gauge covariance of the reconstruction",
                     max(rel_err(a, b) for a, b in zip(r1.arrays()[:2], r2.arrays()[:2])), 1e-10))
    return out


def suite_slow_manifold() -> list:
    rng = np.random.default_rng(SEED)
    grid = TorusGrid(1, (L,), (64,), 32)
    mean, rho_hat = packet_mean(grid, 1 / 16)
    P = IsothermalParams(1.0, 1.0)
    H = isothermal_hamiltonian(P)
    slow = sm.SlowFields.from_mean(mean, P)
    y = random_fast(grid, rng)
    out = [entry("invert_A after apply_A", sm.invert_A(slow, sm.apply_A(slow, y)).combine(1, y, -1).norm() / y.norm(), 1e-10),
           entry("apply_A after invert_A", sm.apply_A(slow, sm.invert_A(slow, y)).combine(1, y, -1).norm() / y.norm(), 1e-10)]
    out.append(entry("eigen-relation residual", max(sm.eigen_residual(slow, rho_hat)), 1e-11))
    ext = tier2.init_slow_manifold(mean, rho_hat, 1 / 16, P)
    out.append(entry("split recovers rho_hat", np.max(np.abs(sm.split_state(ext, P).rho_hat.harmonics - rho_hat.harmonics)), 1e-12))
    res = []
    for eps in (1 / 16, 1 / 64):
        mean, rho_hat = packet_mean(grid, eps)
        ext = tier2.init_slow_manifold(mean, rho_hat, eps, P)
        res.append(sm.invariance_residual(ext, H, tier2.EikonalClosure(1.0), params=P))
    out.append(entry_range("invariance residual ratio eps=1/16 vs 1/64", res[0] / res[1], 4 / 1.5, 4 * 1.5))
    return out


def random_fast(grid, rng) -> "sm.FastFields":
    a = random_loop(grid, rng, 3, 5, vector=True, zero_mean=True)
    p = random_loop(grid, rng, 3, 5, vector=True, zero_mean=True)
    c = random_loop(grid, rng, 3, 5, zero_mean=True)
    return sm.FastFields(a, p, c)


def reduced_packet_state(eps: float = 0.1, n_x: int = 128) -> "tier3.MeanWaveState":
    grid = TorusGrid(1, (L,), (n_x,), 8)
    x = grid.coords[0]
    return tier3.MeanWaveState.from_arrays(
        grid, (1 + 0.05 * np.cos(x), (0.05 * np.sin(2 * x))[None], 0 * x,
               1 + 0.5 * np.cos(x) + 0.3 * np.sin(3 * x), 0.1 * np.sin(x)), (2.0,), eps)


def suite_reduced() -> list:
    P = IsothermalParams(1.0, 1.0)
    s0 = reduced_packet_state()
    dt = 0.5 * tier3.cfl_limit(s0, P)
    s = s0
    for _ in range(1000):
        s = tier3.step_reduced(s, P, dt)
    out = [entry("reduced mass drift (1000 steps)", abs(tier3.mass(s) / tier3.mass(s0) - 1), 1e-10),
           entry("reduced momentum drift (1000 steps)",
                 abs(tier3.momentum(s)[0] - tier3.momentum(s0)[0]) / np.sum(np.abs(s0.p_bar.values) * s0.grid.dx[0]), 1e-10),
           entry("reduced wave action drift (1000 steps)", abs(tier3.total_action(s) / tier3.total_action(s0) - 1), 1e-10)]
    grid = TorusGrid(1, (L,), (64,), 32)
    mean, rho_hat = packet_mean(grid, 1 / 16)
    ext = tier2.init_slow_manifold(mean, rho_hat, 1 / 16, IsothermalParams(1.3, 1.0))
    out.append(entry("Reynolds stress closure discrepancy",
                     tier3.reynolds_stress_check(sm.split_state(ext, IsothermalParams(1.3, 1.0)))[2], 1e-10))
    return out


def mean_circulation_drifts(T: float = 0.5) -> tuple:
    P = IsothermalParams(1.0, 1.0)
    s = reduced_packet_state()
    c0 = tier3.mean_circulation(s)
    n0 = tier3.mean_circulation(s, include_pseudomomentum=False)
    n = int(np.ceil(T / (0.9 * tier3.cfl_limit(s, P))))
    for _ in range(n):
        s = tier3.step_reduced(s, P, T / n)
    scale = float(np.sum(np.abs(s.p_bar.values / s.rho_bar.values)) * s.grid.dx[0])
    full = abs(tier3.mean_circulation(s) - c0) / scale
    bare = abs(tier3.mean_circulation(s, include_pseudomomentum=False) - n0) / scale
    return full, bare


def circulation_family_drift(eps: float = 1 / 16, T: float = 0.1, n_x: int = 128) -> float:
    grid = TorusGrid(1, (L,), (n_x,), 32)
    P = IsothermalParams(1.0, 1.0)
    H = isothermal_hamiltonian(P)
    mean, rho_hat = packet_mean(grid, eps)
    mean = tier3.MeanWaveState.from_arrays(
        grid, (mean.rho_bar.values, mean.p_bar.values + 0.2, mean.chi_bar.values,
               mean.action.values, mean.S.periodic_part.values), mean.S.winding, eps)
    ext = tier2.init_slow_manifold(mean, rho_hat, eps, P)
    closure = tier2.EikonalClosure(1.0)
    c0 = tier2.circulation_family(ext, 16)
    n = int(np.ceil(T / (0.9 * tier2.cfl_limit(ext, H, closure))))
    for _ in range(n):
        ext = tier2.step_extended(ext, H, closure, T / n)
    c1 = tier2.circulation_family(ext, 16)
    return float(np.max(np.abs(c1 - c0)) / np.max(np.abs(c0)))


def suite_circulation() -> list:
    grid = TorusGrid(1, (L,), (64,), 8)
    rng = np.random.default_rng(SEED)
    H = isothermal_hamiltonian(IsothermalParams(1.0, 1.0))
    s0 = tier1.BaseState.from_arrays(grid, (1 + random_smooth(grid, rng, 0.1),
                                            (0.3 + random_smooth(grid, rng, 0.1))[None],
                                            np.zeros((1, 64)), np.zeros(64)))
    n = int(np.ceil(1.0 / (0.25 * tier1.cfl_limit(s0, H))))
    s = s0
    for _ in range(n):
        s = tier1.step_rk4(s, H, 1.0 / n)
    c0 = tier1.circulation_base(s0)
    out = [entry("base circulation drift (T = 1)", abs(tier1.circulation_base(s) - c0) / abs(c0), 1e-10),
           entry("per-theta circulation family drift (T = 0.1, eps = 1/16)", circulation_family_drift(), 1e-6)]
    full, bare = mean_circulation_drifts()
    out.append(entry("mean circulation drift (T = 0.5)", full, 1e-8))
    out.append(entry("negative control: drift without pseudomomentum / drift with it",
                     bare / max(full, 1e-300), 100, ">="))
    return out


def glm_ratios(eps_list=(1 / 8, 1 / 16, 1 / 32)) -> list:
    grid = TorusGrid(1, (L,), (64,), 32)
    P = IsothermalParams(1.0, 1.0)
    out = []
    for eps in eps_list:
        mean, rho_hat = packet_mean(grid, eps)
        ext = tier2.init_slow_manifold(mean, rho_hat, eps, P)
        It = theta_average(tier2.specific_wave_action(ext)).values
        I = tier3.wave_action_from_fluctuations(mean.rho_bar, rho_hat, mean.S, P.c_s).values
        out.append(float(grid.integrate(It) / (-eps ** 3 * grid.integrate(I))))
    return out


def suite_glm_identity() -> list:
    eps = np.array([1 / 8, 1 / 16, 1 / 32])
    r = np.array(glm_ratios(tuple(eps)))
    dev = np.abs(r - 1)
    C = float(np.max(dev / eps))
    order = float(np.polyfit(np.log(eps), np.log(dev), 1)[0])
    out = [entry_range(f"ratio at eps = 1/{int(round(1 / e))}", v, 1 - C * e, 1 + C * e)
           for e, v in zip(eps, r)]
    out.append(entry("observed convergence order of the ratio", order, 0.8, ">="))
    return out


SUITES = {
    "operators": suite_operators,
    "hamiltonian": suite_hamiltonian,
    "base": suite_base,
    "extended": suite_extended,
    "slow-manifold": suite_slow_manifold,
    "reduced": suite_reduced,
    "circulation": suite_circulation,
    "glm-identity": suite_glm_identity,
}


def run_suite(name: str) -> dict:
    if name not in SUITES:
        raise KeyError(name)
    entries = SUITES[name]()
    return {"suite": name, "seed": SEED, "entries": entries,
            "passed": all(e["passed"] for e in entries)}
