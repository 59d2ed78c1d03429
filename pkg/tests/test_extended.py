import numpy as np
import pytest

from wkbflow import base as tier1
from wkbflow import extended as tier2
from wkbflow.errors import SingularLabelMap, VanishingPhaseGradient
from wkbflow.experiments.checks import embedding_error, packet_mean, suite_extended
from wkbflow.hamiltonian import IsothermalParams, isothermal_hamiltonian
from wkbflow.reduced import wave_action_from_fluctuations
from wkbflow.torus import (LoopField, PhaseField, ScalarField, TorusGrid, VectorLoopField,
                           spectral_deriv, theta_average)

L = 2 * np.pi
P = IsothermalParams(1.0, 1.0)
H = isothermal_hamiltonian(P)


def uniform_state(grid, eps, winding, rho=None):
    z = np.zeros((1,) + grid.shape + (grid.n_harm,), complex)
    r = z[0].copy()
    r[..., 0] = 1.0
    rho = LoopField(grid, r) if rho is None else rho
    return tier2.ExtendedState(rho, VectorLoopField(grid, z), VectorLoopField(grid, z),
                               LoopField(grid, z[0]), PhaseField.linear(grid, (winding,)), eps)


class TestRhs:
    def test_theta_independent_matches_base(self, rng):
        g = TorusGrid(1, (L,), (32,), 16)
        x = g.coords[0]
        b = tier1.BaseState.from_arrays(g, (1 + 0.1 * np.sin(x), (0.2 * np.cos(x))[None],
                                            (0.1 * np.sin(2 * x))[None], np.cos(x)))
        e = tier2.ExtendedState.from_base(b, PhaseField.linear(g, (0.0,)), 0.1)
        d = tier2.rhs_extended(e, H, tier2.EikonalClosure(1.0))
        db = tier1.rhs_base(b, H)
        assert np.max(np.abs(d.rho.harmonics[..., 0] - db.rho.values)) < 1e-13
        assert np.max(np.abs(d.p.harmonics[..., 0] - db.p.values)) < 1e-13
        assert np.all(d.S.periodic_part.values == 0)

    def test_eikonal_uniform_background(self):
        g = TorusGrid(1, (L,), (32,), 16)
        eps = 1 / 8
        e = uniform_state(g, eps, 3 * eps)  # S = eps k x with k = 3
        d = tier2.rhs_extended(e, H, tier2.EikonalClosure(1.0))
        assert np.allclose(d.S.periodic_part.values, -3 * eps)

    def test_continuity_oscillation_at_leading_order(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 16, pbar=0.0)
        from wkbflow.slow_manifold import SlowFields, eigen_residual
        r = eigen_residual(SlowFields.from_mean(mean, P), rho_hat)
        assert max(r) < 1e-10

    def test_vanishing_phase_gradient(self):
        g = TorusGrid(1, (L,), (32,), 16)
        r = np.zeros(g.shape + (g.n_harm,), complex)
        r[..., 0] = 1.0
        r[..., 1] = 0.05
        e = uniform_state(g, 0.1, 0.0, LoopField(g, r))
        with pytest.raises(VanishingPhaseGradient):
            tier2.rhs_extended(e, H, tier2.EikonalClosure(1.0))

    def test_one_way_coupling(self, rng):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        e = tier2.init_slow_manifold(mean, rho_hat, 1 / 8, P)
        e2 = tier2.ExtendedState(e.rho, e.p, VectorLoopField(g, e.h.harmonics * 0.5),
                                 LoopField(g, e.chi.harmonics + 1), e.S, e.eps)
        a = tier2.rhs_extended(e, H, tier2.EikonalClosure(1.0))
        b = tier2.rhs_extended(e2, H, tier2.EikonalClosure(1.0))
        for f1, f2 in ((a.rho, b.rho), (a.p, b.p)):
            assert np.array_equal(f1.harmonics, f2.harmonics)
        assert np.array_equal(a.S.periodic_part.values, b.S.periodic_part.values)

    def test_mean_continuity_is_exact_average(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        e = tier2.init_slow_manifold(mean, rho_hat, 1 / 8, P)
        d = tier2.rhs_extended(e, H, tier2.EikonalClosure(1.0))
        pbar = ScalarField(g, e.p.harmonics[0][..., 0].real)
        from wkbflow.torus import dealias
        expect = -dealias(spectral_deriv(pbar, 0)).values
        assert np.max(np.abs(d.rho.harmonics[..., 0].real - expect)) < 1e-13


class TestStepping:
    def test_theta_independent_embedding(self):
        assert embedding_error() < 1e-10

    def test_mass_and_momentum(self):
        g = TorusGrid(1, (L,), (64,), 32)
        mean, rho_hat = packet_mean(g, 1 / 16)
        e0 = tier2.init_slow_manifold(mean, rho_hat, 1 / 16, P)
        closure = tier2.EikonalClosure(1.0)
        dt = 0.9 * tier2.cfl_limit(e0, H, closure)
        e = e0
        for _ in range(20):
            e = tier2.step_extended(e, H, closure, dt)
        assert abs(tier2.total_mass(e) / tier2.total_mass(e0) - 1) < 1e-13
        assert abs(tier2.total_momentum(e)[0] - tier2.total_momentum(e0)[0]) < 1e-12

    def test_gauge_covariance(self):
        gauge = suite_extended()[1]
        assert gauge["passed"], gauge

    def test_winding_unchanged(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        e = tier2.init_slow_manifold(mean, rho_hat, 1 / 8, P)
        closure = tier2.EikonalClosure(1.0)
        e2 = tier2.step_extended(e, H, closure, 0.5 * tier2.cfl_limit(e, H, closure))
        assert e2.S.winding == e.S.winding


class TestReconstruct:
    def test_theta_independent(self):
        g = TorusGrid(1, (L,), (32,), 16)
        x = g.coords[0]
        b = tier1.BaseState.from_arrays(g, (1 + 0.1 * np.sin(x), np.zeros((1, 32)), np.zeros((1, 32)), x * 0))
        r = tier2.reconstruct(tier2.ExtendedState.from_base(b, PhaseField.linear(g, (0.5,)), 0.5))
        assert np.max(np.abs(r.rho.values - b.rho.values)) < 1e-14

    def test_single_harmonic(self):
        g = TorusGrid(1, (L,), (32,), 16)
        eps, k = 1 / 4, 3
        rho = LoopField.from_function(g, lambda x, t: 1 + np.cos(t) + 0 * x)
        e = uniform_state(g, eps, eps * k, rho)
        r = tier2.reconstruct(e)
        assert np.max(np.abs(r.rho.values - (1 + np.cos(k * g.coords[0])))) < 1e-13

    def test_matches_base_run(self):
        """Reconstruction of an evolved extended state agrees with tier 1 run from the reconstruction."""
        g = TorusGrid(1, (L,), (128,), 32)
        eps = 1 / 8
        mean, rho_hat = packet_mean(g, eps)
        e = tier2.init_slow_manifold(mean, rho_hat, eps, P)
        b = tier2.reconstruct(e)
        closure = tier2.EikonalClosure(1.0)
        dt = 0.5 * min(tier2.cfl_limit(e, H, closure), tier1.cfl_limit(b, H))
        for _ in range(40):
            e = tier2.step_extended(e, H, closure, dt)
            b = tier1.step_rk4(b, H, dt)
        r = tier2.reconstruct(e)
        assert np.max(np.abs(r.rho.values - b.rho.values)) < 1e-6


class TestWaveAction:
    def test_theta_independent_zero(self):
        g = TorusGrid(1, (L,), (32,), 16)
        e = uniform_state(g, 0.1, 1.0)
        assert np.all(tier2.specific_wave_action(e).harmonics == 0)

    def test_glm_identity(self):
        g = TorusGrid(1, (L,), (64,), 32)
        eps = 1 / 32
        mean, rho_hat = packet_mean(g, eps)
        e = tier2.init_slow_manifold(mean, rho_hat, eps, P)
        It = theta_average(tier2.specific_wave_action(e)).values
        I = wave_action_from_fluctuations(mean.rho_bar, rho_hat, mean.S).values
        assert np.max(np.abs(It / (-eps ** 3 * I) - 1)) < 5 * eps

    def test_flux_law(self):
        g = TorusGrid(1, (L,), (64,), 32)
        eps = 1 / 16
        mean, rho_hat = packet_mean(g, eps)
        e = tier2.init_slow_manifold(mean, rho_hat, eps, P)
        cl = tier2.EikonalClosure(1.0)
        d = 1e-3 * eps
        Ip = theta_average(tier2.specific_wave_action(tier2.step_extended(e, H, cl, d))).values
        Im = theta_average(tier2.specific_wave_action(tier2.step_extended(e, H, cl, -d))).values
        v = e.p.values()[0] / e.rho.values()
        flux = np.mean(v * tier2.specific_wave_action(e).values(), axis=-1)
        div = spectral_deriv(ScalarField(g, flux), 0).values
        res = (Ip - Im) / (2 * d) + div
        assert np.max(np.abs(res)) < 1e-6 * np.max(np.abs(div))

    def test_singular_label_map(self):
        g = TorusGrid(1, (L,), (32,), 16)
        e = uniform_state(g, 0.1, 1.0)
        D = np.zeros((1,) + g.shape + (g.n_harm,), complex)
        D[..., 1] = 0.1  # grad^S D = -(K/eps) 0.2 sin(theta) reaches -2
        e = tier2.ExtendedState(e.rho, e.p, VectorLoopField(g, D), e.chi, e.S, e.eps)
        with pytest.raises(SingularLabelMap):
            tier2.specific_wave_action(e)


class TestCirculation:
    def test_zero_momentum(self):
        g = TorusGrid(1, (L,), (32,), 16)
        assert np.all(tier2.circulation_family(uniform_state(g, 0.5, 1.0), 8) == 0)

    def test_theta_independent_equals_base(self):
        g = TorusGrid(1, (L,), (32,), 16)
        x = g.coords[0]
        b = tier1.BaseState.from_arrays(g, (1 + 0.1 * np.sin(x), (0.3 + 0.1 * np.cos(x))[None],
                                            np.zeros((1, 32)), x * 0))
        e = tier2.ExtendedState.from_base(b, PhaseField.linear(g, (0.5,)), 0.5)
        fam = tier2.circulation_family(e, 8)
        assert np.allclose(fam, tier1.circulation_base(b), rtol=1e-14)

    def test_family_drift(self):
        from wkbflow.experiments.checks import circulation_family_drift
        assert circulation_family_drift() < 1e-6


class TestInit:
    def test_zero_rho_hat(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        e = tier2.init_slow_manifold(mean, rho_hat.scaled(0.0), 1 / 8, P)
        for f in (e.rho, e.p, e.h, e.chi):
            assert np.all(f.harmonics[..., 1:] == 0)
        assert np.allclose(e.rho.harmonics[..., 0].real, mean.rho_bar.values)

    def test_hat_p_example(self):
        g = TorusGrid(1, (L,), (32,), 16)
        from wkbflow.reduced import MeanWaveState
        z = np.zeros(32)
        mean = MeanWaveState.from_arrays(g, (z + 1, z[None], z, z, z), (1.0,), 1 / 8)
        rho_hat = LoopField.from_function(g, lambda x, t: 0.1 * np.cos(t) + 0 * x)
        e = tier2.init_slow_manifold(mean, rho_hat, 1 / 8, P)
        p_hat = (e.p.values()[0]) / (1 / 8)
        assert np.max(np.abs(p_hat - 0.1 * np.cos(g.theta))) < 1e-14

    def test_mean_displacement_composition(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        dbar = (0.05 * np.sin(g.coords[0]))[None]
        e = tier2.init_slow_manifold(mean, rho_hat, 1 / 8, P, mean_displacement=dbar)
        from wkbflow.slow_manifold import split_state
        sp = split_state(e, P)
        assert np.max(np.abs(sp.slow.h_bar - dbar)) < 1e-12
        assert np.max(np.abs(sp.rho_hat.harmonics - rho_hat.harmonics)) < 1e-12

    def test_invalid_winding_for_eps(self):
        g = TorusGrid(1, (L,), (32,), 16)
        mean, rho_hat = packet_mean(g, 1 / 8)
        e = tier2.init_slow_manifold(mean, rho_hat, 0.3, P)
        with pytest.raises(ValueError):
            tier2.reconstruct(e)
