import numpy as np
import pytest

from wkbflow.errors import MeanNotZero
from wkbflow.experiments.checks import random_loop, random_smooth
from wkbflow.torus import (LoopField, PhaseField, ScalarField, TorusGrid, VectorField,
                           dealias, grad_S, interpolate, phase_shift, spectral_deriv,
                           theta_antiderivative, theta_average, theta_derivative)

L = 2 * np.pi


@pytest.fixture
def grid():
    return TorusGrid(1, (L,), (32,), 16)


class TestGrid:
    def test_rejects_odd_or_small(self):
        with pytest.raises(ValueError):
            TorusGrid(1, (L,), (31,), 16)
        with pytest.raises(ValueError):
            TorusGrid(1, (L,), (32,), 6)
        with pytest.raises(ValueError):
            TorusGrid(1, (-1.0,), (32,), 16)
        with pytest.raises(ValueError):
            TorusGrid(3, (L, L, L), (8, 8, 8), 8)

    def test_dealias_mask_counts(self):
        g = TorusGrid(1, (L,), (16,), 16)
        # modes |k| < 16/3 survive: k = -5..5
        assert g.x_mask.sum() == 11
        assert list(np.nonzero(g.theta_mask)[0]) == [0, 1, 2, 3, 4, 5]

    def test_fields_are_immutable(self, grid):
        f = ScalarField(grid, np.zeros(32))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_nonfinite_rejected(self, grid):
        with pytest.raises(ValueError):
            ScalarField(grid, np.full(32, np.nan))


class TestSpectralDeriv:
    def test_constant(self, grid):
        assert np.all(spectral_deriv(ScalarField(grid, np.full(32, 3.0)), 0).values == 0)

    def test_single_harmonic(self, grid):
        x = grid.coords[0]
        d = spectral_deriv(ScalarField(grid, np.sin(x)), 0).values
        assert np.max(np.abs(d - np.cos(x))) < 1e-12

    def test_axis_out_of_range(self, grid):
        with pytest.raises(ValueError):
            spectral_deriv(ScalarField(grid, np.zeros(32)), 1)

    def test_against_finite_differences(self, rng):
        errs = []
        for n in (64, 128):
            g = TorusGrid(1, (L,), (n,), 8)
            x = g.coords[0]
            f = np.sin(x) + 0.3 * np.cos(3 * x + 1)
            fd = (np.roll(f, -1) - np.roll(f, 1)) / (2 * g.dx[0])
            errs.append(np.max(np.abs(spectral_deriv(ScalarField(g, f), 0).values - fd)))
        assert 3.5 < errs[0] / errs[1] < 4.5

    def test_2d_mixed_derivatives_commute(self, rng):
        g = TorusGrid(2, (L, 3.0), (16, 24), 8)
        u = ScalarField(g, random_smooth(g, rng, 1.0))
        a = spectral_deriv(spectral_deriv(u, 0), 1).values
        b = spectral_deriv(spectral_deriv(u, 1), 0).values
        assert np.max(np.abs(a - b)) < 1e-11


class TestThetaOperators:
    def test_average_examples(self, grid):
        x = grid.coords[0]
        a = 1 + 0.5 * np.sin(x)
        assert np.allclose(theta_average(LoopField.from_function(grid, lambda x, t: 2.0 + 0 * t)).values, 2.0)
        assert np.max(np.abs(theta_average(LoopField.from_function(grid, lambda x, t: a[:, None] * np.cos(t))).values)) < 1e-15
        c2 = LoopField.from_function(grid, lambda x, t: a[:, None] * np.cos(t) ** 2)
        assert np.max(np.abs(theta_average(c2).values - a / 2)) < 1e-14

    def test_antiderivative_examples(self, grid):
        s = LoopField.from_function(grid, lambda x, t: np.sin(t) + 0 * x)
        c = LoopField.from_function(grid, lambda x, t: np.cos(t) + 0 * x)
        th = grid.theta
        assert np.max(np.abs(theta_antiderivative(s).values() + np.cos(th))) < 1e-14
        assert np.max(np.abs(theta_antiderivative(c).values() - np.sin(th))) < 1e-14

    def test_antiderivative_round_trip(self, grid, rng):
        g = random_loop(grid, rng, zero_mean=True)
        back = theta_antiderivative(theta_derivative(g))
        assert np.max(np.abs(back.values() - g.values())) < 1e-12

    def test_antiderivative_mean_nonzero(self, grid):
        f = LoopField.from_function(grid, lambda x, t: 1.0 + np.cos(t) + 0 * x)
        with pytest.raises(MeanNotZero) as exc:
            theta_antiderivative(f)
        assert exc.value.value == pytest.approx(1.0)

    def test_nyquist_zeroed(self, grid):
        f = LoopField.from_values(grid, np.tile((-1.0) ** np.arange(16), (32, 1)))
        assert np.all(f.harmonics[..., -1] == 0)


class TestPhase:
    def test_gradient_exact_for_winding(self, grid):
        S = PhaseField.linear(grid, (3,), 0.2 * np.sin(grid.coords[0]))
        g = S.gradient().values[0]
        assert np.max(np.abs(g - (3 + 0.2 * np.cos(grid.coords[0])))) < 1e-13

    def test_shift_identity_and_round_trip(self, grid, rng):
        f = random_loop(grid, rng)
        zero = PhaseField.linear(grid, (0,))
        assert np.array_equal(phase_shift(f, zero, 1.0).harmonics, f.harmonics)
        S = PhaseField.linear(grid, (1,), 0.3 * np.cos(grid.coords[0]))
        rt = phase_shift(phase_shift(f, S, 2.0), S, -2.0)
        assert np.max(np.abs(rt.values() - f.values())) < 1e-12
        assert np.array_equal(theta_average(phase_shift(f, S, 2.0)).values, theta_average(f).values)

    def test_shift_single_harmonic(self):
        g = TorusGrid(1, (L,), (32,), 16)
        f = LoopField.from_function(g, lambda x, t: np.cos(t) + 0 * x)
        S = PhaseField.linear(g, (2,))
        out = phase_shift(f, S, 1.0).values()
        x = g.coords[0][:, None]
        assert np.max(np.abs(out - np.cos(g.theta + 2 * x))) < 1e-13

    def test_non_integer_shift_rejected(self, grid, rng):
        S = PhaseField.linear(grid, (0.5,))
        with pytest.raises(ValueError):
            phase_shift(random_loop(grid, rng), S, 1.0)
        phase_shift(random_loop(grid, rng), S, 2.0)


class TestGradS:
    def test_theta_independent(self, grid):
        x = grid.coords[0]
        f = LoopField.from_function(grid, lambda x, t: np.sin(x) + 0 * t)
        S = PhaseField.linear(grid, (2,))
        out = grad_S(f, S, 0.1).component(0).values()
        assert np.max(np.abs(out - np.cos(x)[:, None])) < 1e-13

    def test_pure_theta(self, grid):
        f = LoopField.from_function(grid, lambda x, t: np.sin(2 * t) + 0 * x)
        S = PhaseField.linear(grid, (3,))
        out = grad_S(f, S, 0.5).component(0).values()
        assert np.max(np.abs(out - (3 / 0.5) * 2 * np.cos(2 * grid.theta))) < 1e-12

    def test_chain_rule_oracle(self, rng):
        g = TorusGrid(1, (L,), (256,), 16)
        f = random_loop(g, rng)
        S = PhaseField.linear(g, (0.75,), random_smooth(g, rng, 0.1))
        eps = 0.25
        lhs = grad_S(f, S, eps).component(0).values()
        rhs = phase_shift(spectral_deriv(phase_shift(f, S, 1 / eps), 0), S, -1 / eps).values()
        assert np.max(np.abs(lhs - rhs)) < 1e-10 * np.max(np.abs(rhs))

    def test_mean_of_grad_S(self, grid, rng):
        f = random_loop(grid, rng)
        S = PhaseField.linear(grid, (1,), 0.2 * np.sin(grid.coords[0]))
        avg = theta_average(grad_S(f, S, 0.1)).values[0]
        assert np.max(np.abs(avg - spectral_deriv(theta_average(f), 0).values)) < 1e-12

    def test_eps_positive(self, grid, rng):
        with pytest.raises(ValueError):
            grad_S(random_loop(grid, rng), PhaseField.linear(grid, (1,)), 0.0)


class TestMisc:
    def test_dealias_removes_high_modes(self, grid):
        x = grid.coords[0]
        f = dealias(ScalarField(grid, np.cos(x) + np.cos(14 * x)))
        assert np.max(np.abs(f.values - np.cos(x))) < 1e-13

    def test_interpolate_band_limited(self, grid):
        x = grid.coords[0]
        f = np.sin(2 * x) + 0.5 * np.cos(5 * x)
        pts = np.array([0.1, 1.234, 5.9])
        out = interpolate(f, grid, [pts])
        assert np.max(np.abs(out - (np.sin(2 * pts) + 0.5 * np.cos(5 * pts)))) < 1e-13

    def test_vector_field_shape(self, grid):
        with pytest.raises(ValueError):
            VectorField(grid, np.zeros(32))
