"""Field algebra on the periodic domain Q = (S^1)^d and on Q x S^1.

Spatial fields are stored as collocation samples. Loop fields (functions of
``(x, theta)``) keep the spatial axes as collocation samples and store the
phase-angle dependence as normalised rfft harmonics, so that

    f(x, theta) = sum_n c_n(x) exp(i n theta),   n = -N/2 .. N/2 - 1,

with ``c_{-n} = conj(c_n)``. Only ``n >= 0`` is stored. Averaging, the
zero-mean antiderivative and phase shifts are then exact harmonic arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MeanNotZero

TOL_MEAN = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on (S^1)^d plus a phase-angle circle."""

    dim: int
    lengths: tuple
    n_x: tuple
    n_theta: int = 16

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        n_x = tuple(int(v) for v in np.atleast_1d(self.n_x))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n_x", n_x)
        object.__setattr__(self, "n_theta", int(self.n_theta))
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(lengths) != self.dim or len(n_x) != self.dim:
            raise ValueError("lengths and n_x need one entry per axis")
        if any(v <= 0 for v in lengths):
            raise ValueError("domain lengths must be strictly positive")
        for n in n_x + (self.n_theta,):
            if n < 8 or n % 2:
                raise ValueError(f"sample counts must be even and >= 8, got {n}")

    @property
    def shape(self) -> tuple:
        return self.n_x

    @property
    def n_harm(self) -> int:
        return self.n_theta // 2 + 1

    @cached_property
    def dx(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.n_x))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @cached_property
    def coords(self) -> tuple:
        axes = [np.arange(n) * L / n for L, n in zip(self.lengths, self.n_x)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def harmonic_index(self) -> np.ndarray:
        return np.arange(self.n_harm)

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers along ``axis`` in full-fft ordering (Nyquist -> 0)."""
        n = self.n_x[axis]
        k = 2 * np.pi * np.fft.fftfreq(n, d=self.lengths[axis] / n)
        k[n // 2] = 0.0
        return k

    @cached_property
    def x_mask(self) -> np.ndarray:
        """Boolean 2/3-rule mask on the full-fft spectral layout."""
        masks = []
        for n in self.n_x:
            m = np.abs(np.fft.fftfreq(n) * n) < n / 3
            masks.append(m)
        if self.dim == 1:
            return masks[0]
        return np.logical_and.outer(masks[0], masks[1])

    @cached_property
    def theta_mask(self) -> np.ndarray:
        return self.harmonic_index < self.n_theta / 3

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Spectral (trapezoid) quadrature over the trailing spatial axes."""
        axes = tuple(range(-self.dim, 0))
        return np.sum(values, axis=axes) * self.cell_volume

    def volume(self) -> float:
        return float(np.prod(self.lengths))


# --- raw array kernels -----------------------------------------------------
# x-axes of an array start at position ``lead``; loop-field harmonic arrays
# carry one extra trailing theta axis.


def deriv_x(arr: np.ndarray, grid: TorusGrid, axis: int, lead: int = 0) -> np.ndarray:
    """Fourier derivative of ``arr`` along spatial ``axis``."""
    ax = lead + axis
    shape = [1] * arr.ndim
    shape[ax] = grid.n_x[axis]
    k = grid.wavenumbers(axis).reshape(shape)
    if np.iscomplexobj(arr):
        return np.fft.ifft(1j * k * np.fft.fft(arr, axis=ax), axis=ax)
    return np.fft.ifft(1j * k * np.fft.fft(arr, axis=ax), axis=ax).real


def dealias_x(arr: np.ndarray, grid: TorusGrid, lead: int = 0) -> np.ndarray:
    axes = tuple(range(lead, lead + grid.dim))
    mask = grid.x_mask.reshape(grid.x_mask.shape + (1,) * (arr.ndim - lead - grid.dim))
    spec = np.fft.fftn(arr, axes=axes) * mask
    out = np.fft.ifftn(spec, axes=axes)
    return out if np.iscomplexobj(arr) else out.real


def to_harmonics(values: np.ndarray) -> np.ndarray:
    """Collocation samples along the last axis -> normalised rfft harmonics."""
    n = values.shape[-1]
    h = np.fft.rfft(values, axis=-1) / n
    h[..., -1] = 0.0
    return h


def to_collocation(harm: np.ndarray, n_theta: int) -> np.ndarray:
    return np.fft.irfft(harm * n_theta, n=n_theta, axis=-1)


def evaluate_harmonics(harm: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Evaluate harmonic arrays at a per-point angle ``theta`` (broadcast over x)."""
    n = np.arange(harm.shape[-1])
    weights = np.where(n == 0, 1.0, 2.0)
    phase = np.exp(1j * n * np.asarray(theta)[..., None])
    return np.sum(weights * (harm * phase).real, axis=-1)


# --- field types -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(arr))

    def integral(self) -> float:
        return float(self.grid.integrate(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(f"expected shape {(self.grid.dim,) + self.grid.shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(arr))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])


@dataclass(frozen=True, eq=False)
class LoopField:
    """Scalar field on Q x S^1 held as theta-harmonics at each spatial point."""

    grid: TorusGrid
    harmonics: np.ndarray

    _lead = 0

    def __post_init__(self):
        h = np.array(self.harmonics, dtype=complex)
        expect = self._lead_shape() + self.grid.shape + (self.grid.n_harm,)
        if h.shape != expect:
            raise ValueError(f"expected harmonic shape {expect}, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("field contains non-finite values")
        h[..., 0] = h[..., 0].real
        h[..., -1] = 0.0
        object.__setattr__(self, "harmonics", _frozen(h))

    def _lead_shape(self) -> tuple:
        return ()

    @classmethod
    def from_values(cls, grid: TorusGrid, values) -> "LoopField":
        """Build from collocation samples with theta innermost."""
        return cls(grid, to_harmonics(np.asarray(values, dtype=float)))

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "LoopField":
        """Sample ``fn(*coords, theta)`` on the (x, theta) grid."""
        xs = [c[..., None] for c in grid.coords]
        th = grid.theta.reshape((1,) * grid.dim + (-1,))
        vals = np.broadcast_to(fn(*xs, th), grid.shape + (grid.n_theta,))
        return cls.from_values(grid, vals)

    @classmethod
    def constant_in_theta(cls, field: ScalarField) -> "LoopField":
        h = np.zeros(field.grid.shape + (field.grid.n_harm,), dtype=complex)
        h[..., 0] = field.values
        return cls(field.grid, h)

    def values(self) -> np.ndarray:
        return to_collocation(self.harmonics, self.grid.n_theta)

    def at_theta(self, theta) -> np.ndarray:
        return evaluate_harmonics(self.harmonics, theta)

    def __add__(self, other: "LoopField") -> "LoopField":
        return type(self)(self.grid, self.harmonics + other.harmonics)

    def __sub__(self, other: "LoopField") -> "LoopField":
        return type(self)(self.grid, self.harmonics - other.harmonics)

    def scaled(self, a: float) -> "LoopField":
        return type(self)(self.grid, a * self.harmonics)


@dataclass(frozen=True, eq=False)
class VectorLoopField(LoopField):
    """Vector field on Q x S^1; harmonics carry a leading component axis."""

    _lead = 1

    def _lead_shape(self) -> tuple:
        return (self.grid.dim,)

    @classmethod
    def from_values(cls, grid: TorusGrid, values) -> "VectorLoopField":
        return cls(grid, to_harmonics(np.asarray(values, dtype=float)))

    @classmethod
    def from_components(cls, comps) -> "VectorLoopField":
        grid = comps[0].grid
        return cls(grid, np.stack([c.harmonics for c in comps]))

    def component(self, i: int) -> LoopField:
        return LoopField(self.grid, self.harmonics[i])


@dataclass(frozen=True, eq=False)
class PhaseField:
    """S^1-valued phase S(x) = sum_i 2 pi w_i x_i / L_i + periodic part.

    The winding ``w`` is kept apart from the periodic part so that grad S never
    requires differentiating a sawtooth. Windings are real numbers: a phase
    that is only ever used after scaling by ``1/eps`` needs ``w/eps`` (not
    ``w``) to be an integer, and :func:`phase_shift` checks exactly that.
    """

    grid: TorusGrid
    winding: tuple
    periodic_part: ScalarField

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(self.winding))
        if len(w) != self.grid.dim:
            raise ValueError("one winding number per axis")
        object.__setattr__(self, "winding", w)

    @classmethod
    def linear(cls, grid: TorusGrid, winding, periodic=None) -> "PhaseField":
        vals = np.zeros(grid.shape) if periodic is None else periodic
        return cls(grid, winding, ScalarField(grid, vals))

    @property
    def winding_gradient(self) -> np.ndarray:
        return np.array([2 * np.pi * w / L for w, L in zip(self.winding, self.grid.lengths)])

    def values(self) -> np.ndarray:
        lin = sum(g * x for g, x in zip(self.winding_gradient, self.grid.coords))
        return lin + self.periodic_part.values

    def gradient(self) -> VectorField:
        g = np.stack([
            self.winding_gradient[i] + deriv_x(self.periodic_part.values, self.grid, i)
            for i in range(self.grid.dim)
        ])
        return VectorField(self.grid, g)

    def grad_norm(self) -> ScalarField:
        return ScalarField(self.grid, np.sqrt(np.sum(self.gradient().values ** 2, axis=0)))

    def with_periodic(self, values: np.ndarray) -> "PhaseField":
        return PhaseField(self.grid, self.winding, ScalarField(self.grid, values))

    def shifted(self, other: "PhaseField") -> "PhaseField":
        """Pointwise sum S + psi (windings add)."""
        w = tuple(a + b for a, b in zip(self.winding, other.winding))
        return PhaseField(self.grid, w, ScalarField(
            self.grid, self.periodic_part.values + other.periodic_part.values))


# --- public operations -----------------------------------------------------


def spectral_deriv(f, axis: int):
    """Fourier derivative along spatial ``axis`` for any field type."""
    grid = f.grid
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for dim={grid.dim}")
    if isinstance(f, LoopField):
        return type(f)(grid, deriv_x(f.harmonics, grid, axis, lead=f._lead))
    if isinstance(f, VectorField):
        return VectorField(grid, deriv_x(f.values, grid, axis, lead=1))
    return ScalarField(grid, deriv_x(f.values, grid, axis))


def theta_average(f: LoopField):
    if isinstance(f, VectorLoopField):
        return VectorField(f.grid, f.harmonics[..., 0].real)
    return ScalarField(f.grid, f.harmonics[..., 0].real)


def theta_derivative(f: LoopField) -> LoopField:
    n = f.grid.harmonic_index
    return type(f)(f.grid, 1j * n * f.harmonics)


def antiderivative_harmonics(h: np.ndarray, tol_mean: float = TOL_MEAN) -> np.ndarray:
    mean = np.abs(h[..., 0])
    if mean.size and mean.max() > tol_mean:
        loc = np.unravel_index(np.argmax(mean), mean.shape)
        raise MeanNotZero("theta-antiderivative needs a zero-mean argument",
                          field="theta_average", value=float(mean.max()), location=loc)
    n = np.arange(h.shape[-1])
    out = np.zeros_like(h)
    out[..., 1:] = h[..., 1:] / (1j * n[1:])
    return out


def theta_antiderivative(f: LoopField, tol_mean: float = TOL_MEAN) -> LoopField:
    """Unique zero-mean antiderivative in theta (harmonic n -> c_n / (i n))."""
    return type(f)(f.grid, antiderivative_harmonics(f.harmonics, tol_mean))


def _check_shift_scale(S: PhaseField, scale: float):
    for w in S.winding:
        m = scale * w
        if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
            raise ValueError(
                f"scale*winding = {m} is not an integer; the shifted field would be multivalued")


def phase_shift(f: LoopField, S: PhaseField, scale: float) -> LoopField:
    """Return f(x, theta + scale*S(x)); harmonic n gains exp(i n scale S(x))."""
    _check_shift_scale(S, scale)
    n = f.grid.harmonic_index
    phase = np.exp(1j * n * (scale * S.values())[..., None])
    return type(f)(f.grid, f.harmonics * phase)


def grad_S_harmonics(h: np.ndarray, grid: TorusGrid, gradS: np.ndarray, eps: float,
                     lead: int = 0) -> np.ndarray:
    """Components of grad f + (grad S / eps) d_theta f for a harmonic array."""
    n = grid.harmonic_index
    dth = 1j * n * h
    comps = []
    for i in range(grid.dim):
        g = gradS[i].reshape(gradS[i].shape + (1,))
        comps.append(deriv_x(h, grid, i, lead=lead) + (g / eps) * dth)
    return np.stack(comps)


def grad_S(f: LoopField, S: PhaseField, eps: float) -> VectorLoopField:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(f, VectorLoopField):
        raise TypeError("grad_S acts on scalar loop fields")
    h = grad_S_harmonics(f.harmonics, f.grid, S.gradient().values, eps)
    return VectorLoopField(f.grid, h)


def dealias(f):
    """Apply the 2/3 rule in x (and in theta for loop fields)."""
    grid = f.grid
    if isinstance(f, LoopField):
        h = dealias_x(f.harmonics, grid, lead=f._lead) * grid.theta_mask
        return type(f)(grid, h)
    if isinstance(f, VectorField):
        return VectorField(grid, dealias_x(f.values, grid, lead=1))
    return ScalarField(grid, dealias_x(f.values, grid))


def interpolate(values: np.ndarray, grid: TorusGrid, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at arbitrary points.

    ``points`` is a sequence of ``dim`` arrays of identical shape. Direct
    non-uniform summation; cost is (#points) x (#modes).
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    out_shape = pts[0].shape
    coef = np.fft.fftn(values) / np.prod(grid.n_x)
    ks = [2 * np.pi * np.fft.fftfreq(n, d=L / n) for L, n in zip(grid.lengths, grid.n_x)]
    if grid.dim == 1:
        E = np.exp(1j * np.outer(pts[0].ravel(), ks[0]))
        res = E @ coef
    else:
        E1 = np.exp(1j * np.outer(pts[0].ravel(), ks[0]))
        E2 = np.exp(1j * np.outer(pts[1].ravel(), ks[1]))
        res = np.sum((E1 @ coef) * E2, axis=1)
    return res.real.reshape(out_shape)
