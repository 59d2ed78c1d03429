"""Fast-slow structure of the acoustic wave-mean-flow example.

Slow variables are the theta-means ``(h_bar, p_bar, rho_bar, chi_bar)``
together with the combination ``lam = rho_hat + p_hat . K / (c kappa - p_bar . K / rho_bar)``
and the phase S. Fast variables are ``y = (alpha_hat, p_hat, chi_hat)``. The
leading fast vector field is affine in y, ``A(x)[y] + C(x)``; this module
implements ``A``, its closed-form inverse, the leading slaving functions and
a finite-difference probe of the invariance equation.

Notation used throughout: ``K = grad S``, ``kappa = |K|``, ``e = K/kappa``,
``U = p_bar/rho_bar`` and ``c`` the sound speed. All hatted fields are kept as
theta-harmonics, so every operation with theta-independent coefficients is
exact harmonic arithmetic and preserves zero means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ResonantDenominator, VanishingPhaseGradient
from .hamiltonian import IsothermalParams, require_positive
from .torus import (LoopField, PhaseField, TorusGrid, VectorLoopField,
                    antiderivative_harmonics, deriv_x, interpolate, to_harmonics)

DENOM_FLOOR = 1e-6


def _grad(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.stack([deriv_x(f, grid, i) for i in range(grid.dim)])


@dataclass(frozen=True, eq=False)
class SlowFields:
    """Slow block: mean fields, lam and S, plus the sound speed."""

    grid: TorusGrid
    rho_bar: np.ndarray
    p_bar: np.ndarray
    chi_bar: np.ndarray
    h_bar: np.ndarray
    S: PhaseField
    c_s: float = 1.0
    lam: LoopField | None = None

    def __post_init__(self):
        require_positive(self.rho_bar, "rho_bar")
        from .extended import grad_S_floor

        kappa = self.kappa
        if kappa.min() < grad_S_floor(self.grid):
            idx = np.unravel_index(np.argmin(kappa), kappa.shape)
            raise VanishingPhaseGradient("fast operator needs a nonvanishing wavevector",
                                         field="|grad S|", value=float(kappa.min()), location=idx)
        gap = self.c_s - self.eU
        if np.min(np.abs(gap)) < DENOM_FLOOR * self.c_s:
            idx = np.unravel_index(np.argmin(np.abs(gap)), gap.shape)
            raise ResonantDenominator("Doppler-shifted phase speed vanishes",
                                      field="c_s - e.U", value=float(np.min(np.abs(gap))),
                                      location=idx)

    @classmethod
    def from_mean(cls, mean, params: IsothermalParams, h_bar=None) -> "SlowFields":
        grid = mean.rho_bar.grid
        hb = np.zeros((grid.dim,) + grid.shape) if h_bar is None else np.asarray(h_bar)
        return cls(grid, mean.rho_bar.values, mean.p_bar.values, mean.chi_bar.values,
                   hb, mean.S, params.c_s)

    # derived coefficients; cached by hand because the dataclass is frozen
    def _cache(self, name, fn):
        d = self.__dict__.setdefault("_derived", {})
        if name not in d:
            d[name] = fn()
        return d[name]

    @property
    def K(self) -> np.ndarray:
        return self._cache("K", lambda: self.S.gradient().values)

    @property
    def kappa(self) -> np.ndarray:
        return self._cache("kappa", lambda: np.sqrt(np.sum(self.K ** 2, axis=0)))

    @property
    def e(self) -> np.ndarray:
        return self._cache("e", lambda: self.K / self.kappa)

    @property
    def U(self) -> np.ndarray:
        return self._cache("U", lambda: self.p_bar / self.rho_bar)

    @property
    def eU(self) -> np.ndarray:
        return self._cache("eU", lambda: np.sum(self.e * self.U, axis=0))

    @property
    def grad_chi(self) -> np.ndarray:
        return self._cache("gchi", lambda: _grad(self.chi_bar, self.grid))

    @property
    def G(self) -> np.ndarray:
        """Coefficient vector of p_hat/rho_bar in the chi_hat equation."""
        def make():
            U, gc, c = self.U, self.grad_chi, self.c_s
            num = np.sum(U * gc, axis=0) + np.sum(U * U, axis=0) + c * c
            return U + gc + (num / (c - self.eU)) * self.e
        return self._cache("G", make)


@dataclass(frozen=True, eq=False)
class FastFields:
    alpha: VectorLoopField
    p: VectorLoopField
    chi: LoopField

    def arrays(self) -> tuple:
        return (self.alpha.harmonics, self.p.harmonics, self.chi.harmonics)

    @classmethod
    def from_arrays(cls, grid, a, p, chi) -> "FastFields":
        return cls(VectorLoopField(grid, a), VectorLoopField(grid, p), LoopField(grid, chi))

    @classmethod
    def zeros(cls, grid) -> "FastFields":
        v = np.zeros((grid.dim,) + grid.shape + (grid.n_harm,), dtype=complex)
        return cls.from_arrays(grid, v, v, v[0])

    def combine(self, a: float, other: "FastFields", b: float) -> "FastFields":
        arrs = [a * x + b * y for x, y in zip(self.arrays(), other.arrays())]
        return FastFields.from_arrays(self.alpha.grid, *arrs)

    def norm(self) -> float:
        """RMS over the (x, theta) collocation grid of all components."""
        tot = 0.0
        count = 0
        for f in (self.alpha, self.p, self.chi):
            v = f.values()
            tot += float(np.sum(v * v))
            count += v.size
        return np.sqrt(tot / count)


@dataclass(frozen=True, eq=False)
class FastSlowSplit:
    slow: SlowFields
    fast: FastFields
    rho_hat: LoopField
    eps: float
    extras: dict = field(default_factory=dict)


# --- coefficient algebra ----------------------------------------------------


def _col(a: np.ndarray) -> np.ndarray:
    """Spatial coefficient -> broadcastable against harmonic arrays."""
    return a[..., None]


def _dot(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.sum(_col(a) * h, axis=0)


def _T(slow: SlowFields, v: np.ndarray) -> np.ndarray:
    """T . v with T = (2 I - e e + P_perp U (x) e / (c - e.U)) / 2."""
    e, U, c = slow.e, slow.U, slow.c_s
    PU = U - e * slow.eU
    ev = _dot(e, v)
    return 0.5 * (2 * v - _col(e) * ev + _col(PU / (c - slow.eU)) * ev)


def _B(slow: SlowFields, v: np.ndarray) -> np.ndarray:
    """B . v with B = I + U (x) e / (c - e.U)."""
    return v + _col(slow.U / (slow.c_s - slow.eU)) * _dot(slow.e, v)


def apply_A(slow: SlowFields, y: FastFields) -> FastFields:
    """Linear part of the leading fast vector field."""
    grid = slow.grid
    n = 1j * grid.harmonic_index
    c, kap, e, rb = slow.c_s, slow.kappa, slow.e, slow.rho_bar
    a_h, p_h, chi_h = y.arrays()
    ck = _col(c * kap)

    A_a = ck * n * a_h - _B(slow, p_h) / _col(rb)
    q = n * p_h
    eq = _dot(e, q)
    PU = slow.U - e * slow.eU
    A_p = ck * (q + _col(e) * eq) - _col(PU * kap / (1 - slow.eU / c)) * eq
    A_chi = ck * n * chi_h - _dot(slow.G, p_h) / _col(rb)
    return FastFields.from_arrays(grid, A_a, A_p, A_chi)


def invert_A(slow: SlowFields, dy: FastFields) -> FastFields:
    """Closed-form solution of A[y] = dy for zero-mean dy."""
    grid = slow.grid
    ck = _col(slow.c_s * slow.kappa)
    d_a, d_p, d_chi = dy.arrays()
    I = antiderivative_harmonics
    p = _T(slow, I(d_p)) / ck
    TI2 = _T(slow, I(I(d_p / _col(slow.rho_bar)))) / ck ** 2
    alpha = I(d_a) / ck + _B(slow, TI2)
    chi = I(d_chi) / ck + _dot(slow.G, TI2)
    return FastFields.from_arrays(grid, alpha, p, chi)


def slaving_leading(slow: SlowFields, rho_hat: LoopField) -> FastFields:
    """Leading slaving functions (alpha_hat, p_hat, chi_hat) given rho_hat."""
    grid = slow.grid
    r = rho_hat.harmonics
    Ir = antiderivative_harmonics(r / _col(slow.rho_bar))
    kap = slow.kappa
    alpha = _col(slow.e / kap) * Ir
    p = _col(slow.U + slow.c_s * slow.e) * r
    coef = (np.sum(slow.e * slow.grad_chi, axis=0) + slow.eU - slow.c_s) / kap
    chi = _col(coef) * Ir
    return FastFields.from_arrays(grid, alpha, p, chi)


def lambda_hat(slow: SlowFields, rho_hat: LoopField, p_hat: VectorLoopField) -> LoopField:
    denom = slow.kappa * (slow.c_s - slow.eU)
    return LoopField(slow.grid, rho_hat.harmonics + _dot(slow.K, p_hat.harmonics) / _col(denom))


def rho_hat_from_lambda(slow: SlowFields, lam: LoopField) -> LoopField:
    """Invert lam for rho_hat on the slaved momentum branch."""
    return LoopField(slow.grid, lam.harmonics * _col((slow.c_s - slow.eU) / (2 * slow.c_s)))


def eigen_residual(slow: SlowFields, rho_hat: LoopField) -> tuple:
    """Residuals of the leading fluctuation equations with slaved p_hat and eikonal d_t S.

    Returns the max-abs residual of the continuity and momentum relations.
    """
    n = 1j * slow.grid.harmonic_index
    K, U, c = slow.K, slow.U, slow.c_s
    UK = np.sum(U * K, axis=0)
    dtS = -UK - c * slow.kappa
    p_hat = slaving_leading(slow, rho_hat).p.harmonics
    dr = n * rho_hat.harmonics
    q = n * p_hat
    r_cont = _col(dtS) * dr + _dot(K, q)
    lhs = _col(dtS + UK) * q + _col(U) * _dot(K, q)
    rhs = _col(UK * U - c * c * K) * dr
    r_mom = lhs - rhs
    return float(np.max(np.abs(r_cont))), float(np.max(np.abs(r_mom)))


# --- extraction from an extended state -------------------------------------


def _glm_alpha(D: np.ndarray, grid: TorusGrid, eps: float, d_bar0: np.ndarray,
               tol: float = 1e-14, max_iter: int = 200):
    """Solve x + D = y + d_bar(y), y = x + eps^2 alpha, with zero theta-mean alpha."""
    dim = grid.dim
    xs = [c[..., None] for c in grid.coords]
    d_bar = np.array(d_bar0, dtype=float)
    e2 = eps * eps
    y = [xs[i] + D[i] for i in range(dim)]
    for _ in range(max_iter):
        if np.any(d_bar):
            y = [xs[i] + D[i] - interpolate(d_bar[i], grid, y) for i in range(dim)]
        else:
            y = [xs[i] + D[i] for i in range(dim)]
        alpha = np.stack([(y[i] - xs[i]) / e2 for i in range(dim)])
        m = alpha.mean(axis=-1)
        scale = max(1.0, float(np.max(np.abs(D))) / e2)
        if np.max(np.abs(m)) <= tol * scale:
            break
        d_bar = d_bar + e2 * m
    return alpha, d_bar


def _fluct(h: np.ndarray) -> np.ndarray:
    out = np.array(h)
    out[..., 0] = 0.0
    return out


def split_state(ext, params: IsothermalParams | None = None) -> FastSlowSplit:
    """Means, scaled fluctuations, GLM displacement and lam of an extended state."""
    params = IsothermalParams() if params is None else params
    grid = ext.grid
    eps = ext.eps
    rb = ext.rho.harmonics[..., 0].real
    pb = ext.p.harmonics[..., 0].real
    cb = ext.chi.harmonics[..., 0].real
    rho_hat = LoopField(grid, _fluct(ext.rho.harmonics) / eps)
    p_h = _fluct(ext.p.harmonics) / eps
    chi_h = _fluct(ext.chi.harmonics) / eps ** 2
    D = ext.h.values()
    alpha, d_bar = _glm_alpha(D, grid, eps, ext.h.harmonics[..., 0].real)
    alpha_h = to_harmonics(alpha)
    alpha_h[..., 0] = 0.0
    slow = SlowFields(grid, rb, pb, cb, d_bar, ext.S, params.c_s)
    fast = FastFields.from_arrays(grid, alpha_h, p_h, chi_h)
    lam = lambda_hat(slow, rho_hat, fast.p)
    slow = SlowFields(grid, rb, pb, cb, d_bar, ext.S, params.c_s, lam)
    return FastSlowSplit(slow, fast, rho_hat, eps)


def slaved_fast(split: FastSlowSplit) -> FastFields:
    """y*(x): leading slaving functions evaluated at the slow point of ``split``."""
    rho_hat = rho_hat_from_lambda(split.slow, split.slow.lam)
    return slaving_leading(split.slow, rho_hat)


def invariance_residual(ext, H, closure, fd_eps: float | None = None,
                        params: IsothermalParams | None = None) -> float:
    """RMS of eps * (d/dt y*(x) - d/dt y) by central differences along the flow.

    On the leading-order slow manifold the result is O(eps); off the manifold
    the actual fast rate is O(1/eps) and the residual becomes O(1).
    """
    from .extended import ExtendedState, rhs_extended

    eps = ext.eps
    delta = 1e-3 * eps if fd_eps is None else fd_eps
    rate = rhs_extended(ext, H, closure)

    def moved(sign):
        arrs = tuple(a + sign * delta * b for a, b in zip(ext.arrays(), rate.arrays()))
        return ExtendedState.from_arrays(ext.grid, arrs[:4] + (np.real(arrs[4]),),
                                         ext.S.winding, eps, ext.t + sign * delta)

    sp, sm = split_state(moved(+1), params), split_state(moved(-1), params)
    dy_star = slaved_fast(sp).combine(1.0, slaved_fast(sm), -1.0)
    dy = sp.fast.combine(1.0, sm.fast, -1.0)
    res = dy_star.combine(eps / (2 * delta), dy, -eps / (2 * delta))
    return res.norm()
