"""Fields on a compactified polar grid of the plane.

Radial direction: r = L s / (1 - s) on a uniform cell-centred s grid, finite
differences in s with parity ghost nodes across the origin.  Angular
direction: Fourier.  Derivatives of everything the solver touches are carried
as polar 2-jets (value plus first and second partials in r and theta), so
closed-form pieces keep exact derivatives and numeric pieces share one
discrete calculus.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Union

import numpy as np


class FieldError(ValueError):
    """Invalid field data or an ill-posed field operation."""


class TailDivergenceError(FieldError):
    """An integrand decays too slowly for the quadrature to converge."""


class ZeroTailError(FieldError):
    """The field is numerically zero, so no decay rate can be fitted."""


# ---------------------------------------------------------------------------
# finite-difference machinery

def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at ``z`` from nodes ``x``.

    Returns an array of shape (len(x), m + 1).
    """
    x = np.asarray(x)
    n = len(x)
    c = np.zeros((n, m + 1), dtype=x.dtype)
    c1 = x.dtype.type(1)
    c4 = x[0] - z
    c[0, 0] = 1
    for i in range(1, n):
        mn = min(i, m)
        c2 = x.dtype.type(1)
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@lru_cache(maxsize=None)
def _radial_matrices(n_r: int, L: float, order: int, parity: int):
    """Dense d/dr and d2/dr2 matrices acting on one angular mode.

    Rows near the origin use stencils in r that include mirrored ghost nodes
    at -r_j carrying the mode parity, u_k(-r) = (-1)^k u_k(r).  Interior rows
    are centred in s; the last rows are one-sided.
    """
    h = 1.0 / n_r
    s = (np.arange(n_r) + 0.5) * h
    r = L * s / (1 - s)
    sp = (1 - s) ** 2 / L          # ds/dr
    spp = -2 * (1 - s) ** 3 / L**2  # d2s/dr2
    npts = order + 1
    half = npts // 2
    sign = 1.0 if parity == 0 else -1.0
    D1 = np.zeros((n_r, n_r))
    D2 = np.zeros((n_r, n_r))
    for i in range(n_r):
        if i >= half:
            lo = min(i - half, n_r - npts)
            idx = np.arange(lo, lo + npts)
            c = fd_weights(float(i), idx.astype(float), 2)
            D1[i, idx] = c[:, 1] / h * sp[i]
            D2[i, idx] = c[:, 2] / h**2 * sp[i] ** 2 + c[:, 1] / h * spp[i]
        else:
            idx = np.arange(0, i + half + 1)
            ghosts = np.arange(half - i)[::-1]
            x = np.concatenate([-r[ghosts], r[idx]])
            c = fd_weights(r[i], x, 2)
            ng = len(ghosts)
            D1[i, ghosts] += sign * c[:ng, 1]
            D2[i, ghosts] += sign * c[:ng, 2]
            D1[i, idx] += c[ng:, 1]
            D2[i, idx] += c[ng:, 2]
    D1.setflags(write=False)
    D2.setflags(write=False)
    return D1, D2


@lru_cache(maxsize=None)
def _radial_weights(n_r: int, L: float) -> np.ndarray:
    """Weights w_j with sum_j w_j g(r_j) ~ int_0^inf g(r) r dr.

    Midpoint rule in s, plus Euler-Maclaurin corrections at both ends of
    the s interval.  At s = 1 the corrections matter only for algebraically
    decaying g, for which the mapped integrand g r dr/ds stays smooth when
    the decay is r^-3 or faster with an integer power.
    """
    h = 1.0 / n_r
    s = (np.arange(n_r) + 0.5) * h
    r = L * s / (1 - s)
    drds = L / (1 - s) ** 2
    # A short stencil keeps every weight positive; the dropped h^6 term is
    # below roundoff for n_r >= 128.
    K = 6
    ew = fd_weights(0.0, s[:K], 3)
    corr = np.zeros(n_r)
    # B_{2k}(1/2) h^{2k} / (2k)! for k = 1, 2
    ee = fd_weights(1.0, s[-K:], 3)
    for p, coef in ((1, -1.0 / 24), (3, 7.0 / 5760)):
        corr[:K] += coef * h ** (p + 1) * ew[:, p]
        corr[-K:] -= coef * h ** (p + 1) * ee[:, p]
    w = (h + corr) * r * drds
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class PolarGrid:
    """Cell-centred compactified polar grid.

    Parameters
    ----------
    n_r : number of radial nodes
    n_theta : number of angular nodes (even, at least 8)
    L : compactification scale in r = L s / (1 - s)
    order : order of the radial finite differences (4 or 6)
    """

    n_r: int = 256
    n_theta: int = 64
    L: float = 4.0
    order: int = 6

    def __post_init__(self):
        if int(self.n_r) != self.n_r or self.n_r < 16:
            raise FieldError(f"n_r must be an integer >= 16, got {self.n_r}")
        if int(self.n_theta) != self.n_theta or self.n_theta < 8 or self.n_theta % 2:
            raise FieldError(f"n_theta must be an even integer >= 8, got {self.n_theta}")
        if not self.L > 0:
            raise FieldError(f"map scale L must be positive, got {self.L}")
        if self.order not in (4, 6):
            raise FieldError(f"radial order must be 4 or 6, got {self.order}")

    @cached_property
    def s(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) / self.n_r

    @cached_property
    def r(self) -> np.ndarray:
        return self.L * self.s / (1 - self.s)

    @cached_property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @cached_property
    def k(self) -> np.ndarray:
        """Signed angular wave numbers in FFT order."""
        return np.rint(np.fft.fftfreq(self.n_theta, 1.0 / self.n_theta)).astype(int)

    @cached_property
    def R(self) -> np.ndarray:
        """Radii broadcast against the angular axis, shape (n_r, 1)."""
        return self.r[:, None]

    @cached_property
    def T(self) -> np.ndarray:
        return self.theta[None, :]

    @cached_property
    def x1(self) -> np.ndarray:
        return self.R * np.cos(self.T)

    @cached_property
    def x2(self) -> np.ndarray:
        return self.R * np.sin(self.T)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def radial_matrices(self, parity: int):
        return _radial_matrices(self.n_r, float(self.L), self.order, parity % 2)

    @property
    def radial_weights(self) -> np.ndarray:
        return _radial_weights(self.n_r, float(self.L))

    @cached_property
    def weights(self) -> np.ndarray:
        """Area weights: sum(weights * f) ~ integral of f over the plane."""
        return self.radial_weights[:, None] * np.full((1, self.n_theta), 2 * np.pi / self.n_theta)

    def meta(self) -> dict:
        return {"n_r": self.n_r, "n_theta": self.n_theta, "L": self.L}


# ---------------------------------------------------------------------------
# fields

ArrayLike = Union[np.ndarray, float]


def _check_finite(grid: PolarGrid, values: np.ndarray, what: str = "field"):
    bad = ~np.isfinite(values)
    if bad.any():
        j, k = np.argwhere(bad)[0]
        raise FieldError(
            f"{what} is not finite at node (j={j}, k={k}), r={grid.r[j]:.6g}, theta={grid.theta[k]:.6g}"
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a real function at the grid nodes, shape (n_r, n_theta)."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            v = np.broadcast_to(v, self.grid.shape).copy()
        _check_finite(self.grid, v)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def modes(self) -> np.ndarray:
        """Complex Fourier coefficients per radius (numpy FFT ordering)."""
        return np.fft.fft(self.values, axis=1) / self.grid.n_theta

    @classmethod
    def from_modes(cls, grid: PolarGrid, modes: np.ndarray) -> "ScalarField":
        return cls(grid, np.fft.ifft(modes * grid.n_theta, axis=1).real)

    def jet(self) -> "Jet":
        return Jet.from_values(self.grid, self.values)

    def _other(self, other):
        if isinstance(other, ScalarField):
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class TensorField:
    """Symmetric traceless 2-tensor stored as (t11, t12)."""

    grid: PolarGrid
    t11: np.ndarray
    t12: np.ndarray

    def __post_init__(self):
        for name in ("t11", "t12"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != self.grid.shape:
                v = np.broadcast_to(v, self.grid.shape).copy()
            _check_finite(self.grid, v, name)
            object.__setattr__(self, name, v)

    @classmethod
    def zeros(cls, grid: PolarGrid) -> "TensorField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def from_complex(cls, grid: PolarGrid, kappa: np.ndarray) -> "TensorField":
        """Build from kappa = t11 - i t12."""
        return cls(grid, kappa.real, -kappa.imag)

    @property
    def kappa(self) -> np.ndarray:
        return self.t11 - 1j * self.t12

    @property
    def t22(self) -> np.ndarray:
        return -self.t11

    def contract(self, other: "TensorField") -> np.ndarray:
        """Pointwise K:L = K_ij L_ij."""
        return 2 * (self.t11 * other.t11 + self.t12 * other.t12)

    def norm_sq(self) -> np.ndarray:
        return self.contract(self)

    def __add__(self, other: "TensorField"):
        return TensorField(self.grid, self.t11 + other.t11, self.t12 + other.t12)

    def __sub__(self, other: "TensorField"):
        return TensorField(self.grid, self.t11 - other.t11, self.t12 - other.t12)

    def scale(self, a: ArrayLike) -> "TensorField":
        a = a.values if isinstance(a, ScalarField) else a
        return TensorField(self.grid, a * self.t11, a * self.t12)

    def max_abs(self) -> float:
        return float(max(np.abs(self.t11).max(), np.abs(self.t12).max()))


# ---------------------------------------------------------------------------
# one-dimensional jets and angular Fourier series

@dataclass(frozen=True, eq=False)
class Profile:
    """A function of one variable with its first two derivatives."""

    v: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def __add__(self, o):
        if isinstance(o, Profile):
            return Profile(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
        return Profile(self.v + o, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Profile(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o):
        if isinstance(o, Profile):
            return Profile(
                self.v * o.v,
                self.d1 * o.v + self.v * o.d1,
                self.d2 * o.v + 2 * self.d1 * o.d1 + self.v * o.d2,
            )
        return Profile(self.v * o, self.d1 * o, self.d2 * o)

    __rmul__ = __mul__


def radial_power(grid: PolarGrid, p: float) -> Profile:
    """r**p as a radial profile, shape (n_r, 1)."""
    r = grid.R
    return Profile(r**p, p * r ** (p - 1), p * (p - 1) * r ** (p - 2))


def radial_log(grid: PolarGrid) -> Profile:
    r = grid.R
    return Profile(np.log(r), 1 / r, -1 / r**2)


class Fourier:
    """Real trigonometric polynomial sum_k c_k e^{ik theta}, stored exactly."""

    def __init__(self, coef: dict[int, complex] | None = None):
        self.c = {int(k): complex(v) for k, v in (coef or {}).items() if v != 0}

    @classmethod
    def from_cos_sin(cls, cos=(), sin=()) -> "Fourier":
        """f = cos[0] + sum_k cos[k] cos(k theta) + sin[k] sin(k theta).

        ``sin[0]`` is ignored.
        """
        c: dict[int, complex] = {}
        for k, a in enumerate(cos):
            if k == 0:
                c[0] = c.get(0, 0) + a
            else:
                c[k] = c.get(k, 0) + a / 2
                c[-k] = c.get(-k, 0) + a / 2
        for k, b in enumerate(sin):
            if k == 0:
                continue
            c[k] = c.get(k, 0) - 0.5j * b
            c[-k] = c.get(-k, 0) + 0.5j * b
        return cls(c)

    @classmethod
    def cos(cls, k: int, phase: float = 0.0) -> "Fourier":
        """cos(k theta - phase)."""
        if k == 0:
            return cls({0: np.cos(phase)})
        e = np.exp(-1j * phase)
        return cls({k: e / 2, -k: np.conj(e) / 2})

    @classmethod
    def sin(cls, k: int, phase: float = 0.0) -> "Fourier":
        """sin(k theta - phase)."""
        if k == 0:
            return cls({0: -np.sin(phase)})
        e = np.exp(-1j * phase)
        return cls({k: e / 2j, -k: -np.conj(e) / 2j})

    @classmethod
    def const(cls, a: float) -> "Fourier":
        return cls({0: a})

    def cos_sin(self, kmax: int | None = None) -> tuple[list[float], list[float]]:
        K = self.kmax if kmax is None else kmax
        cos = [0.0] * (K + 1)
        sin = [0.0] * (K + 1)
        for k in range(K + 1):
            ck = self.c.get(k, 0)
            cm = self.c.get(-k, 0)
            if k == 0:
                cos[0] = float(ck.real)
            else:
                cos[k] = float((ck + cm).real)
                sin[k] = float((1j * (ck - cm)).real)
        return cos, sin

    @property
    def kmax(self) -> int:
        return max((abs(k) for k in self.c), default=0)

    def __add__(self, o):
        o = o if isinstance(o, Fourier) else Fourier.const(o)
        c = dict(self.c)
        for k, v in o.c.items():
            c[k] = c.get(k, 0) + v
        return Fourier(c)

    __radd__ = __add__

    def __neg__(self):
        return Fourier({k: -v for k, v in self.c.items()})

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, o):
        if not isinstance(o, Fourier):
            return Fourier({k: v * o for k, v in self.c.items()})
        c: dict[int, complex] = {}
        for k1, v1 in self.c.items():
            for k2, v2 in o.c.items():
                c[k1 + k2] = c.get(k1 + k2, 0) + v1 * v2
        return Fourier(c)

    __rmul__ = __mul__

    def deriv(self, n: int = 1) -> "Fourier":
        return Fourier({k: v * (1j * k) ** n for k, v in self.c.items()})

    def without(self, *ks: int) -> "Fourier":
        drop = {abs(k) for k in ks}
        return Fourier({k: v for k, v in self.c.items() if abs(k) not in drop})

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=complex)
        for k, v in self.c.items():
            out += v * np.exp(1j * k * theta)
        return out.real

    def profile(self, grid: PolarGrid) -> Profile:
        if self.kmax > grid.n_theta // 2 - 1:
            raise FieldError(
                f"angular function has modes up to {self.kmax}, grid resolves {grid.n_theta // 2 - 1}"
            )
        t = grid.T
        return Profile(self(t), self.deriv(1)(t), self.deriv(2)(t))

    def integral(self) -> float:
        """Integral over the circle."""
        return float(2 * np.pi * self.c.get(0, 0).real)

    def w12_norm(self) -> float:
        """W^{1,2}(S^1) norm, computed from the coefficients."""
        return float(np.sqrt(2 * np.pi * sum(abs(v) ** 2 * (1 + k * k) for k, v in self.c.items())))

    def __repr__(self):
        cos, sin = self.cos_sin()
        return f"Fourier(cos={cos}, sin={sin})"


# ---------------------------------------------------------------------------
# polar 2-jets

_PARTS = ("v", "r", "t", "rr", "rt", "tt")


def _radial_derivs(grid: PolarGrid, F: np.ndarray):
    """Radial derivatives of angular-mode coefficients F (n_r, n_theta)."""
    odd = (grid.k % 2) == 1
    D1e, D2e = grid.radial_matrices(0)
    D1o, D2o = grid.radial_matrices(1)
    Fr = np.empty_like(F)
    Frr = np.empty_like(F)
    Fr[:, ~odd] = D1e @ F[:, ~odd]
    Frr[:, ~odd] = D2e @ F[:, ~odd]
    Fr[:, odd] = D1o @ F[:, odd]
    Frr[:, odd] = D2o @ F[:, odd]
    return Fr, Frr


class Jet:
    """Value and partials (r, theta, rr, r theta, theta theta) at the nodes.

    Sums, products and exponentials follow the exact Leibniz and chain rules,
    so a jet assembled from closed forms and numeric parts differentiates
    consistently with the elliptic solvers.
    """

    __slots__ = ("grid",) + _PARTS

    def __init__(self, grid: PolarGrid, v, r, t, rr, rt, tt):
        self.grid = grid
        shp = grid.shape
        for name, a in zip(_PARTS, (v, r, t, rr, rt, tt)):
            a = np.asarray(a)
            if a.shape != shp:
                a = np.broadcast_to(a, shp)
            setattr(self, name, a)

    # constructors
    @classmethod
    def zero(cls, grid: PolarGrid) -> "Jet":
        z = np.zeros(grid.shape)
        return cls(grid, z, z, z, z, z, z)

    @classmethod
    def constant(cls, grid: PolarGrid, c: float) -> "Jet":
        z = np.zeros(grid.shape)
        return cls(grid, np.full(grid.shape, c), z, z, z, z, z)

    @classmethod
    def from_values(cls, grid: PolarGrid, values: np.ndarray) -> "Jet":
        """Jet of sampled values: radial FD per mode, angular derivatives spectral."""
        values = np.asarray(values)
        real = not np.iscomplexobj(values)
        F = np.fft.fft(values, axis=1)
        k = grid.k.astype(float)
        ik = 1j * k
        ik[np.abs(grid.k) == grid.n_theta // 2] = 0.0
        Fr, Frr = _radial_derivs(grid, F)
        back = lambda G: np.fft.ifft(G, axis=1)
        parts = [values, back(Fr), back(F * ik), back(Frr), back(Fr * ik), back(-F * k * k)]
        if real:
            parts = [parts[0]] + [p.real for p in parts[1:]]
        return cls(grid, *parts)

    @classmethod
    def separable(cls, grid: PolarGrid, R: Profile, T: Profile) -> "Jet":
        """Jet of R(r) T(theta)."""
        return cls(grid, R.v * T.v, R.d1 * T.v, R.v * T.d1, R.d2 * T.v, R.d1 * T.d1, R.v * T.d2)

    @classmethod
    def radial(cls, grid: PolarGrid, R: Profile) -> "Jet":
        one = np.ones((1, grid.n_theta))
        z = np.zeros((1, grid.n_theta))
        return cls.separable(grid, R, Profile(one, z, z))

    @classmethod
    def closed(cls, grid: PolarGrid, R: Profile, f: Fourier) -> "Jet":
        return cls.separable(grid, R, f.profile(grid))

    # algebra
    def _parts(self):
        return (self.v, self.r, self.t, self.rr, self.rt, self.tt)

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.grid, *(a + b for a, b in zip(self._parts(), o._parts())))
        return Jet(self.grid, self.v + o, self.r, self.t, self.rr, self.rt, self.tt)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.grid, *(-a for a in self._parts()))

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            a, b = self, o
            return Jet(
                self.grid,
                a.v * b.v,
                a.r * b.v + a.v * b.r,
                a.t * b.v + a.v * b.t,
                a.rr * b.v + 2 * a.r * b.r + a.v * b.rr,
                a.rt * b.v + a.r * b.t + a.t * b.r + a.v * b.rt,
                a.tt * b.v + 2 * a.t * b.t + a.v * b.tt,
            )
        return Jet(self.grid, *(a * o for a in self._parts()))

    __rmul__ = __mul__

    def exp(self) -> "Jet":
        e = np.exp(self.v)
        return Jet(
            self.grid,
            e,
            e * self.r,
            e * self.t,
            e * (self.rr + self.r**2),
            e * (self.rt + self.r * self.t),
            e * (self.tt + self.t**2),
        )

    def square(self) -> "Jet":
        return self * self

    @property
    def real(self) -> "Jet":
        return Jet(self.grid, *(np.real(a) for a in self._parts()))

    @property
    def imag(self) -> "Jet":
        return Jet(self.grid, *(np.imag(a) for a in self._parts()))

    # Cartesian calculus
    def grad(self):
        g = self.grid
        c, s = np.cos(g.T), np.sin(g.T)
        ir = 1 / g.R
        return c * self.r - s * ir * self.t, s * self.r + c * ir * self.t

    def hessian(self):
        g = self.grid
        c, s = np.cos(g.T), np.sin(g.T)
        ir = 1 / g.R
        a = ir * self.r + ir**2 * self.tt
        b = ir * self.rt - ir**2 * self.t
        d11 = c * c * self.rr + s * s * a - 2 * c * s * b
        d22 = s * s * self.rr + c * c * a + 2 * c * s * b
        d12 = c * s * (self.rr - a) + (c * c - s * s) * b
        return d11, d12, d22

    def lap(self):
        ir = 1 / self.grid.R
        return self.rr + ir * self.r + ir**2 * self.tt

    def field(self) -> ScalarField:
        return ScalarField(self.grid, np.real(self.v))


def tensor_divergence(t11: Jet, t12: Jet):
    """Row divergence of the traceless symmetric tensor with jets (t11, t12)."""
    a1, a2 = t11.grad()
    b1, b2 = t12.grad()
    return a1 + b2, b1 - a2


# ---------------------------------------------------------------------------
# grid-level operations

def discretize(fn, grid: PolarGrid) -> ScalarField:
    """Sample fn(r, theta) at every node."""
    vals = np.asarray(fn(grid.R, grid.T), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    _check_finite(grid, vals, "sampled function")
    return ScalarField(grid, vals)


def angular_profile(values: np.ndarray) -> np.ndarray:
    """Angular root-mean-square of a field at each radius."""
    return np.sqrt(np.mean(np.abs(values) ** 2, axis=1))


@dataclass(frozen=True)
class TailFit:
    slope: float
    r_lo: float
    r_hi: float
    resolved: bool  # False when the outer window underflows (super-polynomial decay)


def tail_fit(f: Union[ScalarField, np.ndarray], grid: PolarGrid | None = None,
             window: float = 0.25, floor: float = 1e-14) -> TailFit:
    """Least-squares decay exponent of the angular profile on the outer window."""
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f)
    prof = angular_profile(vals)
    top = prof.max()
    if not top > 1e-300:
        raise ZeroTailError("field is identically zero; no tail to fit")
    n = len(prof)
    alive = prof > floor * top
    j0 = int(np.floor((1 - window) * n))
    idx = np.arange(j0, n)
    resolved = bool(alive[idx].all())
    if not resolved:
        last = int(np.nonzero(alive)[0].max())
        lo = int(np.floor((1 - window) * (last + 1)))
        idx = np.arange(lo, last + 1)
        idx = idx[alive[idx]]
        if len(idx) < 3:
            raise ZeroTailError("too few resolved points in the tail window")
    x = np.log(grid.r[idx])
    y = np.log(prof[idx])
    slope = float(np.polyfit(x, y, 1)[0])
    return TailFit(slope, float(grid.r[idx[0]]), float(grid.r[idx[-1]]), resolved)


def tail_exponent(f: ScalarField, window: float = 0.25) -> float:
    """Fitted power-law exponent of |f| at large r (very negative if super-polynomial)."""
    return tail_fit(f, window=window).slope


_WEIGHT_DEG = {"1": 0, "x1": 1, "x2": 1}


def _check_tail(grid: PolarGrid, vals: np.ndarray, degree: float, what: str):
    try:
        fit = tail_fit(vals, grid)
    except ZeroTailError:
        return
    if fit.resolved and fit.slope > -(2 + degree) - 0.05:
        raise TailDivergenceError(
            f"{what}: tail exponent {fit.slope:.3f} is too shallow for convergence "
            f"(need < {-(2 + degree):.2f})"
        )


def integrate(f: Union[ScalarField, np.ndarray], weight: str = "1",
              grid: PolarGrid | None = None, check_tail: bool = True) -> float:
    """Integral of f times 1, x1 or x2 over the plane."""
    if weight not in _WEIGHT_DEG:
        raise FieldError(f"weight must be one of {sorted(_WEIGHT_DEG)}, got {weight!r}")
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f)
    if check_tail:
        _check_tail(grid, vals, _WEIGHT_DEG[weight], "integrate")
    w = grid.weights
    if weight == "x1":
        w = w * grid.x1
    elif weight == "x2":
        w = w * grid.x2
    return float(np.sum(w * vals).real) if not np.iscomplexobj(vals) else complex(np.sum(w * vals))


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    d1, d2 = f.jet().grad()
    return ScalarField(f.grid, d1), ScalarField(f.grid, d2)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.jet().lap())


def divergence(K: TensorField) -> tuple[ScalarField, ScalarField]:
    d1, d2 = tensor_divergence(Jet.from_values(K.grid, K.t11), Jet.from_values(K.grid, K.t12))
    return ScalarField(K.grid, d1), ScalarField(K.grid, d2)


def _as_jet(f) -> Jet:
    if isinstance(f, Jet):
        return f
    if isinstance(f, ScalarField):
        return f.jet()
    raise FieldError(f"expected ScalarField or Jet, got {type(f).__name__}")


def _weighted_terms(f, m: int, delta: float):
    jet = _as_jet(f)
    g = jet.grid
    w = 1 + g.R**2
    terms = [(0, np.real(jet.v))]
    if m >= 1:
        terms += [(1, np.real(d)) for d in jet.grad()]
    if m >= 2:
        terms += [(2, np.real(d)) for d in jet.hessian()]
    return g, [(w ** ((delta + b) / 2) * d) for b, d in terms]


def sobolev_norm(f, m: int, delta: float) -> float:
    """Discrete H^m_delta norm: sum over |beta| <= m of weighted L2 norms of D^beta f.

    Second derivatives enter once per multi-index (11, 12, 22).  The integral
    is truncated at the outer radius; see :func:`sobolev_norm_report`.
    """
    if m not in (0, 1, 2):
        raise FieldError(f"m must be 0, 1 or 2, got {m}")
    g, terms = _weighted_terms(f, m, delta)
    return float(sum(np.sqrt(np.sum(g.weights * t**2)) for t in terms))


def sobolev_norm_report(f, m: int, delta: float) -> dict:
    """Norm plus an estimate of the part of the integral beyond the grid."""
    g, terms = _weighted_terms(f, m, delta)
    dens = sum(t**2 for t in terms)
    norm = float(sum(np.sqrt(np.sum(g.weights * t**2)) for t in terms))
    total = float(np.sum(g.weights * dens))
    tail = 0.0
    try:
        fit = tail_fit(np.sqrt(dens), g)
        q = 2 * fit.slope + 1  # radial density r * |.|^2 ~ r^q
        if fit.resolved and total > 0:
            R = g.r_max
            edge = 2 * np.pi * R * np.mean(dens[-1])
            tail = float("inf") if q >= -1 else edge * R / (-(q + 1))
    except ZeroTailError:
        pass
    return {"norm": norm, "relative_tail": (tail / total) if total > 0 else 0.0}


# ---------------------------------------------------------------------------
# serialization

def write_field_csv(f: ScalarField, path: Union[str, Path]) -> None:
    """Write ``r,theta,value`` rows plus a JSON sidecar with the grid."""
    path = Path(path)
    g = f.grid
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "theta", "value"])
        for j in range(g.n_r):
            for k in range(g.n_theta):
                w.writerow([repr(float(g.r[j])), repr(float(g.theta[k])), repr(float(f.values[j, k]))])
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(g.meta()))


def read_field_csv(path: Union[str, Path], order: int = 6) -> ScalarField:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    g = PolarGrid(int(meta["n_r"]), int(meta["n_theta"]), float(meta["L"]), order)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["r", "theta", "value"]:
        raise FieldError(f"unexpected header {rows[0]}")
    vals = np.array([float(r[2]) for r in rows[1:]])
    if vals.size != g.n_r * g.n_theta:
        raise FieldError(f"expected {g.n_r * g.n_theta} rows, got {vals.size}")
    return ScalarField(g, vals.reshape(g.shape))
