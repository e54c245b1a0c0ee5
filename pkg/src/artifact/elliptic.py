"""Laplace-type solvers on the plane with explicit far-field expansions.

Every solve is split into a closed-form part, built from the smooth profiles
P0 = log(1 + r^2) / 2 and P1 = r / (1 + r^2) whose Laplacians are known
exactly, and a numeric part whose source has vanishing low moments.  The
numeric part is found mode by mode from banded two-point problems; it never
contains ln r or 1/r, which keeps the discrete error small at the outer edge.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .ansatz import TensorJet, chi_log, chi_over_power
from .field_core import (
    FieldError,
    Fourier,
    Jet,
    PolarGrid,
    Profile,
    ScalarField,
    TensorField,
    integrate,
)

MOMENT_TOL = 1e-8


class OrthogonalityError(ValueError):
    """A source moment that must vanish does not."""


class UnresolvedSpectrumError(FieldError):
    """The source has angular content the solver cannot represent."""


# ---------------------------------------------------------------------------
# smooth far-field profiles

def _q(grid: PolarGrid) -> Profile:
    r = grid.R
    d = 1 + r**2
    return Profile(1 / d, -2 * r / d**2, (6 * r**2 - 2) / d**3)


def p0_profile(grid: PolarGrid) -> Profile:
    """log(1 + r^2) / 2; its Laplacian 2 / (1 + r^2)^2 integrates to 2 pi."""
    r = grid.R
    d = 1 + r**2
    return Profile(0.5 * np.log1p(r**2), r / d, (1 - r**2) / d**2)


def p1_profile(grid: PolarGrid) -> Profile:
    """r / (1 + r^2); on mode 1 it matches chi / r at infinity."""
    r = grid.R
    return Profile(r, np.ones_like(r), np.zeros_like(r)) * _q(grid)


def lap_p0(grid: PolarGrid) -> np.ndarray:
    return 2 / (1 + grid.R**2) ** 2


def lap_p1_mode1(grid: PolarGrid) -> np.ndarray:
    """Radial factor of the Laplacian of P1(r) cos(theta)."""
    r = grid.R
    return -8 * r / (1 + r**2) ** 3


# ---------------------------------------------------------------------------
# mode operators

def _mode_matrix(grid: PolarGrid, k: int, kind: str = "std") -> np.ndarray:
    """Mode-k Laplacian u'' + u'/r - k^2 u / r^2 with the outer boundary row."""
    if kind != "std":
        raise ValueError(kind)
    D1, D2 = grid.radial_matrices(k % 2)
    ir = 1 / grid.r
    A = np.array(D2 + ir[:, None] * D1 - np.diag(k * k * ir**2))
    # outer row: decay condition; mode 0 is pinned instead
    A[-1, :] = 0.0
    if k == 0:
        A[-1, -1] = 1.0
    else:
        A[-1, :] = D1[-1, :]
        A[-1, -1] += abs(k) / grid.r[-1]
    return A


@lru_cache(maxsize=512)
def _mode_lu(grid: PolarGrid, k: int, kind: str):
    return lu_factor(_mode_matrix(grid, k, kind))


def _solve_modes(grid: PolarGrid, G: np.ndarray, kind: str, kmax: int,
                 bc: dict[int, complex] | None = None) -> np.ndarray:
    """Solve mode by mode; G holds FFT coefficients of the source (complex).

    ``bc`` maps a wave number to the value of its outer boundary row.
    """
    bc = bc or {}
    U = np.zeros_like(G, dtype=complex)
    for col, k in enumerate(grid.k):
        if abs(k) > kmax:
            continue
        rhs = G[:, col].astype(complex)
        rhs[-1] = bc.get(int(k), 0.0)
        if not np.any(rhs):
            continue
        U[:, col] = lu_solve(_mode_lu(grid, int(k), kind), rhs)
    return U


def _check_spectrum(grid: PolarGrid, G: np.ndarray, kmax: int, what: str):
    total = np.abs(G).max()
    if total == 0:
        return
    lost = np.abs(G[:, np.abs(grid.k) > kmax]).max() if (np.abs(grid.k) > kmax).any() else 0.0
    if lost > 1e-8 * total:
        raise UnresolvedSpectrumError(
            f"{what}: angular modes above {kmax} carry {lost / total:.2e} of the source; refine n_theta"
        )


def _robin(grid: PolarGrid, prof: Profile, k: int) -> float:
    """Outer boundary row (u' + |k| u / r, or u for k = 0) applied to a profile."""
    j = -1
    v = float(np.ravel(prof.v)[j])
    if k == 0:
        return v
    return float(np.ravel(prof.d1)[j]) + abs(k) * v / grid.r[j]


def _weighted_l2(grid: PolarGrid, vals: np.ndarray, delta: float) -> float:
    w = (1 + grid.R**2) ** delta
    return float(np.sqrt(np.sum(grid.weights[:-1] * w[:-1] * np.abs(vals[:-1]) ** 2)))


def _l1(grid: PolarGrid, vals: np.ndarray) -> float:
    return float(np.sum(grid.weights * np.abs(vals)))


# ---------------------------------------------------------------------------
# scalar solves

@dataclass(frozen=True)
class SolveReport:
    residual: float         # relative weighted L2 residual, outer node excluded
    moments: tuple = ()
    estimate_constant: float | None = None


def mcowen_solve(f: ScalarField, delta: float = -0.5, tol: float = MOMENT_TOL):
    """Decaying solution of Laplace(u) = f for a source with vanishing moments.

    Returns ``(u, report)``.  Raises :class:`OrthogonalityError` naming the
    offending moment if int f, int f x1 or int f x2 is above ``tol`` times
    the L1 norm of f.
    """
    g = f.grid
    scale = _l1(g, f.values)
    if scale == 0:
        return ScalarField.zeros(g), SolveReport(0.0, (0.0, 0.0, 0.0))
    moms = tuple(integrate(f, w, check_tail=False) for w in ("1", "x1", "x2"))
    for name, m in zip(("int f", "int f x1", "int f x2"), moms):
        if abs(m) > tol * scale:
            raise OrthogonalityError(f"{name} = {m:.3e} exceeds {tol:.1e} * ||f||_1 = {tol * scale:.3e}")
    kmax = g.n_theta // 2 - 1
    G = np.fft.fft(f.values, axis=1)
    _check_spectrum(g, G, kmax, "mcowen_solve")
    u = np.fft.ifft(_solve_modes(g, G, "std", kmax), axis=1).real
    res = Jet.from_values(g, u).lap() - f.values
    rel = _weighted_l2(g, res, delta + 2) / max(_weighted_l2(g, f.values, delta + 2), 1e-300)
    return ScalarField(g, u), SolveReport(rel, moms)


@dataclass(frozen=True, eq=False)
class AsymptoticScalar:
    """u = m chi ln r - (d1 cos + d2 sin) chi / r + remainder.

    Internally the same function is stored as m P0 - (d.x/r) P1 + hat with a
    smooth numeric part ``hat``; the chi form is derived from it exactly.
    """

    m: float
    d: tuple[float, float]
    hat: ScalarField
    report: SolveReport = field(default=SolveReport(0.0))

    @property
    def grid(self) -> PolarGrid:
        return self.hat.grid

    @property
    def log_coeff(self) -> float:
        return self.m

    @property
    def dipole(self) -> tuple[float, float]:
        return self.d

    def _dipole_fourier(self) -> Fourier:
        return Fourier.cos(1) * self.d[0] + Fourier.sin(1) * self.d[1]

    def jet(self, hat_jet: Jet | None = None) -> Jet:
        g = self.grid
        hj = self.hat.jet() if hat_jet is None else hat_jet
        return (Jet.radial(g, p0_profile(g) * self.m)
                - Jet.closed(g, p1_profile(g), self._dipole_fourier()) + hj)

    def remainder_jet(self, hat_jet: Jet | None = None) -> Jet:
        g = self.grid
        hj = self.hat.jet() if hat_jet is None else hat_jet
        return (Jet.radial(g, (p0_profile(g) - chi_log(g)) * self.m)
                - Jet.closed(g, p1_profile(g) - chi_over_power(g, 1), self._dipole_fourier()) + hj)

    @property
    def remainder(self) -> ScalarField:
        return ScalarField(self.grid, np.real(self.remainder_jet(self.hat.jet()).v))

    def reconstruct(self) -> ScalarField:
        g = self.grid
        v = (self.m * p0_profile(g).v
             - p1_profile(g).v * self._dipole_fourier()(g.T) + self.hat.values)
        return ScalarField(g, v)

    def scaled(self, a: float) -> "AsymptoticScalar":
        return AsymptoticScalar(a * self.m, (a * self.d[0], a * self.d[1]), self.hat * a, self.report)


def poisson_expand(f: ScalarField, delta: float = -0.5, check_tail: bool = True) -> AsymptoticScalar:
    """Solve Laplace(u) = f and split off the log and dipole terms.

    m = (1/2pi) int f and d_i = (1/2pi) int f x_i.  The mode-0 remainder
    tends to 0 at infinity.
    """
    g = f.grid
    if not f.values.any():
        return AsymptoticScalar(0.0, (0.0, 0.0), ScalarField.zeros(g), SolveReport(0.0, (0.0, 0.0, 0.0), 0.0))
    m = integrate(f, "1", check_tail=check_tail) / (2 * np.pi)
    d1 = integrate(f, "x1", check_tail=check_tail) / (2 * np.pi)
    d2 = integrate(f, "x2", check_tail=check_tail) / (2 * np.pi)
    src = (f.values - m * lap_p0(g)
           + lap_p1_mode1(g) * (d1 * np.cos(g.T) + d2 * np.sin(g.T)))
    kmax = g.n_theta // 2 - 1
    G = np.fft.fft(src, axis=1)
    _check_spectrum(g, G, kmax, "poisson_expand")
    # boundary rows act on the chi-form remainder, not on the smooth part
    n = g.n_theta
    dP0 = p0_profile(g) - chi_log(g)
    dP1 = p1_profile(g) - chi_over_power(g, 1)
    e1 = _robin(g, dP1, 1)
    bc = {0: -n * m * _robin(g, dP0, 0), 1: n * e1 * (d1 - 1j * d2) / 2, -1: n * e1 * (d1 + 1j * d2) / 2}
    hat = np.fft.ifft(_solve_modes(g, G, "std", kmax, bc), axis=1).real
    res = Jet.from_values(g, hat).lap() - src
    fn = max(_weighted_l2(g, f.values, delta + 2), 1e-300)
    rel = _weighted_l2(g, res, delta + 2) / fn
    out = AsymptoticScalar(m, (d1, d2), ScalarField(g, hat))
    from .field_core import sobolev_norm  # local to keep the import list short

    rem = out.remainder_jet()
    const = sobolev_norm(rem, 2, delta + 1) / max(sobolev_norm(f, 0, delta + 3), 1e-300)
    return AsymptoticScalar(m, (d1, d2), ScalarField(g, hat), SolveReport(rel, (m, d1, d2), const))


# ---------------------------------------------------------------------------
# traceless tensor solve

def _re_fourier(beta: complex, k: int) -> Fourier:
    """Re(beta e^{ik theta})."""
    if k == 0:
        return Fourier.const(beta.real)
    return Fourier({k: beta / 2, -k: np.conj(beta) / 2})


def _kappa_jets(grid: PolarGrid, R: Profile, beta: complex, k: int) -> TensorJet:
    """Tensor with kappa = t11 - i t12 = R(r) beta e^{ik theta}."""
    return TensorJet(Jet.closed(grid, R, _re_fourier(beta, k)),
                     Jet.closed(grid, R, _re_fourier(1j * beta, k)))


@dataclass(frozen=True, eq=False)
class MomentumSolution:
    """K = A (chi/r^2) M + J (chi/r^2) N + remainder, with div K = f."""

    A: float
    J: float
    beta_plus: complex
    w_hat: np.ndarray  # numeric part of the complex potential Y1 - i Y2
    grid: PolarGrid
    report: SolveReport = field(default=SolveReport(0.0))

    def _closed(self) -> TensorJet:
        g = self.grid
        q = _q(g)
        Q0 = q * q * 2.0
        Q2 = Q0 - q * 2.0
        beta_minus = -(self.A - 1j * self.J) / 2
        return _kappa_jets(g, Q0, self.beta_plus, 0) + _kappa_jets(g, Q2, beta_minus, -2)

    def _leading(self) -> TensorJet:
        g = self.grid
        c2 = chi_over_power(g, 2)
        zero = Fourier()
        return (TensorJet.block(g, c2, Fourier.const(self.A), zero)
                + TensorJet.block(g, c2, zero, Fourier.const(self.J)))

    @property
    def kappa_hat(self) -> np.ndarray:
        """Numeric part of t11 - i t12."""
        d1, d2 = Jet.from_values(self.grid, self.w_hat).grad()
        return d1 - 1j * d2

    def jet(self) -> TensorJet:
        return self._closed() + _numeric_kappa(self.grid, self.w_hat)

    def tensor(self) -> TensorField:
        return self.jet().field()

    def remainder_jet(self) -> TensorJet:
        return self.jet() - self._leading()

    @property
    def remainder(self) -> TensorField:
        return self.remainder_jet().field()


def _numeric_kappa(g: PolarGrid, w: np.ndarray) -> TensorJet:
    """Jet of kappa = 2 d_z w whose first partials come from the Hessian of w.

    Differentiating the sampled kappa again would reintroduce a first-order
    difference product; going through the Hessian keeps div(kappa) equal to
    the discrete Laplacian of w.  Second partials are plain differences.
    """
    W = Jet.from_values(g, w)
    d1, d2 = W.grad()
    h11, h12, h22 = W.hessian()
    kap = d1 - 1j * d2
    k1, k2 = h11 - 1j * h12, h12 - 1j * h22
    c, s = np.cos(g.T), np.sin(g.T)
    fd = Jet.from_values(g, kap)
    K = Jet(g, kap, c * k1 + s * k2, g.R * (c * k2 - s * k1), fd.rr, fd.rt, fd.tt)
    return TensorJet(K.real, -K.imag)


def momentum_solve(f1: ScalarField, f2: ScalarField, delta: float = -0.5,
                   tol: float = MOMENT_TOL) -> MomentumSolution:
    """Traceless symmetric K with div K = (f1, f2), decaying like 1/r^2.

    K is built as the conformal Killing operator of a vector Y solving
    Laplace(Y) = f, written in the complex form w = Y1 - i Y2 so that
    K11 - i K12 = 2 d_z w and the divergence is 2 d_zbar of that.
    """
    g = f1.grid
    f = f1.values - 1j * f2.values
    scale = _l1(g, np.abs(f))
    if scale == 0:
        return MomentumSolution(0.0, 0.0, 0.0j, np.zeros(g.shape, complex), g, SolveReport(0.0, (0.0,) * 4))
    I1 = integrate(f1, "1", check_tail=False)
    I2 = integrate(f2, "1", check_tail=False)
    for name, m in (("int f1", I1), ("int f2", I2)):
        if abs(m) > tol * scale:
            raise OrthogonalityError(f"{name} = {m:.3e} exceeds {tol:.1e} * ||f||_1 = {tol * scale:.3e}")
    D = np.array([[integrate(fj, w) for w in ("x1", "x2")] for fj in (f1, f2)]) / (2 * np.pi)
    A = float(D[0, 0] + D[1, 1])
    J = float(D[1, 0] - D[0, 1])
    a = (-D[0, 0] + 1j * D[1, 0]) / 2
    b = (-D[0, 1] + 1j * D[1, 1]) / (2j)
    beta_plus, beta_minus = a + b, a - b
    e = np.exp(1j * g.T)
    src = f - (beta_plus * e + beta_minus / e) * lap_p1_mode1(g)
    kmax = g.n_theta // 2 - 2
    G = np.fft.fft(src, axis=1)
    _check_spectrum(g, G, kmax, "momentum_solve")
    dP1 = p1_profile(g) - chi_over_power(g, 1)
    e1 = _robin(g, dP1, 1)
    bc = {1: -g.n_theta * e1 * beta_plus, -1: -g.n_theta * e1 * beta_minus}
    w_hat = np.fft.ifft(_solve_modes(g, G, "std", kmax, bc), axis=1)
    # divergence of the numeric part against its source
    v1, v2 = _numeric_kappa(g, w_hat).div()
    res = (v1 - 1j * v2) - src
    fn = max(_weighted_l2(g, f, delta + 3), 1e-300)
    rel = _weighted_l2(g, res, delta + 3) / fn
    return MomentumSolution(A, J, complex(beta_plus), w_hat, g,
                            SolveReport(rel, (I1, I2, A, J)))
