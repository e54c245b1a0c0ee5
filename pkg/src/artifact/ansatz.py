"""Closed-form background objects: cutoff, angular data, H2, H3, tau2, tau3, Psi."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .field_core import (
    FieldError,
    Fourier,
    Jet,
    PolarGrid,
    Profile,
    ScalarField,
    TensorField,
    tensor_divergence,
)


class AnsatzError(ValueError):
    pass


class DegenerateRatioError(AnsatzError):
    """r_c / alpha requested with alpha below the a-priori floor."""


# ---------------------------------------------------------------------------
# cutoff

def _sigma_jet(t):
    """e^{-1/t} for t > 0 (else 0) with first and second derivatives."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    tt = np.where(pos, t, 1.0)
    a = np.where(pos, np.exp(-1.0 / tt), 0.0)
    a1 = a / tt**2
    a2 = a * (1 / tt**4 - 2 / tt**3)
    return a, a1, a2


def cutoff(r):
    """chi(r), chi'(r), chi''(r) for the smooth step from 0 (r <= 1) to 1 (r >= 2)."""
    t = np.asarray(r, dtype=float) - 1.0
    a, a1, a2 = _sigma_jet(t)
    b, b1, b2 = _sigma_jet(1.0 - t)
    b1, b2 = -b1, b2
    D = a + b
    D1 = a1 + b1
    N = a1 * b - a * b1
    N1 = a2 * b - a * b2
    chi = a / D
    d1 = N / D**2
    d2 = N1 / D**2 - 2 * N * D1 / D**3
    return chi, d1, d2


def chi(r):
    return cutoff(r)[0]


def chi_prime(r):
    return cutoff(r)[1]


# The step satisfies S(t) + S(1 - t) = 1, so int_1^2 chi dr = 1/2 and
# int chi'(r) r dr = 2 - 1/2.
CHI_PRIME_R_MOMENT = 1.5


def chi_profile(grid: PolarGrid) -> Profile:
    c, c1, c2 = cutoff(grid.R)
    return Profile(c, c1, c2)


def chi_prime_profile(grid: PolarGrid) -> Profile:
    """chi' with its derivatives; only values and first derivative are exact to roundoff."""
    r = grid.R
    c, c1, c2 = cutoff(r)
    h = 1e-4
    c3 = (cutoff(r + h)[2] - cutoff(r - h)[2]) / (2 * h)
    return Profile(c1, c2, c3)


def chi_over_power(grid: PolarGrid, p: int) -> Profile:
    """chi(r) / r**p."""
    r = grid.R
    inv = Profile(r ** (-p), -p * r ** (-p - 1), p * (p + 1) * r ** (-p - 2))
    return chi_profile(grid) * inv


def chi_log(grid: PolarGrid) -> Profile:
    r = grid.R
    return chi_profile(grid) * Profile(np.log(r), 1 / r, -1 / r**2)


# ---------------------------------------------------------------------------
# angular data

def project_orthogonal(b_raw: Fourier) -> Fourier:
    """Drop the cos(theta), sin(theta) content."""
    return b_raw.without(1)


@dataclass(frozen=True)
class AngularData:
    """Free angular data b_tilde, B and the fitted (rho, eta).

    ``b_tilde`` must not contain the k = 1 harmonics; use
    :func:`project_orthogonal` on raw input.
    """

    b_tilde: Fourier = field(default_factory=Fourier)
    B: Fourier = field(default_factory=Fourier)
    rho: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        lead = abs(self.b_tilde.c.get(1, 0)) + abs(self.b_tilde.c.get(-1, 0))
        if lead > 1e-14:
            raise AnsatzError(
                f"b_tilde has k=1 content of size {lead:.3g}; apply project_orthogonal first"
            )
        if self.rho < 0:
            raise AnsatzError(f"rho must be >= 0, got {self.rho}")

    @property
    def b(self) -> Fourier:
        return Fourier.cos(1, self.eta) * self.rho + self.b_tilde

    @classmethod
    def from_coefficients(cls, b_tilde: Fourier, B: Fourier, rho_cos: float, rho_sin: float):
        rho = float(np.hypot(rho_cos, rho_sin))
        eta = float(np.mod(np.arctan2(rho_sin, rho_cos), 2 * np.pi)) if rho > 0 else 0.0
        return cls(b_tilde, B, rho, eta)

    def with_coefficients(self, rho_cos: float, rho_sin: float) -> "AngularData":
        return AngularData.from_coefficients(self.b_tilde, self.B, rho_cos, rho_sin)

    @property
    def rho_cos(self) -> float:
        return self.rho * np.cos(self.eta)

    @property
    def rho_sin(self) -> float:
        return self.rho * np.sin(self.eta)

    def norms(self) -> dict:
        return {"b_tilde_W12": self.b_tilde.w12_norm(), "B_W12": self.B.w12_norm()}

    def kmax(self) -> int:
        return max(self.b_tilde.kmax, self.B.kmax, 1)


def fourier_from_json(obj) -> Fourier:
    """Parse {"cos": [...], "sin": [...]}; a missing object means zero."""
    if obj is None:
        return Fourier()
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or set(obj) - {"cos", "sin"}:
        raise AnsatzError(f"angular data must be an object with keys cos/sin, got {obj!r}")
    cos = [float(x) for x in obj.get("cos", [])]
    sin = [float(x) for x in obj.get("sin", [])]
    if not all(np.isfinite(cos + sin)):
        raise AnsatzError("angular coefficients must be finite")
    return Fourier.from_cos_sin(cos, sin)


def fourier_to_json(f: Fourier) -> dict:
    cos, sin = f.cos_sin()
    return {"cos": cos, "sin": sin}


# ---------------------------------------------------------------------------
# rotation tensors

def rotation_tensors(theta):
    """M_theta and N_theta as arrays of shape (..., 2, 2)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    M = np.stack([np.stack([c, s], -1), np.stack([s, -c], -1)], -2)
    N = np.stack([np.stack([-s, c], -1), np.stack([c, s], -1)], -2)
    return M, N


def contract(S, T):
    return np.einsum("...ij,...ij->...", S, T)


_COS2 = Fourier.cos(2)
_SIN2 = Fourier.sin(2)


@dataclass(frozen=True, eq=False)
class TensorJet:
    """Traceless symmetric tensor with jets for both stored components."""

    t11: Jet
    t12: Jet

    @classmethod
    def block(cls, grid: PolarGrid, R: Profile, fM: Fourier, fN: Fourier) -> "TensorJet":
        """R(r) (fM(theta) M_theta + fN(theta) N_theta)."""
        a = fM * _COS2 - fN * _SIN2
        b = fM * _SIN2 + fN * _COS2
        return cls(Jet.closed(grid, R, a), Jet.closed(grid, R, b))

    @classmethod
    def zero(cls, grid: PolarGrid) -> "TensorJet":
        return cls(Jet.zero(grid), Jet.zero(grid))

    @classmethod
    def from_field(cls, K: TensorField) -> "TensorJet":
        return cls(Jet.from_values(K.grid, K.t11), Jet.from_values(K.grid, K.t12))

    def __add__(self, o: "TensorJet") -> "TensorJet":
        return TensorJet(self.t11 + o.t11, self.t12 + o.t12)

    def __sub__(self, o: "TensorJet") -> "TensorJet":
        return TensorJet(self.t11 - o.t11, self.t12 - o.t12)

    def __mul__(self, s) -> "TensorJet":
        """Multiply by a scalar jet or a number."""
        return TensorJet(self.t11 * s, self.t12 * s)

    __rmul__ = __mul__

    def div(self):
        return tensor_divergence(self.t11, self.t12)

    def field(self) -> TensorField:
        g = self.t11.grid
        return TensorField(g, np.real(self.t11.v), np.real(self.t12.v))


# ---------------------------------------------------------------------------
# background fields

def psi_jet(grid: PolarGrid) -> Jet:
    """Default Psi = 2 exp(-r^2), which integrates to 2 pi."""
    r = grid.R
    e = np.exp(-r**2)
    return Jet.radial(grid, Profile(2 * e, -4 * r * e, (8 * r**2 - 4) * e))


def center_ratio(alpha: float, r_c: float, alpha_floor: float = 0.0) -> float:
    """r_c / alpha, defined as 0 when r_c = 0."""
    if r_c == 0:
        return 0.0
    if not alpha > 0 or alpha < alpha_floor:
        raise DegenerateRatioError(
            f"r_c/alpha needs alpha >= {alpha_floor:.6g} > 0 when r_c = {r_c:.6g}; got alpha = {alpha:.6g}"
        )
    return r_c / alpha


@dataclass(frozen=True, eq=False)
class BackgroundFields:
    grid: PolarGrid
    H2j: TensorJet
    H3j: TensorJet
    tau2j: Jet
    tau3j: Jet
    Psij: Jet
    ratio: float  # r_c / alpha

    @property
    def H2(self) -> TensorField:
        return self.H2j.field()

    @property
    def H3(self) -> TensorField:
        return self.H3j.field()

    @property
    def tau2(self) -> ScalarField:
        return self.tau2j.field()

    @property
    def tau3(self) -> ScalarField:
        return self.tau3j.field()

    @property
    def Psi(self) -> ScalarField:
        return self.Psij.field()


def build_background(grid: PolarGrid, ang: AngularData, alpha: float, r_c: float,
                     theta_c: float, lam: ScalarField | None = None,
                     alpha_floor: float = 0.0) -> BackgroundFields:
    """Assemble H2, H3, tau2, tau3 and Psi with exact derivatives."""
    k = center_ratio(alpha, r_c, alpha_floor)
    if lam is not None:
        with np.errstate(over="ignore"):
            if not np.isfinite(np.exp(-lam.values)).all():
                raise AnsatzError("exp(-lambda) overflows on the grid")
    if max(ang.kmax() + 1, 3) > grid.n_theta // 2 - 1:
        raise FieldError(f"angular data needs more than n_theta = {grid.n_theta} nodes")
    b = ang.b
    bs = b * Fourier.sin(1, theta_c)
    bs1 = bs.deriv()
    c1 = chi_over_power(grid, 1)
    c2 = chi_over_power(grid, 2)
    zero = Fourier()
    H2 = TensorJet.block(grid, c1, b * -0.5, zero) + TensorJet.block(grid, c2, bs1 * (-k / 2), bs * (-k))
    H3 = TensorJet.block(grid, c2, ang.B.deriv() * -0.5, ang.B * (-(1 - alpha)))
    tau2 = Jet.closed(grid, c1, b) + Jet.closed(grid, c2, bs1 * k)
    tau3 = Jet.closed(grid, c2, ang.B.deriv())
    return BackgroundFields(grid, H2, H3, tau2, tau3, psi_jet(grid), k)


def identity_rhs(grid: PolarGrid, b: Fourier, ratio: float, theta_c: float):
    """Closed form of (1/2) d_j tau2 - d_i H2_ij, as arrays."""
    r = grid.R
    _, c1, _ = cutoff(r)
    bs = b * Fourier.sin(1, theta_c)
    t = grid.T
    out = []
    for trig in (Fourier.cos(1), Fourier.sin(1)):
        first = c1 / r * (b * trig)(t)
        second = c1 / r**2 * ratio * (bs * trig).deriv()(t)
        out.append(first + second)
    return out[0], out[1]


def divergence_identity_residual(grid: PolarGrid, ang: AngularData, alpha: float, r_c: float,
                                 theta_c: float, method: str = "jet") -> float:
    """Sup-norm gap between (1/2) grad tau2 - div H2 and its closed form.

    ``method="fd"`` differentiates the sampled fields with the grid calculus;
    ``method="jet"`` uses the exact jets of the closed forms.
    """
    bg = build_background(grid, ang, alpha, r_c, theta_c)
    if method == "jet":
        tau, H = bg.tau2j, bg.H2j
    elif method == "fd":
        tau = Jet.from_values(grid, np.real(bg.tau2j.v))
        H = TensorJet.from_field(bg.H2)
    else:
        raise ValueError(f"method must be 'fd' or 'jet', got {method!r}")
    g1, g2 = tau.grad()
    d1, d2 = H.div()
    e1, e2 = identity_rhs(grid, ang.b, bg.ratio, theta_c)
    return float(max(np.abs(0.5 * g1 - d1 - e1).max(), np.abs(0.5 * g2 - d2 - e2).max()))
