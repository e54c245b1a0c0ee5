import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from artifact.ansatz import (
    CHI_PRIME_R_MOMENT,
    AngularData,
    AnsatzError,
    DegenerateRatioError,
    TensorJet,
    build_background,
    center_ratio,
    chi,
    chi_log,
    chi_over_power,
    chi_prime,
    contract,
    cutoff,
    divergence_identity_residual,
    fourier_from_json,
    fourier_to_json,
    project_orthogonal,
    rotation_tensors,
)
from artifact.field_core import Fourier, PolarGrid, integrate, radial_power

coef = st.floats(-3, 3, allow_nan=False)


# --- cutoff ---------------------------------------------------------------

def test_cutoff_support_and_range():
    r = np.linspace(0, 3, 3001)
    c, c1, _ = cutoff(r)
    assert np.all(c[r <= 1] == 0) and np.all(c[r >= 2] == 1)
    assert c.min() >= 0 and c.max() <= 1
    assert np.all(c1 >= 0)
    assert np.all(c1[(r <= 1) | (r >= 2)] == 0)
    assert np.all(np.diff(c) >= 0)


def test_cutoff_symmetry():
    t = np.linspace(0, 1, 101)
    assert np.allclose(chi(1 + t) + chi(2 - t), 1, atol=1e-15)


def test_cutoff_derivatives_match_differences():
    r = np.linspace(1.05, 1.95, 50)
    h = 1e-5
    c, c1, c2 = cutoff(r)
    assert np.allclose(c1, (chi(r + h) - chi(r - h)) / (2 * h), atol=1e-8)
    assert np.allclose(c2, (chi_prime(r + h) - chi_prime(r - h)) / (2 * h), atol=1e-6)


def test_chi_prime_moment():
    val, _ = quad(lambda r: chi_prime(r) * r, 1, 2, epsabs=1e-14)
    assert val == pytest.approx(CHI_PRIME_R_MOMENT, abs=1e-12)


def test_cutoff_products_vanish_inside_unit_disc(small_grid):
    inside = small_grid.R[:, 0] <= 1
    for P in (chi_log(small_grid), chi_over_power(small_grid, 1), chi_over_power(small_grid, 2)):
        for part in (P.v, P.d1, P.d2):
            assert np.all(part[inside] == 0)


# --- angular data ---------------------------------------------------------

def test_project_orthogonal_examples():
    assert project_orthogonal(Fourier.cos(1)).kmax == 0
    f = Fourier.const(1.0) + Fourier.cos(2)
    th = np.linspace(0, 2 * np.pi, 17)
    assert np.allclose(project_orthogonal(f)(th), f(th), atol=1e-15)
    g = Fourier.cos(1) * 3 + Fourier.sin(3) * 0.5
    assert np.allclose(project_orthogonal(g)(th), 0.5 * np.sin(3 * th), atol=1e-15)


@given(st.lists(coef, min_size=1, max_size=6), st.lists(coef, max_size=6))
def test_project_orthogonal_properties(cos, sin):
    f = Fourier.from_cos_sin(cos, sin)
    p = project_orthogonal(f)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    v = p(th)
    # no k = 1 content left, and projecting twice changes nothing
    assert abs(np.mean(v * np.cos(th))) < 1e-13 and abs(np.mean(v * np.sin(th))) < 1e-13
    assert np.allclose(project_orthogonal(p)(th), v, atol=1e-14)
    # what was removed is exactly the k = 1 part of f
    fv = f(th)
    a1, b1 = 2 * np.mean(fv * np.cos(th)), 2 * np.mean(fv * np.sin(th))
    assert np.allclose(fv - v, a1 * np.cos(th) + b1 * np.sin(th), atol=1e-12)


def test_angular_data_rejects_leading_mode_and_negative_rho():
    with pytest.raises(AnsatzError, match="k=1"):
        AngularData(b_tilde=Fourier.sin(1))
    with pytest.raises(AnsatzError, match="rho"):
        AngularData(rho=-1.0)


@given(coef, coef)
def test_angular_coefficients_round_trip(rc, rs):
    a = AngularData().with_coefficients(rc, rs)
    assert a.rho_cos == pytest.approx(rc, abs=1e-12)
    assert a.rho_sin == pytest.approx(rs, abs=1e-12)
    th = np.linspace(0, 2 * np.pi, 9)
    assert np.allclose(a.b(th), rc * np.cos(th) + rs * np.sin(th), atol=1e-12)


@given(st.lists(coef, max_size=5), st.lists(coef, max_size=5))
def test_fourier_json_round_trip(cos, sin):
    f = Fourier.from_cos_sin(cos, sin)
    back = fourier_from_json(json.dumps(fourier_to_json(f)))
    th = np.linspace(0, 2 * np.pi, 33)
    assert np.allclose(back(th), f(th), atol=1e-13)


def test_fourier_json_errors():
    assert fourier_from_json(None).kmax == 0
    with pytest.raises(AnsatzError):
        fourier_from_json({"cos": [1.0], "tan": [2.0]})
    with pytest.raises(AnsatzError, match="finite"):
        fourier_from_json({"cos": [float("nan")]})


def test_w12_norms():
    a = AngularData(b_tilde=Fourier.cos(2), B=Fourier.const(1.0))
    n = a.norms()
    # ||cos 2t||^2 + ||2 sin 2t||^2 = pi + 4 pi
    assert n["b_tilde_W12"] == pytest.approx(np.sqrt(5 * np.pi), rel=1e-12)
    assert n["B_W12"] == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)


# --- rotation tensors ----------------------------------------------------

@given(st.floats(-10, 10))
def test_rotation_tensor_algebra(t):
    M, N = rotation_tensors(t)
    assert abs(contract(M, M) - 2) < 1e-14 and abs(contract(N, N) - 2) < 1e-14
    assert abs(contract(M, N)) < 1e-14
    for T in (M, N):
        assert abs(np.trace(T)) < 1e-14 and np.allclose(T, T.T)


def test_inverse_square_blocks_are_divergence_free(grid):
    band = np.broadcast_to((grid.R >= 1.5) & (grid.R <= 20), grid.shape)
    for fM, fN in ((Fourier.const(1.0), Fourier()), (Fourier(), Fourier.const(1.0))):
        d1, d2 = TensorJet.block(grid, radial_power(grid, -2), fM, fN).div()
        assert np.abs(d1[band]).max() < 1e-12 and np.abs(d2[band]).max() < 1e-12


# --- background ------------------------------------------------------------

def test_zero_angular_data_gives_zero_background(small_grid):
    for alpha in (0.0, 0.5, 1.0):
        bg = build_background(small_grid, AngularData(), alpha, 0.0, 0.0)
        for f in (bg.H2, bg.H3):
            assert f.max_abs() == 0
        assert bg.tau2.max_abs() == 0 and bg.tau3.max_abs() == 0
        assert bg.Psi.max_abs() > 0


def test_background_cos_example(small_grid):
    g = small_grid
    bg = build_background(g, AngularData(rho=1.0), 1.0, 0.0, 0.0)
    c = chi(g.R)
    M, _ = rotation_tensors(g.T)
    assert np.allclose(bg.tau2.values, np.cos(g.T) * c / g.R, atol=1e-15)
    expect = -np.cos(g.T)[..., None, None] * (c / (2 * g.R))[..., None, None] * M
    assert np.allclose(bg.H2.t11, expect[..., 0, 0], atol=1e-15)
    assert np.allclose(bg.H2.t12, expect[..., 0, 1], atol=1e-15)


def test_background_H3_example(small_grid):
    g = small_grid
    bg = build_background(g, AngularData(B=Fourier.sin(1)), 0.0, 0.0, 0.0)
    c = (chi(g.R) / g.R**2)[..., None, None]
    M, N = rotation_tensors(g.T)
    expect = c * (-np.sin(g.T)[..., None, None] * N - (np.cos(g.T) / 2)[..., None, None] * M)
    assert np.allclose(bg.H3.t11, expect[..., 0, 0], atol=1e-15)
    assert np.allclose(bg.H3.t12, expect[..., 0, 1], atol=1e-15)
    assert np.allclose(bg.tau3.values, np.cos(g.T) * chi(g.R) / g.R**2, atol=1e-15)


def test_degenerate_ratio():
    assert center_ratio(0.0, 0.0) == 0.0
    assert center_ratio(0.5, 0.2) == pytest.approx(0.4)
    with pytest.raises(DegenerateRatioError):
        center_ratio(0.0, 0.1)
    with pytest.raises(DegenerateRatioError):
        center_ratio(0.1, 0.1, alpha_floor=0.2)


def test_psi_integrates_to_two_pi(grid):
    bg = build_background(grid, AngularData(), 1.0, 0.0, 0.0)
    assert integrate(bg.Psi, "1") == pytest.approx(2 * np.pi, abs=1e-10)


def test_identity_residual_examples(small_grid):
    assert divergence_identity_residual(small_grid, AngularData(), 1.0, 0.0, 0.0) == 0
    assert divergence_identity_residual(small_grid, AngularData(rho=1.0), 1.0, 0.0, 0.0) <= 1e-8


@given(st.lists(coef, max_size=4), st.floats(0.3, 2.0), st.floats(0, 0.5), st.floats(0, 2 * np.pi))
def test_identity_residual_jet_property(cos, alpha, r_c, theta_c):
    b = project_orthogonal(Fourier.from_cos_sin([0.0] + cos, [0.0, 0.0, 1.0]))
    res = divergence_identity_residual(PolarGrid(64, 32), AngularData(b_tilde=b, rho=0.7, eta=1.0),
                                       alpha, r_c, theta_c)
    assert res < 1e-12 * (1 + r_c / alpha) * (1 + sum(abs(c) for c in cos))


def test_identity_residual_fd_converges():
    ang = AngularData(b_tilde=Fourier.const(1.0) + Fourier.sin(2))
    errs = [divergence_identity_residual(PolarGrid(n, 32), ang, 1.0, 0.3, np.pi / 4, method="fd")
            for n in (128, 256, 512)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)


def test_identity_residual_unknown_method(small_grid):
    with pytest.raises(ValueError):
        divergence_identity_residual(small_grid, AngularData(), 1.0, 0.0, 0.0, method="spline")
