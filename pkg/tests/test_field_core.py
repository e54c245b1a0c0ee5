import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.ansatz import chi
from artifact.field_core import (
    FieldError,
    Fourier,
    Jet,
    PolarGrid,
    ScalarField,
    TailDivergenceError,
    ZeroTailError,
    discretize,
    fd_weights,
    gradient,
    integrate,
    laplacian,
    read_field_csv,
    sobolev_norm,
    sobolev_norm_report,
    tail_exponent,
    write_field_csv,
)


def test_fd_weights_reproduce_polynomials():
    x = np.array([-1.3, -0.2, 0.4, 1.1, 2.0])
    w = fd_weights(0.3, x, 2)
    for p in range(5):
        f = x**p
        exact = [0.3**p, p * 0.3 ** (p - 1) if p else 0, p * (p - 1) * 0.3 ** (p - 2) if p > 1 else 0]
        assert np.allclose(w.T @ f, exact, atol=1e-12)


def test_grid_layout(small_grid):
    g = small_grid
    assert g.shape == (128, 32)
    assert np.all(np.diff(g.r) > 0) and g.r[0] > 0
    assert g.r_max == pytest.approx(g.r[-1])
    assert np.all(g.weights > 0)
    assert g.meta() == {"n_r": 128, "n_theta": 32, "L": 4.0}


@pytest.mark.parametrize("bad", [dict(n_r=4), dict(n_theta=7), dict(L=-1.0), dict(order=5)])
def test_grid_rejects_bad_parameters(bad):
    kw = dict(n_r=64, n_theta=16)
    kw.update(bad)
    with pytest.raises((FieldError, ValueError)):
        PolarGrid(**kw)


def test_discretize_examples(small_grid):
    g = small_grid
    assert not discretize(lambda r, t: 0 * r, g).values.any()
    f = discretize(lambda r, t: np.cos(t) + 0 * r, g)
    F = np.abs(f.modes())
    keep = np.abs(g.k) == 1
    assert F[:, ~keep].max() < 1e-13 and F[:, keep].min() > 0.1
    e = discretize(lambda r, t: np.exp(-r**2) + 0 * t, g)
    assert np.abs(e.values - np.exp(-g.R**2)).max() < 1e-15


def test_discretize_rejects_nonfinite(small_grid):
    with pytest.raises(FieldError):
        discretize(lambda r, t: np.full_like(r, np.nan), small_grid)


def test_integrate_oracles(grid):
    R = grid.R
    assert integrate(ScalarField.zeros(grid)) == 0.0
    assert integrate(ScalarField(grid, 2 * np.exp(-R**2) + 0 * grid.T)) == pytest.approx(2 * np.pi, abs=1e-9)
    f = ScalarField(grid, 4 * grid.x1 * np.exp(-R**2))
    assert integrate(f, "x1") == pytest.approx(2 * np.pi, abs=1e-9)
    assert abs(integrate(f, "x2")) < 1e-12


def test_integrate_algebraic_tail(grid):
    # r^-4 decay, integral pi
    f = ScalarField(grid, 1 / (1 + grid.R**2) ** 2 + 0 * grid.T)
    assert integrate(f) == pytest.approx(np.pi, abs=1e-8)


def test_integrate_rejects_slow_tail(grid):
    f = ScalarField(grid, chi(grid.R) / grid.R + 0 * grid.T)
    with pytest.raises(TailDivergenceError):
        integrate(f)
    with pytest.raises(FieldError):
        integrate(f, "x3")


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.5, 2.0))
def test_integrate_shifted_gaussian(x0, y0, w):
    g = PolarGrid(256, 64)
    f = ScalarField(g, np.exp(-((g.x1 - x0) ** 2 + (g.x2 - y0) ** 2) / w**2))
    area = np.pi * w**2
    assert integrate(f) == pytest.approx(area, rel=1e-8)
    assert integrate(f, "x1") == pytest.approx(area * x0, abs=1e-7)
    assert integrate(f, "x2") == pytest.approx(area * y0, abs=1e-7)


def test_gradient_oracles(grid):
    R = grid.R
    G = np.exp(-R**2)
    d1, d2 = gradient(ScalarField(grid, G + 0 * grid.T))
    assert np.abs(d1.values + 2 * grid.x1 * G).max() < 1e-8
    assert np.abs(d2.values + 2 * grid.x2 * G).max() < 1e-8
    inner = grid.r < 5
    w = chi(10 - grid.R)  # equals 1 for r <= 8
    f = ScalarField(grid, grid.x1 * w)
    d1, d2 = gradient(f)
    assert np.abs(d1.values[inner] - 1).max() < 1e-9 and np.abs(d2.values[inner]).max() < 1e-9
    f = ScalarField(grid, grid.R**2 * np.cos(2 * grid.T) * w)
    d1, d2 = gradient(f)
    assert np.abs(d1.values[inner] - 2 * grid.x1[inner]).max() < 1e-8
    assert np.abs(d2.values[inner] + 2 * grid.x2[inner]).max() < 1e-8


def test_laplacian_oracles(grid):
    R = grid.R
    G = np.exp(-R**2) + 0 * grid.T
    L = laplacian(ScalarField(grid, G))
    assert np.abs(L.values - (4 * R**2 - 4) * G).max() < 1e-8
    inner = grid.r < 5
    w = chi(10 - grid.R)
    for f in (w + 0 * grid.T, grid.x1 * w, grid.R**2 * np.cos(2 * grid.T) * w):
        assert np.abs(laplacian(ScalarField(grid, f)).values[inner]).max() < 1e-8


def test_divergence_of_zero_tensor(small_grid):
    from artifact.field_core import TensorField, divergence

    d1, d2 = divergence(TensorField.zeros(small_grid))
    assert not d1.values.any() and not d2.values.any()


@given(st.integers(0, 2), st.floats(0, 2 * np.pi))
def test_harmonic_polynomials(k, phase):
    g = PolarGrid(256, 32)
    w = chi(10 - g.R)
    f = ScalarField(g, g.R**k * np.cos(k * g.T + phase) * w)
    assert np.abs(laplacian(f).values[g.r < 5]).max() < 1e-8


def test_integration_by_parts(grid):
    f = ScalarField(grid, np.exp(-((grid.x1 - 0.3) ** 2 + 2 * grid.x2**2)))
    d1, d2 = gradient(f)
    assert abs(integrate(d1)) < 1e-10 and abs(integrate(d2)) < 1e-10


def test_sobolev_norm_examples(grid):
    assert sobolev_norm(ScalarField.zeros(grid), 1, -0.5) == 0.0
    f = ScalarField(grid, (1 + grid.R**2) ** -1.5 + 0 * grid.T)
    assert sobolev_norm(f, 0, 0.0) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-8)
    G = ScalarField(grid, np.exp(-grid.R**2) + 0 * grid.T)
    vals = [sobolev_norm(G, 0, d) for d in (-1.0, -0.5, 0.0, 0.5)]
    assert np.all(np.diff(vals) > 0)
    rep = sobolev_norm_report(f, 0, 0.0)
    assert rep["norm"] == pytest.approx(np.sqrt(np.pi / 2), rel=1e-8) and rep["relative_tail"] < 1e-6


@given(st.floats(0.3, 2.0), st.floats(-0.9, -0.1), st.integers(1, 2))
def test_derivative_lowers_norm(width, delta, m):
    g = PolarGrid(128, 32)
    f = ScalarField(g, np.exp(-((g.x1 - 0.2) ** 2 + g.x2**2) / width**2))
    d1, _ = gradient(f)
    assert sobolev_norm(d1, m - 1, delta + 1) <= sobolev_norm(f, m, delta) * (1 + 1e-12)


@given(st.floats(-0.9, -0.1), st.floats(-0.9, -0.1))
def test_product_estimate_constant_is_moderate(d1, d2):
    # H^0_{d1+d2+1-eps} norm of a product against H^2 norms of the factors
    g = PolarGrid(128, 32)
    u = ScalarField(g, np.exp(-((g.x1 - 0.5) ** 2 + g.x2**2)))
    v = ScalarField(g, 1 / (1 + g.R**2) ** 2 + 0 * g.T)
    delta = d1 + d2 + 0.9
    C = sobolev_norm(u * v, 0, delta) / (sobolev_norm(u, 2, d1) * sobolev_norm(v, 2, d2))
    assert 0 < C < 10


def test_tail_exponents(grid):
    c = chi(grid.R) + 0 * grid.T
    assert tail_exponent(ScalarField(grid, c / grid.R)) == pytest.approx(-1, abs=0.05)
    assert tail_exponent(ScalarField(grid, c / grid.R**2)) == pytest.approx(-2, abs=0.05)
    assert tail_exponent(ScalarField(grid, np.exp(-grid.R**2) + 0 * grid.T)) <= -10
    with pytest.raises(ZeroTailError):
        tail_exponent(ScalarField.zeros(grid))


@given(st.integers(0, 10_000))
def test_angle_transform_round_trip(seed):
    g = PolarGrid(32, 16)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    back = ScalarField.from_modes(g, ScalarField(g, v).modes()).values
    assert np.abs(back - v).max() <= 1e-12 * np.abs(v).max()


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.lists(st.floats(-2, 2), min_size=1, max_size=5))
def test_fourier_matches_sampling(cos, sin):
    f = Fourier.from_cos_sin(cos, sin)
    th = np.linspace(0, 2 * np.pi, 17)
    direct = cos[0] + sum(cos[k] * np.cos(k * th) for k in range(1, len(cos)))
    direct = direct + sum(sin[k] * np.sin(k * th) for k in range(1, len(sin)))
    assert np.allclose(f(th), direct, atol=1e-12)
    c2, s2 = f.cos_sin()
    assert np.allclose(Fourier.from_cos_sin(c2, s2)(th), f(th), atol=1e-12)
    # derivative by finite difference on a fine angle grid
    t = np.linspace(0, 2 * np.pi, 4001)
    assert np.allclose(np.gradient(f(t), t)[1:-1], f.deriv()(t)[1:-1], atol=1e-4)


def test_jet_product_and_exp_match_sampling(grid):
    R, T = grid.R, grid.T
    a = Jet.from_values(grid, np.exp(-R**2) * (1 + 0.3 * grid.x1))
    b = Jet.from_values(grid, 1 / (1 + R**2) + 0 * T)
    p = a * b
    q = Jet.from_values(grid, np.real(p.v))
    assert np.abs(p.lap() - q.lap()).max() < 1e-6
    e = a.exp()
    qe = Jet.from_values(grid, np.real(e.v))
    assert np.abs(np.array(e.grad()) - np.array(qe.grad())).max() < 1e-8


def test_field_csv_round_trip(tmp_path, small_grid):
    f = ScalarField(small_grid, np.random.default_rng(0).standard_normal(small_grid.shape))
    p = tmp_path / "f.csv"
    write_field_csv(f, p)
    assert p.read_text().splitlines()[0] == "r,theta,value"
    g = read_field_csv(p)
    assert g.grid == small_grid and np.array_equal(g.values, f.values)
