import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.field_core import PolarGrid, ScalarField, write_field_csv
from artifact.matter import (
    MatterData,
    SourceError,
    SourceFields,
    build_sources,
    epsilon,
    gaussian,
    gaussian_matter,
    source_norms,
    sources_from_config,
)

from conftest import two_term_sources

G = PolarGrid(128, 32)
Z = ScalarField.zeros(G)
amp = st.floats(0.01, 2.0)
center = st.tuples(st.floats(-1, 1), st.floats(-1, 1))


def test_zero_matter():
    s = build_sources(MatterData.zeros(G))
    assert s.is_zero() and epsilon(s) == 0


@given(amp)
def test_gamma_dot_example(a):
    s = build_sources(MatterData(Z, Z, gaussian(G, a), Z))
    assert np.allclose(s.q_dot.values, 2 * a**2 * np.exp(-2 * G.R**2), rtol=1e-12, atol=1e-30)
    assert s.p1.max_abs() == 0 and s.p2.max_abs() == 0 and s.q_grad.max_abs() == 0


def test_gamma_gradient_example():
    a = 0.3
    g = PolarGrid(256, 32)
    z = ScalarField.zeros(g)
    s = build_sources(MatterData(gaussian(g, a), z, z, z))
    exact = 8 * a**2 * g.R**2 * np.exp(-2 * g.R**2)
    assert np.abs(s.q_grad.values - exact).max() < 1e-8 * exact.max()
    assert s.q_dot.max_abs() == 0 and s.p1.max_abs() == 0


def test_epsilon_example():
    a = 0.01
    g = PolarGrid(256, 32)
    e = ScalarField(g, a * np.exp(-g.R**2) + 0 * g.T)
    s = SourceFields(ScalarField.zeros(g), ScalarField.zeros(g), e, e)
    assert epsilon(s) == pytest.approx(2 * a * np.pi, rel=1e-10)
    assert epsilon(s.scaled(4)) == pytest.approx(4 * epsilon(s), rel=1e-14)


def test_two_term_epsilon():
    # gamma = a e^{-r^2} contributes 2 pi a^2 and gamma_dot contributes pi a^2
    a = 0.05
    g = PolarGrid(256, 32)
    assert epsilon(two_term_sources(g, a)) == pytest.approx(3 * np.pi * a**2, rel=1e-9)


@given(amp, amp, amp, center, center)
def test_cauchy_schwarz(a, b, c, x0, x1):
    m = MatterData(gaussian(G, a, x0), gaussian(G, b, x1), gaussian(G, c, x1), gaussian(G, b, x0))
    s = build_sources(m)
    s.validate()
    bound = s.q_dot.values * s.q_grad.values
    for p in (s.p1, s.p2):
        assert np.all(p.values**2 <= bound * (1 + 1e-12) + 1e-300)
    assert s.q_dot.values.min() >= 0 and s.q_grad.values.min() >= 0


@given(amp, center, st.floats(0.1, 3))
def test_quadratic_scaling(a, x0, t):
    # with gamma = 0 the weight e^{-4 gamma} is 1 and every source is a quadratic form
    ref = MatterData(Z, gaussian(G, 0.1), gaussian(G, a), gaussian(G, a, x0))
    big = MatterData(Z, ref.omega * t, ref.gamma_dot * t, ref.omega_dot * t)
    s0, s1 = build_sources(ref), build_sources(big)
    for name in ("p1", "p2", "q_dot", "q_grad"):
        ref_vals = t**2 * getattr(s0, name).values
        assert np.allclose(getattr(s1, name).values, ref_vals, rtol=1e-12, atol=1e-12 * np.abs(ref_vals).max())


def test_polar_momentum_identities():
    s = two_term_sources(G, 0.1)
    assert np.allclose(s.p_theta.values, G.x1 * s.p2.values - G.x2 * s.p1.values, atol=1e-14)
    assert np.allclose(s.p_r.values, G.x1 * s.p1.values + G.x2 * s.p2.values, atol=1e-14)


def test_validate_rejects_bad_sources():
    e = ScalarField(G, np.exp(-G.R**2) + 0 * G.T)
    with pytest.raises(SourceError, match="negative"):
        SourceFields(Z, Z, e * -1.0, e).validate()
    with pytest.raises(SourceError, match="exceeds"):
        SourceFields(e * 2.0, Z, e, e).validate()


def test_matter_rejects_overflow_and_mixed_grids():
    big = ScalarField(G, np.full(G.shape, -300.0))
    with pytest.raises(SourceError, match="overflow"):
        MatterData(big, Z, Z, Z)
    other = ScalarField.zeros(PolarGrid(64, 32))
    with pytest.raises(SourceError, match="grids"):
        MatterData(Z, other, Z, Z)


def test_gaussian_term_errors():
    with pytest.raises(SourceError, match="which"):
        gaussian_matter(G, 1.0, [{"which": "phi"}])
    with pytest.raises(SourceError, match="center"):
        gaussian_matter(G, 1.0, [{"which": "gamma", "center": [1, 2, 3]}])


def test_sources_from_config(tmp_path):
    assert sources_from_config(G, None).is_zero()
    s = sources_from_config(G, {"family": "gaussian", "amplitude": 0.1, "which": "gamma_dot"})
    assert np.allclose(s.q_dot.values, 0.02 * np.exp(-2 * G.R**2), rtol=1e-14)
    with pytest.raises(SourceError, match="family"):
        sources_from_config(G, {"family": "spline"})


def test_sources_from_files(tmp_path):
    ref = two_term_sources(G, 0.1)
    names = {}
    for k in ("p1", "p2", "q_dot", "q_grad"):
        names[k] = f"{k}.csv"
        write_field_csv(getattr(ref, k), tmp_path / names[k])
    s = sources_from_config(G, {"family": "file", "paths": names}, base=tmp_path)
    for k in names:
        assert np.array_equal(getattr(s, k).values, getattr(ref, k).values)
    with pytest.raises(SourceError, match="exactly"):
        sources_from_config(G, {"family": "file", "paths": {"p1": "p1.csv"}}, base=tmp_path)
    wrong = PolarGrid(64, 32)
    with pytest.raises(SourceError, match="grid"):
        sources_from_config(wrong, {"family": "file", "paths": names}, base=tmp_path)


def test_source_norms_scale_quadratically():
    n1 = source_norms(two_term_sources(G, 0.1), -0.5)
    n2 = source_norms(two_term_sources(G, 0.2), -0.5)
    for k in n1:
        assert n2[k] == pytest.approx(4 * n1[k], rel=1e-12)
