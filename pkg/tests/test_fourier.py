"""Spectral field representation, products and norms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvlab import fourier
from kdvlab.errors import ModeOutOfRange, ZeroMeanViolation

X = np.linspace(0, 2 * np.pi, 37)


def project(values_fn, K, n=512):
    """Independent oracle: coefficients by trapezoid sums against cos/sin on a fine grid."""
    x = 2 * np.pi * np.arange(n) / n
    v = values_fn(x)
    s = np.arange(1, K + 1)
    c = (np.cos(np.outer(s, x)) @ v) * 2 / n
    d = (np.sin(np.outer(s, x)) @ v) * 2 / n
    return c, d, v.mean()


fields = st.builds(
    lambda seed, K: fourier.random_field(np.random.default_rng(seed), K, decay=1.0),
    st.integers(0, 2**32 - 1),
    st.sampled_from([4, 8, 16, 24]),
)


class TestFromModes:
    def test_cosine(self):
        f = fourier.from_modes([(1, 1.0)], 4)
        np.testing.assert_allclose(f.values(X), np.cos(X), atol=1e-14)

    def test_sine(self):
        f = fourier.from_modes([(-2, 0.5)], 4)
        np.testing.assert_allclose(f.values(X), 0.5 * np.sin(2 * X), atol=1e-14)

    def test_zero_mode_rejected(self):
        with pytest.raises(ZeroMeanViolation):
            fourier.from_modes([(0, 1.0)], 4)

    def test_out_of_range(self):
        with pytest.raises(ModeOutOfRange):
            fourier.from_modes([(5, 1.0)], 4)

    def test_grid_size_validation(self):
        with pytest.raises(ValueError):
            fourier.from_modes([(1, 1.0)], 4, N=12)
        assert fourier.from_modes([(1, 1.0)], 4).N >= 16

    def test_collocation_values_match_pointwise(self):
        f = fourier.from_modes([(1, 0.3), (-3, 0.2), (4, -0.1)], 8)
        np.testing.assert_allclose(f.values(), f.values(f.grid()), atol=1e-13)


class TestDerivative:
    def test_first(self):
        d = fourier.derivative(fourier.from_modes([(1, 1.0)], 4), 1)
        np.testing.assert_allclose(d.values(X), -np.sin(X), atol=1e-14)

    def test_third(self):
        d = fourier.derivative(fourier.from_modes([(1, 1.0)], 4), 3)
        np.testing.assert_allclose(d.values(X), np.sin(X), atol=1e-14)

    def test_negative_order(self):
        with pytest.raises(ValueError):
            fourier.derivative(fourier.zeros(4), -1)

    @given(fields)
    def test_order_zero_identity(self, f):
        assert fourier.derivative(f, 0).allclose(f, atol=0)

    @given(fields, st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_and_composes(self, f, a, b):
        g = fourier.translate(f, 0.7)
        lhs = fourier.derivative(f * a + g * b, 1)
        rhs = fourier.derivative(f, 1) * a + fourier.derivative(g, 1) * b
        assert lhs.allclose(rhs, atol=1e-10)
        d2 = fourier.derivative(f, 2)
        assert fourier.derivative(fourier.derivative(f, 1), 1).allclose(d2, atol=0)


class TestProduct:
    def test_cos_squared(self):
        f = fourier.from_modes([(1, 1.0)], 4)
        p = fourier.pointwise_product(f, f)
        assert p.mean == pytest.approx(0.5, abs=1e-14)
        assert p.field.allclose(fourier.from_modes([(2, 0.5)], 4), atol=1e-14)

    def test_absorbing_zero(self):
        f = fourier.from_modes([(1, 1.0), (-2, 0.3)], 4)
        p = fourier.pointwise_product(f, fourier.zeros(4))
        assert p.mean == 0.0
        assert p.field.allclose(fourier.zeros(4), atol=0)

    def test_cos_sin(self):
        p = fourier.pointwise_product(fourier.from_modes([(1, 1.0)], 4), fourier.from_modes([(-1, 1.0)], 4))
        assert p.field.allclose(fourier.from_modes([(-2, 0.5)], 4), atol=1e-14)
        assert abs(p.mean) < 1e-15

    def test_cutoff_mismatch(self):
        with pytest.raises(ValueError):
            fourier.pointwise_product(fourier.zeros(4), fourier.zeros(8))

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_dealiasing_exact_against_direct_projection(self, seed):
        rng = np.random.default_rng(seed)
        K = 24
        f = fourier.random_field(rng, K, decay=0.0, active=K // 3)
        g = fourier.random_field(rng, K, decay=0.0, active=K // 3)
        p = fourier.pointwise_product(f, g)
        c, s, mean = project(lambda x: f.values(x) * g.values(x), K)
        np.testing.assert_allclose(p.field.cos, c, atol=1e-12)
        np.testing.assert_allclose(p.field.sin, s, atol=1e-12)
        assert p.mean == pytest.approx(mean, abs=1e-12)


class TestNormsAndCoefficients:
    @pytest.mark.parametrize(
        "pairs, m, expected",
        [([(1, 1.0)], 0, 1.0), ([(1, 1.0)], 1, 1.0), ([(-2, 0.5)], 1, 1.0)],
    )
    def test_sobolev_examples(self, pairs, m, expected):
        assert fourier.sobolev_norm(fourier.from_modes(pairs, 4), m) == pytest.approx(expected, rel=1e-14)

    def test_coefficient_examples(self):
        assert fourier.coefficient(fourier.from_modes([(1, 1.0)], 4), 1) == 1.0
        assert fourier.coefficient(fourier.from_modes([(1, 1.0)], 4), -1) == 0.0
        assert fourier.coefficient(fourier.from_modes([(-2, 0.5)], 4), -2) == 0.5
        with pytest.raises(ModeOutOfRange):
            fourier.coefficient(fourier.zeros(4), 0)

    @given(fields)
    def test_parseval(self, f):
        x = f.grid()
        # (1/pi) int u^2 by the trapezoid rule, exact for this band limit
        integral = 2 * np.mean(f.values(x) ** 2)
        assert fourier.sobolev_norm(f, 0) ** 2 == pytest.approx(integral, rel=1e-12)
        assert fourier.sobolev_norm(f, 0) ** 2 == pytest.approx(np.sum(f.cos**2 + f.sin**2), rel=1e-12)

    @given(fields)
    def test_grid_round_trip(self, f):
        g = fourier.from_grid(f.values(), f.K)
        scale = max(np.abs(f.cos).max(), np.abs(f.sin).max())
        assert g.allclose(f, atol=1e-12 * scale)

    @given(fields, st.floats(-10, 10))
    def test_translate_matches_shifted_values(self, f, x0):
        np.testing.assert_allclose(fourier.translate(f, x0).values(X), f.values(X - x0), atol=1e-10)


class TestArithmeticAndIO:
    def test_arithmetic(self):
        f = fourier.from_modes([(1, 1.0)], 4)
        g = fourier.from_modes([(-1, 2.0)], 4)
        h = f + g - f * 0.5
        assert h.amplitudes() == {1: 0.5, -1: 2.0}
        assert (-f).amplitudes() == {1: -1.0}

    def test_immutable(self):
        f = fourier.from_modes([(1, 1.0)], 4)
        with pytest.raises(ValueError):
            f.cos[0] = 2.0

    def test_write_read(self, tmp_path):
        f = fourier.from_modes([(1, 0.3), (-2, 0.15), (5, 1e-3)], 8)
        fourier.write_field(f, tmp_path / "u.csv")
        g = fourier.read_field(tmp_path / "u.csv")
        assert g.K == 8 and g.N == f.N
        assert g.allclose(f, atol=0)
