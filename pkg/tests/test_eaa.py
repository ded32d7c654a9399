import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ucmanifold.ds import DSStructure, UncertainInputSpec, encode, to_pbox
from ucmanifold.eaa import (
    NoiseVector, QuadraticForm, batch_qf_to_ds, qf_add, qf_from_input, qf_mul, qf_scale, qf_sub,
    qf_sum, qf_to_ds, sample_noise,
)
from ucmanifold.errors import InvalidInputError

coef = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def qforms(draw, k=3):
    c = draw(coef)
    lin = draw(arrays(float, k, elements=coef))
    quad = draw(arrays(float, (k, k), elements=coef))
    return QuadraticForm(c, lin, quad)


def bundled_noise():
    return NoiseVector.from_inputs({
        "wind": encode(UncertainInputSpec("wind", "weibull-windfarm",
                                          {"shape": 2.49, "scale": 6.85, "rated_power": 56.0}), 100),
        "l12": encode(UncertainInputSpec("l12", "interval", {"lo": 9.52, "hi": 12.88}), 100),
        "l21": encode(UncertainInputSpec("l21", "triangular-fuzzy", {"a": 14.87, "m": 17.5, "b": 20.12}), 100),
    })


def q1(c, l, q):
    return QuadraticForm(c, [l], [[q]])


def coeffs(x):
    return np.concatenate([[x.central], x.linear, x.quadratic.ravel()])


class TestArithmetic:
    def test_hand_addition(self):
        z = qf_add(q1(1, 2, 3), q1(4, 5, 6))
        assert (z.central, z.linear[0], z.quadratic[0, 0]) == (5, 7, 9)

    def test_scale(self):
        z = qf_scale(-2, q1(1, 2, 3))
        assert (z.central, z.linear[0], z.quadratic[0, 0]) == (-2, -4, -6)

    def test_scale_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            qf_scale(float("nan"), q1(1, 2, 3))

    def test_hand_product(self):
        z = qf_mul(q1(1, 2, 0), q1(3, 4, 0))
        assert (z.central, z.linear[0], z.quadratic[0, 0]) == (3, 10, 8)

    def test_product_with_unit_is_identity(self):
        x = QuadraticForm(1.5, [1.0, -2.0], [[1.0, 0.5], [0.5, 3.0]])
        one = QuadraticForm.constant(1.0, 2)
        assert np.array_equal(coeffs(qf_mul(x, one)), coeffs(x))

    def test_basis_mismatch(self):
        with pytest.raises(InvalidInputError):
            qf_add(QuadraticForm.zero(2), QuadraticForm.zero(3))

    def test_quadratic_is_symmetrized(self):
        x = QuadraticForm(0.0, [0.0, 0.0], [[0.0, 2.0], [0.0, 0.0]])
        assert np.array_equal(x.quadratic, [[0.0, 1.0], [1.0, 0.0]])

    @given(qforms(), qforms())
    def test_add_sub_inverse(self, x, y):
        assert np.allclose(coeffs(qf_sub(qf_add(x, y), y)), coeffs(x), rtol=0, atol=1e-12 * 4e3)

    @given(qforms(), qforms())
    def test_product_recipe(self, x, y):
        z = qf_mul(x, y)
        ref_q = y.central * x.quadratic + x.central * y.quadratic + np.outer(x.linear, y.linear)
        ref_q = 0.5 * (ref_q + ref_q.T)
        assert z.central == x.central * y.central
        assert np.allclose(z.linear, y.central * x.linear + x.central * y.linear, rtol=1e-12, atol=0)
        assert np.allclose(z.quadratic, ref_q, rtol=1e-12, atol=1e-9)

    @given(qforms(), qforms(), arrays(float, 3, elements=st.floats(-1, 1)))
    def test_affine_product_is_exact(self, x, y, eps):
        xa = QuadraticForm(x.central, x.linear, np.zeros((3, 3)))
        ya = QuadraticForm(y.central, y.linear, np.zeros((3, 3)))
        assert qf_mul(xa, ya)(eps) == pytest.approx(xa(eps) * ya(eps), rel=1e-9, abs=1e-6)

    def test_sum(self):
        parts = [q1(i, i, i) for i in range(4)]
        z = qf_sum(parts, 1)
        assert (z.central, z.linear[0], z.quadratic[0, 0]) == (6, 6, 6)


class TestLifting:
    def test_interval_input(self):
        noise = NoiseVector.from_inputs({"l": DSStructure.interval(8.96, 13.44)})
        x = qf_from_input("l", noise)
        assert x.central == pytest.approx(11.2) and x.linear[0] == pytest.approx(2.24)
        assert x([1.0]) == pytest.approx(13.44)

    def test_degenerate_input_is_constant(self):
        noise = NoiseVector.from_inputs({"p": DSStructure.degenerate(5.0)})
        x = qf_from_input("p", noise)
        assert x.is_constant and x.central == 5.0

    def test_unknown_input(self):
        with pytest.raises(InvalidInputError):
            qf_from_input("nope", NoiseVector.empty())

    def test_symbols_normalized(self):
        noise = bundled_noise()
        for s in noise.symbols:
            assert s.support[0] >= -1 - 1e-12 and s.support[1] <= 1 + 1e-12

    def test_round_trip_reproduces_input(self):
        noise = bundled_noise()
        for name in noise.names:
            j = noise.index(name)
            back = qf_to_ds(qf_from_input(name, noise), noise, 100)
            orig = noise.symbols[j].affine(noise.radii[j], noise.midpoints[j])
            assert np.allclose(np.sort(back.lo), np.sort(orig.lo), atol=1e-9)
            assert np.allclose(np.sort(back.hi), np.sort(orig.hi), atol=1e-9)


class TestConversion:
    def test_constant(self):
        x = qf_to_ds(QuadraticForm.constant(7.0, 3), bundled_noise())
        assert x.is_degenerate and x.support == (7.0, 7.0)

    def test_square_of_uniform_encloses_sqrt_cdf(self):
        n = 100
        edges = np.linspace(-1, 1, n + 1)
        noise = NoiseVector.from_inputs({"e": DSStructure(edges[:-1], edges[1:], np.full(n, 1 / n))})
        pb = to_pbox(qf_to_ds(QuadraticForm(0.0, [0.0], [[1.0]]), noise, n))
        t = np.unique(np.concatenate([pb.knots(), np.linspace(0, 1, 501)]))
        t = t[(t >= 0) & (t <= 1)]
        F = np.sqrt(t)
        assert np.all(pb.lower_cdf(t) <= F + 1e-12) and np.all(F <= pb.upper_cdf(t) + 1e-12)

    def test_monte_carlo_enclosure(self):
        noise = bundled_noise()
        rng = np.random.default_rng(7)
        x = QuadraticForm(3.0, rng.normal(size=3) * 10, rng.normal(size=(3, 3)) * 5)
        pb = to_pbox(qf_to_ds(x, noise, 100))
        N = 100_000
        vals = np.sort(x.evaluate_many(sample_noise(noise, N, rng)))
        grid = np.linspace(vals[0], vals[-1], 200)
        emp = np.searchsorted(vals, grid, side="right") / N
        slack = 3 / np.sqrt(N)
        assert np.all(pb.lower_cdf(grid) <= emp + slack)
        assert np.all(emp <= pb.upper_cdf(grid) + slack)

    def test_batch_matches_single(self):
        noise = bundled_noise()
        rng = np.random.default_rng(3)
        forms = [QuadraticForm(rng.normal(), rng.normal(size=3), rng.normal(size=(3, 3))) for _ in range(4)]
        lo, hi = batch_qf_to_ds([f.central for f in forms], [f.linear for f in forms],
                                [f.quadratic for f in forms], noise, 100)
        for j, f in enumerate(forms):
            one = qf_to_ds(f, noise, 100)
            assert np.allclose(np.sort(lo[j]), np.sort(one.lo)) and np.allclose(np.sort(hi[j]), np.sort(one.hi))

    def test_basis_mismatch(self):
        with pytest.raises(InvalidInputError):
            qf_to_ds(QuadraticForm.zero(2), bundled_noise())

    def test_text_format(self):
        text = q1(1, 2, 3).to_text()
        assert "1" in text and "2" in text and "3" in text
