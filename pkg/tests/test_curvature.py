import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsurf import curvature as cv
from hsurf.curvature import (Constant, ExpressionFunction, LambdaTranslator, NonUnitInput, Symmetry,
                             fibonacci_sphere, rotational_from_text)

E1, E3 = np.array([1.0, 0, 0]), np.array([0, 0, 1.0])
LATTICE = fibonacci_sphere()

unit_vectors = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: np.asarray(v) / np.linalg.norm(v))


def all_kinds():
    return [
        Constant(0.7),
        LambdaTranslator((0, 0, 1), 0.5),
        LambdaTranslator((1, 2, 2), -0.3),
        rotational_from_text("t^3 - t/2"),
        rotational_from_text("cos(t)", v=(0, 1, 0)),
        ExpressionFunction("x*y + sin(z)"),
    ]


class TestEval:
    def test_constant(self):
        assert Constant(1.0)(np.array([0.6, 0.8, 0.0])) == 1.0

    def test_translator(self):
        assert LambdaTranslator((0, 0, 1), 0.5)(E3) == pytest.approx(1.5)

    def test_rotational_odd_power(self):
        assert rotational_from_text("t^3")(-E3) == pytest.approx(-1.0)

    def test_rejects_non_unit(self):
        with pytest.raises(NonUnitInput):
            Constant(1.0)(np.array([1.0, 1e-5, 0.0]))
        with pytest.raises(NonUnitInput):
            Constant(1.0)(np.array([1.0, 0.0]))

    def test_accepts_near_unit(self):
        x = np.array([1.0 + 5e-13, 0.0, 0.0])
        assert LambdaTranslator((1, 0, 0), 0.0)(x) == pytest.approx(1.0, abs=1e-15)

    def test_vectorized(self):
        f = LambdaTranslator((0, 0, 1), 0.0)
        np.testing.assert_allclose(f(LATTICE), LATTICE[:, 2])

    def test_rotational_matches_profile_on_lattice(self):
        f = rotational_from_text("t^2 + 2*t")
        t = LATTICE @ E3
        assert np.max(np.abs(f(LATTICE) - (t**2 + 2 * t))) <= 1e-15


class TestFromGradient:
    def test_flat(self):
        assert LambdaTranslator((0, 0, 1), 0.0).eval_from_gradient([0.0, 0.0]) == 1.0

    def test_constant(self):
        assert Constant(2.0).eval_from_gradient([3.0, 4.0]) == 2.0

    def test_tilted(self):
        assert LambdaTranslator((0, 0, 1), 0.0).eval_from_gradient([1.0, 0.0]) == pytest.approx(1 / np.sqrt(2))

    def test_saturates(self):
        n = cv.graph_normal(np.array([1e300, 0.0]))
        assert np.all(np.isfinite(n)) and n[0] == pytest.approx(-1.0) and n[2] >= 0

    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_normal_formula(self, a, b):
        n = cv.graph_normal(np.array([a, b]))
        ref = np.array([-a, -b, 1.0]) / np.sqrt(1 + a * a + b * b)
        np.testing.assert_allclose(n, ref, atol=1e-14)


class TestDifferential:
    def test_constant(self):
        np.testing.assert_array_equal(Constant(3.0).differential(E1), np.zeros(3))

    def test_translator(self):
        np.testing.assert_allclose(LambdaTranslator((0, 0, 1), 0.2).differential(E1), E3)

    def test_rotational(self):
        np.testing.assert_allclose(rotational_from_text("t").differential(E1), E3)

    @pytest.mark.parametrize("f", all_kinds(), ids=lambda f: type(f).__name__)
    def test_matches_central_differences(self, f):
        x = LATTICE[::20]
        t1, t2 = cv.tangent_frame(x)
        D = f.differential(x)
        step = 1e-5
        for t in (t1, t2):
            fd = (f._value(np.cos(step) * x + np.sin(step) * t)
                  - f._value(np.cos(step) * x - np.sin(step) * t)) / (2 * step)
            assert np.max(np.abs(np.sum(D * t, axis=1) - fd)) <= 1e-8

    def test_tangential(self):
        f = LambdaTranslator((1, 1, 0), 0.0)
        D = f.differential(LATTICE)
        assert np.max(np.abs(np.sum(D * LATTICE, axis=1))) <= 1e-14


class TestExtrema:
    def test_constant(self):
        assert cv.extrema(Constant(1.0)) == (1.0, 1.0)

    def test_translator(self):
        assert cv.extrema(LambdaTranslator((0, 0, 1), 0.5)) == pytest.approx((-0.5, 1.5))

    def test_rotational_square(self):
        lo, hi = cv.extrema(rotational_from_text("t^2"))
        assert lo == pytest.approx(0.0, abs=1e-12) and hi == pytest.approx(1.0, abs=1e-12)

    def test_rotational_interior_maximum(self):
        lo, hi = cv.extrema(rotational_from_text("t - t^3"))
        assert hi == pytest.approx(2 / (3 * np.sqrt(3)), abs=1e-10)

    def test_expression(self):
        lo, hi = cv.extrema(ExpressionFunction("x + 2*y"))
        assert lo == pytest.approx(-np.sqrt(5), abs=1e-6) and hi == pytest.approx(np.sqrt(5), abs=1e-6)

    @pytest.mark.parametrize("f", all_kinds(), ids=lambda f: type(f).__name__)
    def test_bracket_lattice(self, f):
        lo, hi = cv.extrema(f)
        vals = f(LATTICE)
        assert lo - 1e-12 <= vals.min() and vals.max() <= hi + 1e-12

    def test_scaled(self):
        assert cv.extrema(LambdaTranslator((0, 0, 1), 0.5).scaled(-2.0)) == pytest.approx((-3.0, 1.0))


class TestSymmetries:
    def test_translator_reflection(self):
        assert cv.respects_reflection(LambdaTranslator((0, 0, 1), 0.0), (0, 1, 0))
        assert not cv.respects_reflection(LambdaTranslator((0, 0, 1), 0.0), (0, 0, 1))

    def test_expression_reflection(self):
        assert cv.respects_reflection(ExpressionFunction("x^2 + 2"), (1, 0, 0))
        assert not cv.respects_reflection(ExpressionFunction("x + 2"), (1, 0, 0))

    def test_odd(self):
        assert cv.is_odd(LambdaTranslator((0, 0, 1), 0.0))
        assert not cv.is_odd(Constant(1.0))
        assert cv.is_odd(ExpressionFunction("z^3"))
        assert cv.is_odd(ExpressionFunction("sin(z)"))
        assert not cv.is_odd(ExpressionFunction("z^2"))

    def test_declared_symmetry_short_circuits(self):
        f = ExpressionFunction("x + 2", declared_symmetries=(Symmetry("reflection", (1, 0, 0)),))
        assert cv.respects_reflection(f, (1, 0, 0))

    def test_rotational_axis(self):
        np.testing.assert_allclose(cv.rotational_axis(LambdaTranslator((0, 1, 0), 0.0)), (0, 1, 0))
        np.testing.assert_allclose(cv.rotational_axis(ExpressionFunction("z^2 + 1")), E3)
        assert cv.rotational_axis(ExpressionFunction("x*y")) is None

    def test_rotational_invariance(self):
        f = rotational_from_text("exp(t)")
        for angle in (0.3, 1.1, 2.9):
            c, s = np.cos(angle), np.sin(angle)
            Q = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
            assert np.max(np.abs(f(LATTICE @ Q.T) - f(LATTICE))) < 1e-12

    def test_axial_profile_of_expression(self):
        h, dh = cv.axial_profile(ExpressionFunction("z^3 - 1"))
        t = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(h(t), t**3 - 1, atol=1e-12)
        np.testing.assert_allclose(dh(t[1:-1]), 3 * t[1:-1] ** 2, atol=1e-6)

    def test_axial_profile_rejects(self):
        with pytest.raises(ValueError):
            cv.axial_profile(ExpressionFunction("x*y"))


@settings(max_examples=50)
@given(unit_vectors)
def test_normalization_idempotence(x):
    f = ExpressionFunction("x*y - z^2")
    assert f(x) == pytest.approx(f(x / np.linalg.norm(x)), abs=1e-15)


@settings(max_examples=50)
@given(unit_vectors, st.floats(-2, 2))
def test_translator_formula(x, lam):
    f = LambdaTranslator((0.0, 0.6, 0.8), lam)
    assert f(x) == pytest.approx(0.6 * x[1] + 0.8 * x[2] + lam, abs=1e-14)


class TestConfig:
    def test_kinds(self):
        assert cv.from_config({"kind": "constant", "h0": 2}) == Constant(2.0)
        f = cv.from_config({"kind": "translator", "w": [0, 0, 2], "lambda": 0.3})
        assert f.w == (0.0, 0.0, 1.0) and f.lam == 0.3
        assert cv.from_config({"kind": "rotational", "profile": "t^2"})(E3) == 1.0
        g = cv.from_config({"kind": "expr", "expr": "x + y",
                            "symmetries": [{"kind": "odd"}]})
        assert cv.is_odd(g)

    @pytest.mark.parametrize("cfg", [{"kind": "nope"}, {"kind": "rotational"}, {"kind": "expr"}])
    def test_errors(self, cfg):
        with pytest.raises(ValueError):
            cv.from_config(cfg)

    def test_describe(self):
        assert cv.describe(LambdaTranslator((0, 0, 1), 0.5)) == {"kind": "translator", "w": [0.0, 0.0, 1.0],
                                                                 "lambda": 0.5}
