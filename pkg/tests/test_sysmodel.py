import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sampled_ioss import compfn, sysmodel
from sampled_ioss.exprparse import DimensionError, ParseError, UnknownSymbolError, parse_program, to_text
from sampled_ioss.sysmodel import builtin, simulate_pair, step

R = 1 / math.sqrt(2)


class TestStep:
    def test_rotation(self):
        np.testing.assert_allclose(step(builtin("rotation8"), [1.0, 0.0]), [R, -R], rtol=0, atol=1e-15)

    def test_scalar_unstable(self):
        assert step(builtin("scalar_unstable", a=2), [1.0], [0.0])[0] == 2.0

    def test_stabilizing_input_value(self):
        s = builtin("scalar_unstable_input", a=2)
        assert step(s, [1.0], [-1.5])[0] == 0.5

    def test_contraction(self):
        assert step(builtin("contraction"), [1.0], [0.0])[0] == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(sysmodel.DimensionMismatch):
            step(builtin("rotation8"), [1.0, 0.0, 0.0])


def test_catalog_matrices():
    s = builtin("rotation8")
    assert (s.n, s.q, s.p) == (2, 0, 1)
    np.testing.assert_allclose(s.A, [[R, R], [-R, R]])
    np.testing.assert_array_equal(s.C, [[1.0, 0.0]])
    assert builtin("scalar_unstable", a=0.5).meta["warning"].startswith("not unstable")
    with pytest.raises(ValueError):
        builtin("nonexistent")


def test_simulate_rotation_preserves_norm():
    pair = simulate_pair(builtin("rotation8"), [0.0, 1.0], [0.0, 0.0], T=8)
    np.testing.assert_allclose(pair.dx, np.ones(9), rtol=1e-14)


def test_simulate_scalar_unstable():
    pair = simulate_pair(builtin("scalar_unstable", a=2), [1.0], [0.0], T=5)
    np.testing.assert_array_equal(pair.dx, [1, 2, 4, 8, 16, 32])


def test_identical_trajectories(rng):
    s = builtin("contraction")
    x = rng.normal(size=1)
    w = rng.normal(size=(20, 1))
    pair = simulate_pair(s, x, x, w, w, 20)
    assert not pair.dx.any() and not pair.dy.any() and not pair.dw.any()


def test_loop_and_closed_form_agree(rng):
    s = builtin("spiral", rho=1.02, theta_deg=30)
    x1, x2 = rng.normal(size=2), rng.normal(size=2)
    fast = simulate_pair(s, x1, x2, T=40)
    X1, _ = sysmodel._loop_traj(s, x1, np.zeros((40, 0)), 40)
    np.testing.assert_allclose(fast.states1, X1, rtol=1e-12, atol=1e-14)


def test_simulation_deterministic(rng):
    s = builtin("contraction")
    w = rng.normal(size=(30, 1))
    a = simulate_pair(s, [0.3], [-0.2], w, None, 30)
    b = simulate_pair(s, [0.3], [-0.2], w, None, 30)
    assert np.array_equal(a.states1, b.states1) and np.array_equal(a.dw, b.dw)


def test_short_input_rejected():
    with pytest.raises(sysmodel.DimensionMismatch):
        simulate_pair(builtin("contraction"), [0.0], [1.0], np.zeros((3, 1)), None, 5)


def test_inputs_ignored_without_channels():
    pair = simulate_pair(builtin("rotation8"), [1.0, 0.0], [0.0, 0.0], np.ones((4, 3)), None, 4)
    assert pair.w1.shape == (4, 0)


def test_stabilizing_input_contracts_then_diverges():
    s = builtin("scalar_unstable_input", a=2)
    pair = simulate_pair(s, [0.0], [1.0], None, sysmodel.StabilizingInput(2.0, 10), 15)
    np.testing.assert_allclose(pair.dx[:11], 0.5 ** np.arange(11))
    np.testing.assert_allclose(pair.dx[10:], 0.5 ** 10 * 2.0 ** np.arange(6))
    assert pair.w2[0, 0] == -1.5


def test_pair_csv_header():
    text = sysmodel.pair_to_csv(simulate_pair(builtin("rotation8"), [1, 0], [0, 0], T=2))
    assert text.splitlines()[0] == "t,x1_1,x1_2,x2_1,x2_2,dx,dy"
    assert len(text.splitlines()) == 4


class TestParse:
    def test_contraction_text(self):
        s = sysmodel.parse_system("x1' = 0.5*x1 + w1 ; y1 = x1")
        assert (s.n, s.q, s.p) == (1, 1, 1)
        assert step(s, [1.0], [0.0])[0] == 0.5

    def test_unstable_text(self):
        s = sysmodel.parse_system("x1' = 2*x1 ; y1 = x1")
        assert step(s, [1.5])[0] == 3.0 and s.q == 0

    def test_dangling_operator(self):
        with pytest.raises(ParseError) as e:
            sysmodel.parse_system("x1' = x1 + ; y1 = x1")
        assert (e.value.line, e.value.col) == (1, 10)
        assert "dangling" in str(e.value)

    def test_missing_output_index(self):
        with pytest.raises(DimensionError, match="y2 defined but y1 missing"):
            sysmodel.parse_system("x1' = x1\ny2 = x1")

    def test_unknown_symbol(self):
        with pytest.raises(UnknownSymbolError):
            sysmodel.parse_system("x1' = z*x1\ny1 = x1")
        with pytest.raises(UnknownSymbolError):
            sysmodel.parse_system("x1' = tan(x1)\ny1 = x1")

    def test_precedence(self):
        s = sysmodel.parse_system("x1' = -2^2 + 2*3^2^0.5*0 + 8/4/2\ny1 = x1")
        # -(2^2) + 0 + (8/4)/2
        assert step(s, [0.0])[0] == -3.0
        s = sysmodel.parse_system("x1' = 2^3^2\ny1 = x1")
        assert step(s, [0.0])[0] == 512.0

    def test_functions(self):
        s = sysmodel.parse_system("x1' = max(x1, 0.5, -1) + min(abs(x1), 3)\nx2' = sqrt(exp(0)) * cos(0) + sin(0)\ny1 = x2")
        np.testing.assert_allclose(step(s, [-2.0, 0.0]), [2.5, 1.0])

    def test_comments_and_blank_lines(self):
        s = sysmodel.parse_system("# a comment\n\nx1' = x1  # trailing\ny1 = x1\n")
        assert s.n == 1


_exprs = st.recursive(
    st.one_of(st.sampled_from(["x1", "x2", "w1"]), st.integers(0, 9).map(str), st.just("0.25")),
    lambda e: st.one_of(
        st.tuples(e, st.sampled_from(["+", "-", "*"]), e).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
        e.map(lambda x: f"({x})"),
        e.map(lambda x: f"-{x}"),
        e.map(lambda x: f"sin({x})"),
        st.tuples(e, e).map(lambda t: f"max({t[0]}, {t[1]})"),
    ),
    max_leaves=8,
)


@settings(max_examples=60)
@given(_exprs, _exprs)
def test_pretty_print_roundtrip(e1, e2):
    src = f"x1' = {e1}\nx2' = {e2}\ny1 = x1"
    s = sysmodel.parse_system(src)
    s2 = sysmodel.parse_system(sysmodel.pretty(s))
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, (100, 2))
    W = rng.uniform(-2, 2, (100, s.q)) if s.q else np.zeros((100, 0))
    np.testing.assert_array_equal(s.f(X, W), s2.f(X, W))


def test_to_text_is_parenthesized():
    prog = parse_program("x1' = 1 + 2*x1\ny1 = x1")
    assert to_text(prog[0].expr) == "(1.0 + (2.0 * x1))"


class TestLoad:
    def test_catalog_call(self):
        s = sysmodel.load_system("spiral(rho=0.9, theta_deg=25)")
        assert s.is_linear and s.n == 2

    def test_inline_json(self):
        s = sysmodel.load_system('{"A": [[0.5]], "B": [[1]], "C": [[1]]}')
        assert step(s, [2.0], [1.0])[0] == 2.0

    def test_file(self, tmp_path):
        p = tmp_path / "sys.txt"
        p.write_text("x1' = 0.5*x1 + w1\ny1 = x1\n")
        assert sysmodel.load_system(str(p)).q == 1

    def test_inline_text(self):
        assert sysmodel.load_system("x1' = 2*x1; y1 = x1").n == 1


class TestModulus:
    def test_identity_output(self):
        f = sysmodel.estimate_modulus(builtin("contraction"), "output", [[-1, 1]], 500, seed=1)
        assert f(1.0) == pytest.approx(1.1)
        assert f.meta["estimated"]

    def test_rotation_output(self):
        f = sysmodel.estimate_modulus(builtin("rotation8"), "output", [[-1, 1], [-1, 1]], 2000, seed=1)
        assert 1.0 < f(1.0) <= 1.1 + 1e-12

    def test_unstable_transition(self):
        f = sysmodel.estimate_modulus(builtin("scalar_unstable", a=2), "transition", [[-1, 1]], 500, seed=1)
        assert f(1.0) == pytest.approx(2.2)

    def test_dominates_and_is_k(self, rng):
        s = builtin("spiral", rho=1.1, theta_deg=40)
        f = sysmodel.estimate_modulus(s, "output", [[-1, 1], [-1, 1]], 1000, seed=3)
        assert compfn.verify_class(f).consistent
        x1, x2 = rng.uniform(-1, 1, (1000, 2)), rng.uniform(-1, 1, (1000, 2))
        lhs = np.linalg.norm(s.h(x1) - s.h(x2), axis=1)
        # |C dx| <= |dx| exactly, and the estimate is at least the sampled envelope
        assert np.all(lhs <= f(np.linalg.norm(x1 - x2, axis=1)) + 1e-12)

    def test_degenerate_box(self):
        with pytest.raises(ValueError):
            sysmodel.estimate_modulus(builtin("contraction"), "output", [[1, 1]], 500)


def test_zero_state_stays_zero_when_powers_overflow():
    # A^t overflows for t > 1024; the zero trajectory must not turn into nan
    pair = simulate_pair(builtin("scalar_unstable", a=2), [0.0], [1e-300], T=1100)
    assert pair.states1[-1, 0] == 0.0
    assert np.isfinite(pair.dx[:1000]).all()
