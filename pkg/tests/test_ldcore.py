import itertools
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import GRID, LSMOOTH, first_sign, lex_ge, random_smooth, sympy_function
from ldserc.errors import DomainError, InvalidInputError, PreconditionError
from ldserc.ldcore import (
    DirectionsMatrix,
    LDVector,
    extract_l_derivative,
    fsign,
    ld_abs,
    ld_arith,
    ld_max,
    ld_mid,
    ld_min,
    ld_smooth_unary,
    lshift,
    slmax,
    taylor_approx,
    taylor_decay_ok,
    taylor_residual_profile,
)
from ldserc.modelkit import vector_function


def ld(v, row):
    return LDVector([v], [row])


def assert_ld(x, value, row):
    assert x.value.tolist() == [value]
    np.testing.assert_allclose(x.deriv[0], row, rtol=0, atol=1e-15)


# fsign / slmax / lshift


@pytest.mark.parametrize("v, want", [((0, 2, -2), 1), ((0, 0, 0), 0), ((-3, 5), -1),
                                     ((1e-13, -1), -1), ((0.0,), 0)])
def test_fsign_examples(v, want):
    assert fsign(v) == want


def test_fsign_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        fsign([0.0, math.nan])
    with pytest.raises(InvalidInputError):
        fsign([])


@pytest.mark.parametrize("a, b, want", [
    ([0, 0, 0, 0, 0], [0.4, 0.1, 0.2, 0.3, 0.5], [0.1, 0.2, 0.3, 0.5]),
    ([1, 7, 7], [1, 7, 7], [7, 7]),
    ([0, 0, 2], [0, 0, -1], [0, 2]),
])
def test_slmax_examples(a, b, want):
    assert slmax(a, b).tolist() == want


def test_slmax_tie_prefers_first_argument():
    a = np.array([1.0, 2.0, 3.0])
    b = a.copy()
    out = slmax(a, b)
    assert out.tolist() == [2.0, 3.0]


def test_slmax_errors():
    with pytest.raises(InvalidInputError):
        slmax([1, 2], [1, 2, 3])
    with pytest.raises(InvalidInputError):
        slmax([1], [2])


def test_lshift_examples():
    assert lshift([[0, 0, 1]]).tolist() == [[0, 1]]
    assert lshift(np.eye(3)).tolist() == np.eye(3)[:, 1:].tolist()
    assert lshift([[1, 2], [3, 4]]).tolist() == [[2], [4]]
    with pytest.raises(InvalidInputError):
        lshift([[1], [2]])


def test_fsign_slmax_exhaustive_small():
    # quick version of the acceptance sweep, k <= 2
    vals = (-1.0, 0.0, 1.0)
    for n in range(1, 4):
        for v in itertools.product(vals, repeat=n):
            assert fsign(v) == first_sign(v)
        if n >= 2:
            for a in itertools.product(vals, repeat=n):
                for b in itertools.product(vals, repeat=n):
                    want = (a if lex_ge(a, b) else b)[1:]
                    assert tuple(slmax(a, b)) == want


# elemental rules


def test_ld_abs_examples():
    assert_ld(ld_abs(ld(1, [5, 2])), 1, [5, 2])
    assert_ld(ld_abs(ld(0, [0, 3, -1])), 0, [0, 3, -1])
    assert_ld(ld_abs(ld(-2, [1, 1])), 2, [-1, -1])
    assert_ld(ld_abs(ld(0, [0, -3, 1])), 0, [0, 3, -1])


def test_ld_max_examples():
    r = [0.1, -0.2, 0.3, 0.4]
    assert_ld(ld_max(ld(0, [0, 0, 0, 0]), ld(0.6, r)), 0.6, r)
    assert_ld(ld_max(ld(3, [1]), ld(3, [1])), 3, [1])
    assert_ld(ld_max(ld(0, [0, 2]), ld(0, [0, -1])), 0, [0, 2])
    with pytest.raises(InvalidInputError):
        ld_max(ld(0, [1]), ld(0, [1, 2]))


def test_ld_min_mid_examples():
    assert_ld(ld_min(ld(2, [1]), ld(5, [9])), 2, [1])
    assert_ld(ld_min(ld(0, [1, 0]), ld(0, [0, 1])), 0, [0, 1])
    assert_ld(ld_mid(ld(3, [7]), ld(1, [8]), ld(2, [9])), 2, [9])
    assert_ld(ld_mid(ld(1, [7]), ld(2, [8]), ld(3, [9])), 2, [8])


def test_ld_min_matches_negated_max_identity():
    vals = (-1.0, 0.0, 1.0)
    for a in itertools.product(vals, repeat=3):
        for b in itertools.product(vals, repeat=3):
            x, y = ld(a[0], a[1:]), ld(b[0], b[1:])
            lo = ld_min(x, y)
            want = -ld_max(-x, -y)
            assert lo.value.tolist() == want.value.tolist()
            assert lo.deriv.tolist() == want.deriv.tolist()


def test_ld_mid_matches_brute_force_median_path():
    # mid of three values along a ray: lexicographic median of (value, row) triples
    vals = (-1.0, 0.0, 1.0)
    for a in itertools.product(vals, repeat=2):
        for b in itertools.product(vals, repeat=2):
            for c in itertools.product(vals, repeat=2):
                got = ld_mid(ld(a[0], a[1:]), ld(b[0], b[1:]), ld(c[0], c[1:]))
                med = sorted([a, b, c])[1]
                assert got.value[0] == med[0]
                assert got.deriv[0].tolist() == list(med[1:])


def test_ld_arith_examples():
    assert_ld(ld_arith("mul", ld(2, [1, 0]), ld(3, [0, 1])), 6, [3, 2])
    assert_ld(ld_arith("add", ld(1.5, [4, 5]), ld(0, [0, 0])), 1.5, [4, 5])
    assert_ld(ld_arith("div", ld(1, [1]), ld(2, [0])), 0.5, [0.5])
    assert_ld(ld_arith("neg", ld(1, [2])), -1, [-2])
    with pytest.raises(DomainError):
        ld_arith("div", ld(1, [1]), ld(1e-13, [0]))
    with pytest.raises(InvalidInputError):
        ld_arith("pow", ld(1, [1]), ld(1, [1]))


def test_ld_div_matches_central_difference():
    # quotient of two smooth paths, derivative along s at s = 0
    x = lambda s: 1.0 + s
    y = lambda s: 2.0 - 0.5 * s
    h = 1e-6
    fd = (x(h) / y(h) - x(-h) / y(-h)) / (2 * h)
    got = ld_arith("div", ld(1, [1]), ld(2, [-0.5]))
    assert got.deriv[0, 0] == pytest.approx(fd, abs=1e-9)


def test_smooth_unary_examples():
    assert_ld(ld_smooth_unary("exp", ld(0, [1, 2])), 1, [1, 2])
    assert_ld(ld_smooth_unary("sin", ld(0, [3])), 0, [3])
    assert_ld(ld_smooth_unary("log", ld(1, [2])), 0, [2])
    assert_ld(ld_smooth_unary("pow_const", ld(2, [1]), p=3), 8, [12])
    with pytest.raises(DomainError):
        ld_smooth_unary("log", ld(0, [1]))
    with pytest.raises(DomainError):
        ld_smooth_unary("sqrt", ld(-1, [1]))


def test_operator_overloads_agree_with_functions():
    x = LDVector([1.5, -0.5], [[1, 0], [0, 1]])
    y = LDVector([2.0, 3.0], [[0.5, 1], [1, -1]])
    for got, want in [(x + y, ld_arith("add", x, y)), (x - y, ld_arith("sub", x, y)),
                      (x * y, ld_arith("mul", x, y)), (x / y, ld_arith("div", x, y)),
                      (-x, ld_arith("neg", x)), (abs(x), ld_abs(x))]:
        assert got.value.tolist() == want.value.tolist()
        assert got.deriv.tolist() == want.deriv.tolist()
    z = 2.0 * x + 1.0
    assert z.deriv.tolist() == (2 * x.deriv).tolist()


def test_ldvector_is_immutable():
    x = LDVector([1.0], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        x.deriv[0, 0] = 5.0


# L-derivatives and approximants


def test_directions_matrix():
    M = DirectionsMatrix.canonical([0.3, -2.0])
    assert M.is_canonical and M.full_row_rank
    assert (M.n, M.k) == (2, 3)
    assert not DirectionsMatrix([[1.0, 2.0], [2.0, 4.0]]).full_row_rank
    assert not DirectionsMatrix([[1.0], [0.0]]).full_row_rank


def test_extract_l_derivative_examples():
    M = DirectionsMatrix.canonical([0.7, -0.2])
    assert extract_l_derivative([[0, 0, 1]], M).tolist() == [[0, 1]]
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(extract_l_derivative(A, np.eye(2)), A, atol=1e-14)
    t = 0.37
    ld_row = [[math.exp(t) - 1, 1 - math.exp(t), math.exp(t)]]
    J = extract_l_derivative(ld_row, DirectionsMatrix.canonical([-1.0, 0.0]))
    np.testing.assert_allclose(J, [[1 - math.exp(t), math.exp(t)]], atol=1e-15)


def test_extract_l_derivative_general_directions():
    rng = np.random.default_rng(3)
    J = rng.normal(size=(2, 3))
    M = rng.normal(size=(3, 5))
    np.testing.assert_allclose(extract_l_derivative(J @ M, M), J, atol=1e-10)
    with pytest.raises(PreconditionError):
        extract_l_derivative(np.zeros((1, 2)), [[1.0, 2.0], [2.0, 4.0]])


def test_taylor_approx_examples():
    f = vector_function(["(abs (- (* x0 x0) (* x1 x1)))"], 2)
    for h in (0.1, 1e-3):
        assert taylor_approx(f, [1, 1], [h, 0])[0] == pytest.approx(2 * h, abs=1e-15)
    assert taylor_approx(f, [1, 1], [0, 0])[0] == 0.0
    q = vector_function(["(+ (* x0 x1) (* 3 (* x1 x1)))"], 2)
    d = np.array([1e-3, -2e-3])
    want = 1 * 2 + 3 * 4 + np.array([2.0, 1 + 12]) @ d
    assert taylor_approx(q, [1, 2], d)[0] == pytest.approx(want, abs=1e-14)


def test_taylor_residual_profile_examples():
    scales = [1e-1, 1e-2, 1e-3]
    lin = vector_function(["(+ (* 2 x0) (- x1 3))"], 2)
    # zero up to the rounding of f(x0 + a d), amplified by 1/a
    assert np.all(taylor_residual_profile(lin, [0.3, 0.4], [0.6, 0.8], scales) <= 1e-12)
    absf = vector_function(["(abs x0)"], 1)
    assert np.all(taylor_residual_profile(absf, [0.0], [1.0], scales) == 0)
    f = vector_function(["(abs (- (* x0 x0) (* x1 x1)))"], 2)
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        alphas = [1e-2 / 2 ** i for i in range(6)]
        r = taylor_residual_profile(f, [1, 1], d, alphas)
        assert np.all(r[1:] <= 0.6 * r[:-1] + 1e-14)
    with pytest.raises(InvalidInputError):
        taylor_residual_profile(f, [1, 1], [1, 0], [1e-2, 1e-1])


def test_taylor_decay_ok():
    assert taylor_decay_ok([1e-1, 1e-2, 1e-3], [1e-1, 1e-2, 1e-3])
    assert not taylor_decay_ok([1e-1, 1e-2, 1e-3], [1.0, 1.0, 1.0])
    assert taylor_decay_ok([1e-1, 1e-2, 1e-3], [0.0, 0.0, 0.0])


# properties


def _ld_eval(text, x0, M):
    f = vector_function([text], 3)
    return f(LDVector.seed(x0, M))


@settings(max_examples=60, deadline=None)
@given(
    idx=st.integers(0, len(LSMOOTH) - 1),
    x=st.lists(st.sampled_from(GRID.tolist()), min_size=3, max_size=3),
    d=st.lists(st.integers(-2, 2), min_size=3, max_size=3),
    c=st.floats(0.1, 10.0),
)
def test_positive_homogeneity(idx, x, d, c):
    M = DirectionsMatrix.canonical(np.array(d, dtype=float))
    base = _ld_eval(LSMOOTH[idx], x, M)
    scaled = _ld_eval(LSMOOTH[idx], x, c * M.entries)
    np.testing.assert_allclose(scaled.deriv, c * base.deriv, rtol=1e-12, atol=1e-12)
    assert scaled.value.tolist() == base.value.tolist()


def test_smooth_recovery_matches_symbolic_jacobian():
    rng = np.random.default_rng(5)
    for _ in range(25):
        text, sym = random_smooth(rng)
        fval, grad = sympy_function(sym)
        x0 = rng.uniform(-1, 1, size=2)
        M = rng.normal(size=(2, 3))
        out = vector_function([text], 2)(LDVector.seed(x0, M))
        assert out.value[0] == pytest.approx(fval(x0), rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(out.deriv[0], grad(x0) @ M, rtol=1e-10, atol=1e-10)


def test_chain_rule_is_bit_identical():
    inner = ["(max x0 (neg x1))", "(abs (- (* x0 x1) x2))"]
    outer = ["(mid x0 (* 2 x1) (sin x0))", "(abs (- x0 x1))"]
    pat = re.compile(r"\bx(\d+)\b")
    composite = [pat.sub(lambda m: inner[int(m.group(1))], g) for g in outer]
    f = vector_function(inner, 3)
    g = vector_function(outer, 2)
    h = vector_function(composite, 3)
    rng = np.random.default_rng(8)
    for _ in range(50):
        x0 = rng.choice(GRID, size=3)
        M = DirectionsMatrix.canonical(rng.normal(size=3))
        seed = LDVector.seed(x0, M)
        two_pass = g(f(seed))
        one_pass = h(seed)
        assert two_pass.value.tobytes() == one_pass.value.tobytes()
        assert two_pass.deriv.tobytes() == one_pass.deriv.tobytes()


def test_affine_functions_give_exact_jacobian_times_directions():
    rng = np.random.default_rng(2)
    f = vector_function(["(+ (* 2 x0) (- (* -3 x1) 0.5))"], 2)
    for _ in range(10):
        M = rng.normal(size=(2, 4))
        out = f(LDVector.seed(rng.normal(size=2), M))
        np.testing.assert_allclose(out.deriv[0], np.array([2.0, -3.0]) @ M, atol=1e-14)
