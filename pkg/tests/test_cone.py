import math

import numpy as np
import pytest
import sympy as sp
from fractions import Fraction
from hypothesis import given, strategies as st

from sphere_approx.cone import (
    ConeVector,
    DimensionError,
    GroupElement,
    ValidationError,
    apply,
    bracket,
    embed_K,
    eval_Q,
    identity,
    iwasawa_decompose,
    make_g_t,
    make_u_y,
    random_group_element,
    random_rotation,
    u_y_entries,
)

dims = st.sampled_from([1, 2, 3])
small = st.floats(-5, 5, allow_nan=False)


def test_eval_Q_examples():
    assert eval_Q((0, 1, 1)) == 0
    assert eval_Q((0, 0, 0, 1, 1)) == 0
    assert eval_Q((3, 4, 5)) == 0
    assert eval_Q((1, 0, 0)) == 1
    with pytest.raises(DimensionError):
        eval_Q((1, 2))


def test_eval_Q_exact_for_big_ints():
    q = 3 * 10**9
    assert eval_Q((0, q, q)) == 0
    assert eval_Q((1, q, q)) == 1


def test_cone_vector_checks():
    ConeVector((3, 4, 5))
    with pytest.raises(ValidationError):
        ConeVector((3, 4, 6))
    with pytest.raises(ValidationError):
        ConeVector((-3, -4, -5))
    ConeVector(np.array([0.6, 0.8, 1.0]))
    with pytest.raises(ValidationError):
        ConeVector(np.array([0.6, 0.8, 1.01]))


def test_g_t_examples():
    assert np.array_equal(make_g_t(0.0, 2).matrix, np.eye(4))
    x = np.array([0.0, 1.0, 1.0])
    assert bracket(apply(make_g_t(math.log(2), 1), 2 * x)) == pytest.approx(2.0)
    assert bracket(apply(make_g_t(math.log(2), 1), x)) == pytest.approx(1.0)


@given(dims, small, small)
def test_g_t_one_parameter(n, a, b):
    lhs = make_g_t(a, n).matrix @ make_g_t(b, n).matrix
    rhs = make_g_t(a + b, n).matrix
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


@given(dims, st.data())
def test_u_y_one_parameter(n, data):
    y = np.array(data.draw(st.lists(st.floats(-5 / math.sqrt(3), 5 / math.sqrt(3)), min_size=n, max_size=n)))
    z = np.array(data.draw(st.lists(st.floats(-5 / math.sqrt(3), 5 / math.sqrt(3)), min_size=n, max_size=n)))
    lhs = make_u_y(y).matrix @ make_u_y(z).matrix
    assert np.max(np.abs(lhs - make_u_y(y + z).matrix)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_u_y_group_law_symbolic(n):
    # oracle: symbolic matrix product
    y = sp.symbols(f"y1:{n + 1}")
    z = sp.symbols(f"z1:{n + 1}")
    U = lambda v: sp.Matrix(u_y_entries(list(v)))
    diff = (U(y) * U(z) - U([a + b for a, b in zip(y, z)])).applyfunc(sp.expand)
    assert diff == sp.zeros(n + 2, n + 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_u_y_preserves_form_symbolic(n):
    y = sp.symbols(f"y1:{n + 1}")
    U = sp.Matrix(u_y_entries(list(y)))
    J = sp.diag(*([1] * (n + 1) + [-1]))
    assert (U.T * J * U - J).applyfunc(sp.expand) == sp.zeros(n + 2, n + 2)
    assert sp.expand(U.det()) == 1


@given(dims, st.data())
def test_horospherical_difference_identity_exact(n, data):
    fr = st.fractions(min_value=-20, max_value=20, max_denominator=50)
    y = data.draw(st.lists(fr, min_size=n, max_size=n))
    x = data.draw(st.lists(fr, min_size=n + 2, max_size=n + 2))
    U = u_y_entries(y)
    ux = [sum(U[i][j] * x[j] for j in range(n + 2)) for i in range(n + 2)]
    assert ux[-1] - ux[-2] == x[-1] - x[-2]


def test_horospherical_difference_identity_float(rng):
    for n in (1, 2, 3):
        for _ in range(50):
            y = rng.uniform(-3, 3, n)
            x = rng.standard_normal(n + 2)
            ux = apply(make_u_y(y), x)
            assert ux[-1] - ux[-2] == pytest.approx(x[-1] - x[-2], abs=1e-12 * (1 + np.abs(x).max()) * (1 + y @ y))


def test_embed_K(rng):
    for n in (1, 2, 3):
        assert np.array_equal(embed_K(np.eye(n + 1)).matrix, np.eye(n + 2))
        k = embed_K(random_rotation(n + 1, rng))
        e = np.zeros(n + 2)
        e[-1] = 1
        assert np.array_equal(apply(k, e), e)
        x = rng.standard_normal(n + 2)
        assert eval_Q(apply(k, x)) == pytest.approx(eval_Q(x), abs=1e-9)
    with pytest.raises(ValidationError):
        embed_K(np.diag([1.0, -1.0]))
    with pytest.raises(ValidationError):
        embed_K(2 * np.eye(2))


def test_bracket_examples():
    assert bracket(ConeVector((0, 1, 1))) == 2
    assert bracket(ConeVector((3, 4, 5))) == 9


@given(dims, st.floats(-3, 3), st.data())
def test_bracket_equivariance(n, t, data):
    v = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=n + 1, max_size=n + 1)))
    x = np.append(v, np.linalg.norm(v))
    if np.linalg.norm(v) < 1e-3:
        return
    got = bracket(apply(make_g_t(t, n), x))
    want = math.exp(-t) * bracket(x)
    assert abs(got - want) <= 1e-9 * max(abs(want), np.linalg.norm(v) * math.exp(abs(t)) * 1e-3)


def test_bracket_equivariance_symbolic():
    t = sp.symbols("t", real=True)
    a, b = sp.symbols("a b", real=True)
    G = sp.Matrix([[1, 0, 0], [0, sp.cosh(t), -sp.sinh(t)], [0, -sp.sinh(t), sp.cosh(t)]])
    x = sp.Matrix([a, b, sp.sqrt(a**2 + b**2)])
    gx = G * x
    assert sp.simplify((gx[2] + gx[1] - sp.exp(-t) * (x[2] + x[1])).rewrite(sp.exp)) == 0


def test_group_element_validation():
    with pytest.raises(ValidationError):
        GroupElement(np.diag([1.0, 1.0, -1.0]))  # reverses time
    with pytest.raises(ValidationError):
        GroupElement(np.diag([1.0, -1.0, 1.0]))  # det -1
    with pytest.raises(DimensionError):
        GroupElement(np.eye(6))
    GroupElement(make_g_t(20.0, 1).matrix)


def test_iwasawa_identity():
    f = iwasawa_decompose(identity(2))
    assert f.t == 0 and np.all(f.y == 0) and np.array_equal(f.k.matrix, np.eye(4))


def test_iwasawa_recovers_factors(rng):
    for n in (1, 2, 3):
        for _ in range(20):
            y0 = rng.uniform(-2, 2, n)
            t0 = float(rng.uniform(-3, 3))
            R = random_rotation(n + 1, rng)
            g = make_u_y(y0) @ make_g_t(t0, n) @ embed_K(R)
            f = iwasawa_decompose(g)
            assert np.allclose(f.y, y0, atol=1e-9)
            assert f.t == pytest.approx(t0, abs=1e-9)
            assert np.allclose(f.rotation(), R, atol=1e-9)


def test_iwasawa_round_trip_random_products(rng):
    for i in range(100):
        n = 1 + i % 3
        g = identity(n)
        for _ in range(4):
            g = g @ random_group_element(n, rng, 1.0)
        f = iwasawa_decompose(g)
        assert np.max(np.abs(f.reconstruct().matrix - g.matrix)) <= 1e-9 * max(1.0, np.abs(g.matrix).max())


def test_stabilizer_of_e1(rng):
    for n in (1, 2, 3):
        m = np.eye(n + 1)
        m[:n, :n] = random_rotation(n, rng) if n > 1 else np.eye(1)
        g = make_u_y(rng.uniform(-2, 2, n)) @ embed_K(m)
        e1 = np.zeros(n + 2)
        e1[-2:] = 1
        assert np.allclose(apply(g, e1), e1, atol=1e-12)


def test_form_preservation(rng):
    for n in (1, 2, 3):
        for _ in range(50):
            g = random_group_element(n, rng, 2.0)
            x = rng.standard_normal(n + 2) * 3
            assert abs(eval_Q(apply(g, x)) - eval_Q(x)) <= 1e-9 * (1 + x @ x) * max(1.0, np.abs(g.matrix).max()) ** 2


def test_apply_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply(identity(1), np.zeros(4))
