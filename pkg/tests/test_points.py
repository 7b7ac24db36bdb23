import io
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphere_approx.cone import ConeVector, make_g_t, make_u_y, ValidationError
from sphere_approx.points import (
    LatticeDescriptor,
    RangeError,
    RationalApproximate,
    all_points_array,
    dumps_points,
    enumerate_all,
    enumerate_in_region,
    enumerate_near,
    is_primitive,
    read_points,
    scan_near,
    tube_points,
)


def brute_all(q_max, n):
    """Every (p, q) with |p_i| <= q and sum p_i^2 = q^2, plain Python."""
    out = set()
    for q in range(1, q_max + 1):
        for p in itertools.product(range(-q, q + 1), repeat=n + 1):
            if sum(v * v for v in p) == q * q:
                out.add((p, q))
    return out


def as_set(points):
    return {(a.p, a.q) for a in points}


def unit(rng, n):
    a = rng.standard_normal(n + 1)
    return a / np.linalg.norm(a)


def test_enumerate_all_small_examples():
    pts = enumerate_all(5, 1)
    assert sum(1 for a in pts if a.q == 5) == 12
    assert as_set(enumerate_all(1, 1)) == {((1, 0), 1), ((-1, 0), 1), ((0, 1), 1), ((0, -1), 1)}


@pytest.mark.parametrize("n,q_max", [(1, 100), (2, 20), (3, 8)])
def test_enumerate_all_matches_brute_force(n, q_max):
    assert as_set(enumerate_all(q_max, n)) == brute_all(q_max, n)


def test_enumerate_all_order():
    q, P = all_points_array(30, 2)
    keys = list(zip(q.tolist(), P.tolist()))
    assert keys == sorted(keys)


def test_multiples_and_symmetry():
    n, q_max = 2, 24
    s = as_set(enumerate_all(q_max, n))
    for p, q in list(s):
        for k in range(2, q_max // q + 1):
            assert (tuple(k * v for v in p), k * q) in s
        for perm in itertools.permutations(range(n + 1)):
            for signs in itertools.product((1, -1), repeat=n + 1):
                assert (tuple(signs[i] * p[perm[i]] for i in range(n + 1)), q) in s


def test_primitive_flags():
    assert is_primitive(RationalApproximate.make((3, 4), 5))
    assert not is_primitive(RationalApproximate.make((6, 8), 10))
    assert is_primitive(RationalApproximate.make((0, 1), 1))
    for a in enumerate_all(30, 2):
        assert a.primitive == (math.gcd(a.q, *a.p) == 1)
    with pytest.raises(ValidationError):
        RationalApproximate((3, 4), 5, False)
    with pytest.raises(ValidationError):
        RationalApproximate((3, 5), 5, True)


def test_enumerate_near_examples():
    assert as_set(enumerate_near([0.0, 1.0], 0.5, 1, 10)) == {((0, q), q) for q in range(1, 11)}
    got = as_set(enumerate_near([0.6, 0.8], 0.1, 1, 10))
    assert ((3, 4), 5) in got and ((6, 8), 10) in got
    assert as_set(enumerate_near([1.0, 0.0, 0.0], 0.5, 1, 5)) == {((q, 0, 0), q) for q in range(1, 6)}


def test_exact_rational_mode_matches_float_mode():
    alpha = [Fraction(3, 5), Fraction(4, 5)]
    exact = as_set(enumerate_near(alpha, Fraction(1, 10), 1, 50))
    assert exact == {((3 * k, 4 * k), 5 * k) for k in range(1, 11)}
    assert as_set(enumerate_near([0.6, 0.8], 0.1, 1, 50)) == exact
    a3 = [Fraction(1, 3), Fraction(2, 3), Fraction(2, 3)]
    assert as_set(enumerate_near(a3, 1, 1, 30)) == as_set(enumerate_near([1 / 3, 2 / 3, 2 / 3], 1.0, 1, 30))
    with pytest.raises(ValidationError):
        enumerate_near([Fraction(1, 2), Fraction(1, 2)], 1, 1, 5)


@settings(max_examples=40)
@given(st.integers(0, 2**32), st.sampled_from([1, 2]), st.floats(0.05, 3.0))
def test_localized_equals_global_filter(seed, n, c):
    rng = np.random.default_rng(seed)
    a = unit(rng, n)
    q_max = 200 if n == 1 else 60
    q, P = all_points_array(q_max, n)
    d2 = np.sum((q[:, None] * a - P) ** 2, axis=1)
    brute = {(tuple(p), int(qq)) for qq, p, d in zip(q, P.tolist(), d2) if d < c * c}
    assert as_set(enumerate_near(a, c, 1, q_max)) == brute


def test_localized_equals_global_n3(rng):
    q, P = all_points_array(25, 3)
    for _ in range(5):
        a = unit(rng, 3)
        c = float(rng.uniform(0.5, 2))
        d2 = np.sum((q[:, None] * a - P) ** 2, axis=1)
        brute = {(tuple(p), int(qq)) for qq, p, d in zip(q, P.tolist(), d2) if d < c * c}
        assert as_set(enumerate_near(a, c, 1, 25)) == brute


def test_q_range_respected(rng):
    a = unit(rng, 1)
    got = enumerate_near(a, 1.5, 50, 80)
    full = enumerate_near(a, 1.5, 1, 200)
    assert as_set(got) == {(p, q) for p, q in as_set(full) if 50 <= q <= 80}


def test_threads_do_not_change_result(rng):
    a = unit(rng, 1)
    one = scan_near(a, 1.0, 1, 200000)
    four = scan_near(a, 1.0, 1, 200000, threads=4)
    assert np.array_equal(one.q, four.q) and np.array_equal(one.P, four.P)


def test_boundary_points_excluded_and_flagged():
    # alpha = (1,0), q = 1: p = (-1,0) sits exactly at distance 2 = c (open inequality)
    s = scan_near([1.0, 0.0], 2.0, 1, 1)
    assert as_set(s.approximates()) == {((1, 0), 1), ((0, 1), 1), ((0, -1), 1)}
    assert s.boundary_hits == 1


def test_degenerate_flag():
    assert scan_near([0.0, 1.0], 2.0, 1, 5).degenerate
    assert not scan_near([0.0, 1.0], 0.5, 1, 5).degenerate


def test_range_error():
    with pytest.raises(RangeError):
        enumerate_near([0.0, 1.0], 0.5, 1, 4 * 10**9)
    with pytest.raises(RangeError):
        all_points_array(4 * 10**9, 1)


def test_non_unit_alpha_rejected():
    with pytest.raises(ValidationError):
        enumerate_near([1.0, 1.0], 0.5, 1, 5)


def test_enumerate_in_region_identity():
    got = enumerate_in_region(LatticeDescriptor(1), lambda x: x.height <= 5, 5)
    assert {tuple(x.coords.tolist()) for x in got} == {p + (q,) for p, q in as_set(enumerate_all(5, 1))}
    assert enumerate_in_region(LatticeDescriptor(1), lambda x: False, 5) == []


def test_enumerate_in_region_transformed():
    g = make_g_t(0.3, 1)
    lat = LatticeDescriptor.of(g)

    def region(x):
        h = float(x.height)
        return 2 <= h <= 7 and float(x.coords[0]) > 0

    got = enumerate_in_region(lat, region, 7)
    # oracle: pull the region back and filter Lambda_0 directly
    ginv = g.inverse().matrix
    q, P = all_points_array(200, 1)
    V = np.concatenate([P, q[:, None]], axis=1)
    X = V @ g.matrix.T
    want = {tuple(np.round(x, 9)) for x in X if 2 <= x[-1] <= 7 and x[0] > 0}
    assert {tuple(np.round(x.as_float(), 9)) for x in got} == want


def test_tube_points_superset(rng):
    for n in (1, 2):
        g = make_u_y(rng.uniform(-0.5, 0.5, n)) @ make_g_t(0.4, n)
        lat = LatticeDescriptor.of(g)
        a = unit(rng, n)
        pts = tube_points(lat, a, 1.2, 1.0, 60.0)
        q, P = all_points_array(400, n)
        X = np.concatenate([P, q[:, None]], axis=1) @ g.matrix.T
        d = np.linalg.norm(X[:, :-1] - X[:, -1:] * a, axis=1)
        want = {tuple(v) for v, keep in zip(np.concatenate([P, q[:, None]], axis=1).tolist(), (d < 1.2) & (X[:, -1] >= 1) & (X[:, -1] <= 60)) if keep}
        have = {tuple(v) for v in pts.v.tolist()}
        assert want <= have


def test_dump_round_trip():
    pts = enumerate_all(13, 1)
    text = dumps_points(pts)
    assert text.splitlines()[0] == "1,-1,0,1"
    assert read_points(io.StringIO("# header\n" + text)) == pts


def test_lattice_descriptor_identity_normalised():
    assert LatticeDescriptor.of(make_g_t(0.0, 2)).is_standard
    assert LatticeDescriptor(2).describe() == "Lambda0"
