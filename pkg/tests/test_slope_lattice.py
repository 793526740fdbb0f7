import itertools
import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mather_lab.slope_lattice import (
    RationalSlope,
    decompose_slope,
    format_slope,
    fundamental_domain,
    gamma_group,
    gram_projection,
    hermite_rows,
    irrationality_index,
    parse_slope,
    projection_M,
    rat_space,
)

from oracles import enumerate_gamma, in_integer_span


def S(*xs, cap=None):
    return RationalSlope.from_fractions([F(x) for x in xs], cap=cap)


def test_canonical_form():
    r = RationalSlope((2, 4), 6)
    assert r.numerators == (1, 2) and r.denominator == 3
    assert RationalSlope((-1,), -2) == S("1/2")
    with pytest.raises(ValueError):
        RationalSlope((1,), 0)


def test_parse_and_format_roundtrip():
    r = parse_slope("1/2 1/3")
    assert r.components == (F(1, 2), F(1, 3))
    assert format_slope(r) == "3/6 2/6"
    assert parse_slope(format_slope(r)) == r
    assert parse_slope("0") == RationalSlope.zero(1)


def test_parse_rejects_bad_token():
    with pytest.raises(ValueError, match="1/x"):
        parse_slope("1/2 1/x")


def test_gamma_examples():
    assert gamma_group(S(0)).basis == ((1,),) and gamma_group(S(0)).covolume == 1
    g = gamma_group(S("2/5"))
    assert g.basis == ((5,),) and g.covolume == 5
    g = gamma_group(S("1/2", "1/3"))
    assert np.array_equal(g.matrix(), np.diag([2, 3]))
    assert g.covolume == 6


def test_gamma_contains_denominator_multiples():
    r = S("3/7", "2/7", "1/7")
    g = gamma_group(r)
    for e in np.eye(3, dtype=int):
        assert g.contains(7 * e)
    assert (7**3) % g.covolume == 0
    for k in g.columns:
        assert r.dot(k).denominator == 1


def test_equal_lattices_compare_equal():
    a = hermite_rows([(2, 0), (1, 1)])
    b = hermite_rows([(3, 1), (1, 1), (4, 2)])
    assert a == b


def test_fundamental_domain_examples():
    d = fundamental_domain(gamma_group(S(0)))
    assert d.volume == 1
    d = fundamental_domain(gamma_group(S("1/2", "1/3")))
    assert d.volume == 6
    assert d.contains(np.array([[1.9, 2.9]]))[0] and not d.contains(np.array([[2.0, 0.0]]))[0]


def test_sheared_cell_tiles_integer_patch():
    from mather_lab.slope_lattice import FundamentalDomain

    d = FundamentalDomain(((2, 1), (0, 1)), 2)
    assert d.volume == 2
    pts = np.array(list(itertools.product(range(-10, 10), repeat=2)), dtype=float) + 0.25
    cells = {}
    for p in pts:
        red = d.reduce(p[None, :])[0]
        assert d.contains(red[None, :])[0]
        cells.setdefault(tuple(np.round(red, 9)), 0)
        cells[tuple(np.round(red, 9))] += 1
    # every point of the patch lands in one of the two cell representatives
    assert len(cells) == 2


def test_rat_space_examples():
    assert rat_space(S("1/2")).generators == ((2, -1),)
    r = rat_space(S(0, 0))
    assert r.dimension == 2
    assert set(r.generators) == {(1, 0, 0), (0, 1, 0)}
    r = rat_space(S("1/2", "1/3"))
    assert r.dimension == 2
    for g in [(2, 0, -1), (0, 3, -1)]:
        assert in_integer_span_sub(r.generators, g)


def in_integer_span_sub(gens, v):
    A = np.array(gens, dtype=float).T
    coef, *_ = np.linalg.lstsq(A, np.array(v, float), rcond=None)
    return np.allclose(A @ coef, v) and np.allclose(coef, np.round(coef))


def test_projection_M_examples():
    assert projection_M(S("1/2")).dimension == 1
    assert projection_M(S("1/3", "2/5", "1/7")).dimension == 3
    r = S("1/2", "7071/10000", cap=100)
    M = projection_M(r)
    assert M.generators == ((2, 0),)


def test_irrationality_index_examples():
    assert irrationality_index(S("2/5")) == 0
    assert irrationality_index(S(0, 0, 0)) == 0
    approx = F(np.sqrt(2) / 2).limit_denominator(10**6)
    assert irrationality_index(S(approx), cap=50) == 1


def test_decompose_slope_examples():
    r = S("1/3", "1/4")
    r1, r2 = decompose_slope(r)
    assert r1 == r.components and all(x == 0 for x in r2)

    r = S("1/2", "7071/10000", cap=100)
    r1, r2 = decompose_slope(r)
    assert r1 == (F(1, 2), F(0))
    assert r2 == (F(0), F(7071, 10000))

    # already orthogonal to M
    r = S("0", "7071/10000", cap=100)
    M = projection_M(r)
    r1, r2 = decompose_slope(r)
    if M.dimension:
        assert all(sum(a * b for a, b in zip(r2, w)) == 0 for w in M.generators)


def test_gram_projection_rejects_dependent_generators():
    with pytest.raises(ValueError):
        gram_projection([F(1, 2), F(1, 3)], [(1, 0), (2, 0)])


def test_lattice_json_is_integer_matrix():
    g = gamma_group(S("1/2", "1/3"))
    data = json.loads(json.dumps(g.to_json()))
    assert all(isinstance(x, int) for row in data for x in row)


slopes = st.integers(1, 12).flatmap(
    lambda q: st.tuples(st.lists(st.integers(-2 * q, 2 * q), min_size=1, max_size=3), st.just(q)))


@settings(max_examples=60, deadline=None)
@given(slopes)
def test_gamma_matches_enumeration(data):
    nums, q = data
    r = RationalSlope(tuple(nums), q)
    g = gamma_group(r)
    bound = 2 * r.denominator if r.n < 3 else min(2 * r.denominator, 8)
    for k in enumerate_gamma(r.components, bound):
        assert g.contains(k)
        assert in_integer_span(g.columns, k)
    for k in g.columns:
        assert r.dot(k).denominator == 1


@settings(max_examples=60, deadline=None)
@given(slopes)
def test_rat_space_properties(data):
    nums, q = data
    r = RationalSlope(tuple(nums), q)
    rs = rat_space(r)
    assert rs.dimension == projection_M(r).dimension == r.n
    for g in rs.generators:
        assert r.dot(g[:-1]) + g[-1] == 0
    r1, r2 = decompose_slope(r)
    assert r1 == r.components
    back = decompose_slope(RationalSlope.from_fractions(r1))
    assert back[0] == r1 and all(x == 0 for x in back[1])


@settings(max_examples=40, deadline=None)
@given(st.integers(13, 400), st.integers(1, 399), st.integers(1, 12))
def test_capped_decomposition_is_exact(q, p, cap):
    r = RationalSlope((1, p), 2 * q, cap=cap)
    r1, r2 = decompose_slope(r)
    assert all(a + b == c for a, b, c in zip(r1, r2, r.components))
    for w in projection_M(r).generators:
        assert sum(x * y for x, y in zip(r2, w)) == 0
