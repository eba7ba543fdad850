from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ctrlsurg.control_space import (
    ControlSpace,
    as_rational,
    circle_space,
    inner_neighborhood,
    line_space,
    outer_neighborhood,
    uniform_line,
    verify_metric,
)


def test_rationals_parse_exactly():
    assert as_rational("3/8") == Fraction(3, 8)
    assert as_rational(2) == 2
    with pytest.raises(TypeError):
        as_rational(0.5)


def test_circle_distances_wrap():
    B = circle_space(8)
    assert B.d(0, 7) == Fraction(1, 8)
    assert B.d(0, 4) == Fraction(1, 2)
    assert B.d(1, 6) == Fraction(3, 8)
    assert verify_metric(B) == []


def test_bad_metrics_are_reported():
    asym = ControlSpace(("a", "b"), ((0, 1), (2, 0)))
    assert any("symmetry" in p for p in verify_metric(asym))
    tri = ControlSpace(("a", "b", "c"), ((0, 1, 5), (1, 0, 1), (5, 1, 0)))
    assert any("triangle" in p for p in verify_metric(tri))
    self_ = ControlSpace(("a",), ((1,),))
    assert any("self-distance" in p for p in verify_metric(self_))


def test_malformed_spaces_rejected():
    with pytest.raises(ValueError):
        ControlSpace(("a", "a"), ((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        ControlSpace(("a", "b"), ((0, 1),))
    with pytest.raises(ValueError):
        ControlSpace(("a", "b"), ((0, -1), (-1, 0)))


def test_neighborhoods_on_a_line():
    B = uniform_line(10, Fraction(1, 4))
    W = B.region([4])
    assert sorted(outer_neighborhood(W, Fraction(1, 2))) == [2, 3, 4, 5, 6]
    # closed: a point exactly eps away is included
    assert 6 in outer_neighborhood(W, Fraction(1, 2))
    big = B.region(range(3, 8))
    assert sorted(inner_neighborhood(big, Fraction(1, 4))) == [4, 5, 6]
    assert outer_neighborhood(B.empty, 3).members == frozenset()
    with pytest.raises(ValueError):
        outer_neighborhood(W, -1)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=9, unique=True),
       st.sets(st.integers(0, 8)), st.integers(0, 30))
def test_neighborhoods_match_brute_force(coords, members, e):
    B = line_space([Fraction(c, 4) for c in coords])
    W = B.region(m for m in members if m < len(B))
    eps = Fraction(e, 8)
    want = {x for x in range(len(B)) if any(B.d(x, w) <= eps for w in W)}
    assert set(outer_neighborhood(W, eps)) == want
    comp = [w for w in range(len(B)) if w not in W]
    want_in = {x for x in range(len(B)) if all(B.d(x, c) > eps for c in comp)}
    assert set(inner_neighborhood(W, eps)) == want_in


@given(st.integers(1, 14), st.integers(1, 5))
def test_generated_spaces_are_metrics(n, c):
    assert verify_metric(circle_space(n, c)) == []
    assert verify_metric(uniform_line(n, Fraction(1, c))) == []


def test_region_algebra():
    B = circle_space(6)
    A, C = B.region([0, 1, 2]), B.region([2, 3])
    assert sorted(A | C) == [0, 1, 2, 3]
    assert sorted(A & C) == [2]
    assert sorted(A - C) == [0, 1]
    assert sorted(A.complement()) == [3, 4, 5]
    assert (A & C).issubset(A)
