from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctrlsurg import intmat as im
from ctrlsurg.control_space import circle_space, line_space, uniform_line
from ctrlsurg.generator import random_module, random_morphism
from ctrlsurg.geometric_algebra import (
    GeomModule,
    GeomMorphism,
    compose,
    direct_sum_modules,
    identity,
    is_basis_bijection_over,
    is_delta_iso_certificate,
    radius,
    split_by_region,
)

from conftest import mat, module


def brute_radius(f: GeomMorphism) -> Fraction:
    """Max distance over nonzero entries, straight from the Fraction table."""
    best = Fraction(0)
    for i in range(f.target.rank):
        for j in range(f.source.rank):
            if f.matrix[i, j] != 0:
                best = max(best, f.space.d(f.target.basis[i][1], f.source.basis[j][1]))
    return best


def test_radius_of_a_single_entry(two_point):
    a, b = module(two_point, [0]), module(two_point, [1])
    assert radius(GeomMorphism(a, b, mat([[3]]))) == Fraction(1, 4)
    assert radius(GeomMorphism(a, b, mat([[0]]))) == 0
    assert radius(identity(module(two_point, [0, 1]))) == 0


def test_module_validation(two_point):
    with pytest.raises(ValueError, match="duplicate"):
        GeomModule(two_point, (("x", 0), ("x", 1)))
    with pytest.raises(ValueError, match="invalid location"):
        GeomModule(two_point, (("x", 5),))
    with pytest.raises(ValueError, match="shape"):
        GeomMorphism(module(two_point, [0]), module(two_point, [0, 1]), mat([[1]]))


def test_direct_sum_tags_only_on_collision(two_point):
    a, b = module(two_point, [0], "a"), module(two_point, [1], "b")
    assert direct_sum_modules([a, b]).labels == ["a0", "b0"]
    s = direct_sum_modules([a, a])
    assert s.rank == 2 and len(set(s.labels)) == 2


@given(st.integers(0, 10**6))
def test_radius_matches_brute_force_and_composition_bound(seed):
    rng = random.Random(seed)
    B = rng.choice([circle_space(rng.randint(2, 9)), uniform_line(rng.randint(2, 9), Fraction(1, 3))])
    X, Y, Z = (random_module(rng, B, rng.randint(0, 4), p) for p in "xyz")
    f = random_morphism(rng, X, Y, Fraction(rng.randint(0, 3), 4))
    g = random_morphism(rng, Y, Z, Fraction(rng.randint(0, 3), 4))
    assert radius(f) == brute_radius(f)
    gf = compose(g, f)
    assert radius(gf) == brute_radius(gf)
    assert radius(gf) <= radius(f) + radius(g)


def test_split_by_region_recovers_the_module():
    B = uniform_line(4)
    M = module(B, [0, 3, 1, 2])
    sub, quot, inc, proj = split_by_region(M, B.region([1, 2]))
    assert [loc for _, loc in sub.basis] == [1, 2]
    assert [loc for _, loc in quot.basis] == [0, 3]
    assert im.is_zero(im.mm(proj.matrix, inc.matrix))
    both = im.mm(inc.matrix, inc.matrix.T) + im.mm(proj.matrix.T, proj.matrix)
    assert im.equal(both, im.eye(4))


def test_basis_bijection_detection():
    B = uniform_line(3)
    M = module(B, [0, 1, 2])
    perm = GeomMorphism(M, M, mat([[0, -1, 0], [1, 0, 0], [0, 0, 1]]))
    assert is_basis_bijection_over(perm, B.whole)
    mixed = GeomMorphism(M, M, mat([[1, 1, 0], [0, 1, 0], [0, 0, 1]]))
    assert not is_basis_bijection_over(mixed, B.whole)
    # entry (0,1) touches point 1, so over {2} alone it is still a bijection
    assert is_basis_bijection_over(mixed, B.region([2]))
    two = GeomMorphism(M, M, mat([[2, 0, 0], [0, 1, 0], [0, 0, 1]]))
    assert not is_basis_bijection_over(two, B.region([0]))


def test_delta_iso_certificate_flags_far_defects():
    B = line_space([0, 1, 2, 3])
    M = module(B, [0, 3])
    d = GeomMorphism(M, M, mat([[1, 0], [0, 2]]))
    e = identity(M)
    # defect sits at point 3; V = {0} does not reach it within 1
    assert is_delta_iso_certificate(d, e, B.region([0]), 1)
    assert not is_delta_iso_certificate(d, e, B.region([3]), 1)
    assert is_delta_iso_certificate(identity(M), identity(M), B.empty, 0) == []


def test_morphism_arithmetic(two_point):
    M = module(two_point, [0, 1])
    f = GeomMorphism(M, M, mat([[1, 2], [0, 1]]))
    assert (f - f).is_zero()
    assert (f + (-f)).is_zero()
    assert f.scale(3) == GeomMorphism(M, M, mat([[3, 6], [0, 3]]))
    assert f.T.entries() == [(0, 0, 1), (1, 0, 2), (1, 1, 1)]
    assert np.array_equal(compose(f, identity(M)).matrix, f.matrix)
