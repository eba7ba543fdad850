from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctrlsurg import intmat as im
from ctrlsurg.chain_complexes import (
    ChainHomotopy,
    ChainMap,
    ControlFailure,
    EquivalenceCertificate,
    GeomChainComplex,
    certify_chain_map,
    check_complex,
    compose_certificates,
    dual_complex,
    double_dual_identification,
    find_contraction_over,
    fold_over_region,
    identity_certificate,
    identity_map,
    make_complex,
    mapping_cone,
    max_subcomplex_and_quotient,
    verify_equivalence,
    zero_complex,
    zero_map,
)
from ctrlsurg.control_space import circle_space, line_space, uniform_line
from ctrlsurg.generator import random_module, random_morphism

from conftest import mat, module


def point_complex(space, d_by_degree, locs_by_degree):
    mods = {r: module(space, locs, f"c{r}_") for r, locs in locs_by_degree.items()}
    return make_complex(space, mods, {r: mat(m) for r, m in d_by_degree.items()})


def brute_contractible(C: GeomChainComplex, budget, values=range(-2, 3)) -> bool:
    """Try every s with entries in `values` inside the budget; ds + sd = 1 anywhere?"""
    slots = []
    for r in C.degrees:
        for i in range(C.rank(r + 1)):
            for j in range(C.rank(r)):
                if C.space.d(C.locs(r + 1)[i], C.locs(r)[j]) <= budget:
                    slots.append((r, i, j))
    for vals in itertools.product(values, repeat=len(slots)):
        s = {r: im.zeros(C.rank(r + 1), C.rank(r)) for r in C.degrees}
        for (r, i, j), v in zip(slots, vals):
            s[r][i, j] = v
        ok = True
        for r in C.degrees:
            lhs = im.zeros(C.rank(r), C.rank(r))
            if r - 1 in s:
                lhs = lhs + im.mm(s[r - 1], C.d(r))
            lhs = lhs + im.mm(C.d(r + 1), s[r])
            if not im.equal(lhs, im.eye(C.rank(r))):
                ok = False
                break
        if ok:
            return True
    return False


def random_complex(rng, space, degrees=3, max_rank=3, max_radius=Fraction(1, 4)):
    """Random complex; columns of d_r that d_{r-1} does not kill are zeroed."""
    mods = {r: random_module(rng, space, rng.randint(0, max_rank), f"r{r}_") for r in range(degrees)}
    diffs = {}
    for r in range(1, degrees):
        f = random_morphism(rng, mods[r], mods[r - 1], max_radius)
        m = f.matrix
        if r - 1 in diffs:
            prev = diffs[r - 1]
            m = np.array([[m[i, j] if not np.any(im.mm(prev, m[:, [j]]) != 0) else 0
                           for j in range(m.shape[1])] for i in range(m.shape[0])], dtype=object).reshape(m.shape)
        diffs[r] = im.asint(m) if m.size else im.zeros(*m.shape)
    return make_complex(space, mods, diffs)


def test_cone_of_identity_is_contractible(two_point):
    C = point_complex(two_point, {}, {0: [0]})
    K = mapping_cone(identity_map(C))
    assert [K.rank(r) for r in K.degrees] == [1, 1]
    assert abs(int(K.d(1)[0, 0])) == 1
    s = find_contraction_over(K, two_point.whole, 0)
    assert s.radius() == 0 and s.exact_over is None


def test_cone_of_zero_map_is_a_block_sum(two_point):
    X = point_complex(two_point, {1: [[1]]}, {0: [0], 1: [1]})
    Y = point_complex(two_point, {}, {0: [1]})
    K = mapping_cone(zero_map(X, Y))
    # degree r holds Y_r ⊕ X_{r-1}, and with f = 0 only -d_X survives
    assert [K.rank(r) for r in K.degrees] == [1, 1, 1]
    assert im.is_zero(K.d(1))
    assert im.equal(K.d(2), -X.d(1))
    assert check_complex(K)


def test_cone_radius_is_the_max(two_point):
    X = point_complex(two_point, {}, {0: [0]})
    Y = point_complex(two_point, {}, {0: [1]})
    K = mapping_cone(ChainMap(X, Y, {0: mat([[1]])}))
    assert K.radius() == Fraction(1, 4)


def test_dual_of_point_and_reversal(two_point):
    P = point_complex(two_point, {}, {0: [0]})
    Pd = dual_complex(P, 0)
    assert Pd.lo == 0 and Pd.rank(0) == 1
    C = point_complex(two_point, {1: [[1, 1]], 2: [[1], [-1]]}, {0: [0], 1: [0, 1], 2: [1]})
    assert check_complex(C)
    D = dual_complex(C, 2)
    assert (D.lo, D.hi) == (0, 2)
    assert [D.rank(r) for r in D.degrees] == [1, 2, 1]
    assert im.equal(D.d(1), -C.d(2).T)
    assert im.equal(D.d(2), C.d(1).T)
    assert verify_equivalence(double_dual_identification(C, 2))


def test_contraction_budget_on_two_points(two_point):
    C = point_complex(two_point, {1: [[1]]}, {0: [0], 1: [1]})
    # oracle first
    assert brute_contractible(C, Fraction(1, 4))
    assert not brute_contractible(C, Fraction(1, 10))
    s = find_contraction_over(C, two_point.whole, Fraction(1, 4))
    assert s.radius() == Fraction(1, 4)
    with pytest.raises(ControlFailure):
        find_contraction_over(C, two_point.whole, Fraction(1, 10))


def test_homology_blocks_contraction():
    B = line_space([0])
    C = point_complex(B, {1: [[2]]}, {0: [0], 1: [0]})
    assert not brute_contractible(C, 0)
    with pytest.raises(ControlFailure):
        find_contraction_over(C, B.whole, 5)


@given(st.integers(0, 10**6))
def test_contraction_search_agrees_with_brute_force(seed):
    rng = random.Random(seed)
    B = uniform_line(3, Fraction(1, 4))
    C = random_complex(rng, B, degrees=2, max_rank=2, max_radius=Fraction(1, 2))
    if sum(C.rank(r + 1) * C.rank(r) for r in C.degrees) > 6:
        return
    budget = Fraction(rng.randint(0, 2), 4)
    want = brute_contractible(C, budget, values=range(-1, 2))
    try:
        s = find_contraction_over(C, B.whole, budget)
        got = True
        assert s.radius() <= budget
    except ControlFailure:
        got = False
    # unit entries suffice for these tiny differentials with entries in [-3, 3]
    if want:
        assert got


def test_identity_and_corrupted_certificates(two_point):
    C = point_complex(two_point, {1: [[1]]}, {0: [0], 1: [1]})
    cert = identity_certificate(C)
    assert verify_equivalence(cert)
    bad_map = ChainMap(C, C, {0: mat([[1]]), 1: mat([[2]])})
    broken = EquivalenceCertificate(bad_map, cert.backward, cert.homotopy_fg, cert.homotopy_gf, Fraction(0))
    v = verify_equivalence(broken)
    assert not v
    assert any("composite" in p or "chain map" in p for p in v.problems)


def test_certificate_composition_adds_bounds(two_point):
    X = point_complex(two_point, {}, {0: [0]})
    Y = point_complex(two_point, {}, {0: [1]})
    Z = point_complex(two_point, {}, {0: [0]})
    c1 = certify_chain_map(ChainMap(X, Y, {0: mat([[1]])}), Fraction(1, 4))
    c2 = certify_chain_map(ChainMap(Y, Z, {0: mat([[-1]])}), Fraction(1, 4))
    assert verify_equivalence(c1) and verify_equivalence(c2)
    c = compose_certificates(c1, c2)
    assert c.bound == c1.bound + c2.bound
    assert verify_equivalence(c)


def test_fold_leaves_two_term_complexes_alone():
    B = line_space([0])
    C = point_complex(B, {1: [[1]]}, {0: [0], 1: [0]})
    s = find_contraction_over(C, B.whole, 0)
    F, cert = fold_over_region(C, B.whole, s, 1)
    assert (F.lo, F.hi) == (0, 1) and im.equal(F.d(1), C.d(1))
    assert verify_equivalence(cert)


def test_fold_cone_of_identity_up_two_degrees():
    B = line_space([0])
    P = point_complex(B, {}, {0: [0]})
    K = mapping_cone(identity_map(P))
    s = find_contraction_over(K, B.whole, 0)
    F, cert = fold_over_region(K, B.whole, s, 3)
    F = F.trimmed()
    assert (F.lo, F.hi) == (2, 3)
    assert abs(im.det(F.d(3))) == 1
    assert verify_equivalence(cert)


def test_fold_four_term_contractible():
    B = line_space([0])
    # rank 1 in degrees 0..3; d^2 = 0 forces the middle differential to vanish
    C = point_complex(B, {1: [[1]], 2: [[0]], 3: [[-1]]}, {0: [0], 1: [0], 2: [0], 3: [0]})
    assert check_complex(C)
    s = find_contraction_over(C, B.whole, 0)
    F, cert = fold_over_region(C, B.whole, s, 1)
    F = F.trimmed()
    assert (F.lo, F.hi) == (0, 1)
    assert F.d(1).shape == (2, 2) and abs(im.det(F.d(1))) == 1
    assert verify_equivalence(cert)


def test_fold_rejects_a_broken_contraction(two_point):
    C = point_complex(two_point, {1: [[1]]}, {0: [0], 1: [1]})
    one = identity_map(C)
    fake = ChainHomotopy(one, zero_map(C, C), {})
    with pytest.raises(ValueError):
        fold_over_region(C, two_point.whole, fake, 1)


def test_subcomplex_closure():
    B = uniform_line(2)
    C = point_complex(B, {1: [[1]]}, {0: [1], 1: [0]})
    sub, quot, inc, proj = max_subcomplex_and_quotient(C, B.region([0]))
    # the degree-1 generator is over R but its boundary is not
    assert sub.total_rank() == 0 and quot.total_rank() == 2
    sub, quot, _, _ = max_subcomplex_and_quotient(C, B.whole)
    assert sub.total_rank() == 2 and quot.total_rank() == 0
    sub, quot, _, _ = max_subcomplex_and_quotient(C, B.empty)
    assert sub.total_rank() == 0 and quot.total_rank() == 2


@given(st.integers(0, 10**6))
def test_constructions_square_to_zero(seed):
    rng = random.Random(seed)
    B = circle_space(rng.randint(2, 8))
    X = random_complex(rng, B)
    assert check_complex(X)
    n = rng.randint(0, 4)
    assert check_complex(dual_complex(X, n))
    assert verify_equivalence(double_dual_identification(X, n))
    K = mapping_cone(identity_map(X))
    assert check_complex(K)
    sub, quot, inc, proj = max_subcomplex_and_quotient(X, B.region(range(0, len(B), 2)))
    assert check_complex(sub) and check_complex(quot)


def test_zero_complex_is_trivially_fine():
    B = circle_space(3)
    Z = zero_complex(B)
    assert check_complex(Z) and Z.is_zero()
    assert verify_equivalence(identity_certificate(Z))
