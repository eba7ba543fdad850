from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ctrlsurg import intmat as im
from ctrlsurg.chain_complexes import (
    ControlFailure,
    check_complex,
    find_contraction_over,
    make_complex,
    verify_equivalence,
    zero_complex,
)
from ctrlsurg.control_space import circle_space, line_space
from ctrlsurg.generator import GeneratorSpec, generate_poincare
from ctrlsurg.quadratic_structures import (
    E8_GRAM,
    QuadraticComplex,
    QuadraticForm,
    QuadraticPair,
    add,
    algebraic_boundary,
    arf,
    boundary_elem,
    check_pair,
    check_quadratic,
    direct_sum_quadratic,
    duality_map,
    e8_form,
    form_complex,
    glue_union,
    hyperbolic_form,
    is_poincare,
    middle_form,
    product_bordism,
    scale_structure,
    signature,
    surger_below_middle,
    thickening_pair,
    transpose,
    verify_bordism,
    w_boundary,
)

from conftest import mat, module
from oracles import bareiss_det, diagonal_signature, majority_arf


# ---------------------------------------------------------------- forms

def test_oracles_on_e8():
    assert bareiss_det(E8_GRAM) == 1
    assert diagonal_signature(E8_GRAM) == 8


def test_e8_invariants():
    F = e8_form()
    assert abs(bareiss_det(F.symmetrization())) == 1
    assert F.is_poincare()
    assert signature(F) == diagonal_signature(F.symmetrization()) == 8


def test_hyperbolic_invariants():
    H = hyperbolic_form()
    assert signature(H) == 0
    assert arf(hyperbolic_form(n=2)) == 0


def test_twisted_hyperbolic_has_arf_one():
    M = ((1, 1), (0, 1))
    assert majority_arf(M) == 1
    assert arf(QuadraticForm(M, n=2)) == 1


def test_all_rank_two_refinements_match_majority():
    for a, b in itertools.product((0, 1), repeat=2):
        for c in (1, 3, -1):
            M = ((a, c), (0, b))
            assert arf(QuadraticForm(M, n=2)) == majority_arf(M)


def test_degenerate_forms_are_refused():
    with pytest.raises(ValueError):
        signature(QuadraticForm(((0, 0), (0, 0))))
    with pytest.raises(ValueError):
        arf(QuadraticForm(((1, 0), (0, 1)), n=2))
    with pytest.raises(ValueError):
        QuadraticForm(((1,),), n=1)


@given(st.lists(st.sampled_from(["E8", "-E8", "H", "<1>", "<-1>"]), min_size=1, max_size=3))
def test_signature_is_additive_and_matches_diagonalization(parts):
    blocks = {"E8": e8_form(), "-E8": QuadraticForm(tuple(tuple(-x for x in r) for r in E8_GRAM)),
              "H": hyperbolic_form(), "<1>": QuadraticForm(((1,),)), "<-1>": QuadraticForm(((-1,),))}
    F = blocks[parts[0]]
    for p in parts[1:]:
        F = F.direct_sum(blocks[p])
    assert signature(F) == diagonal_signature(F.symmetrization())
    assert signature(F) == sum(signature(blocks[p]) for p in parts)


# ---------------------------------------------------------------- element algebra

def random_form_complex(rng, n=2):
    B = circle_space(rng.randint(1, 5))
    spec = GeneratorSpec(rng.randrange(1 << 30), n, {n // 2 - 1: 1, n // 2: 4, n // 2 + 1: 1}, ("H",),
                         Fraction(1, len(B)))
    return generate_poincare(spec, B)


@given(st.integers(0, 10**6))
def test_w_boundary_squares_to_zero(seed):
    rng = random.Random(seed)
    Q = random_form_complex(rng)
    C = Q.C
    # any random chain chi, not just a cycle
    chi = []
    for s in range(3):
        e = {}
        for q in C.degrees:
            p = Q.n + 1 - s - q
            if C.rank(q) and C.rank(p):
                e[(q, p)] = im.asint([[rng.randint(-2, 2) for _ in range(C.rank(p))] for _ in range(C.rank(q))])
        chi.append(e)
    twice = w_boundary(C, w_boundary(C, chi) + [{}])
    assert all(not e for e in twice)
    # T is an involution commuting with d
    e = chi[0]
    assert add(transpose(transpose(e)), e, coeffs=[1, -1]) == {}
    assert add(boundary_elem(C, transpose(e)), transpose(boundary_elem(C, e)), coeffs=[1, -1]) == {}


# ---------------------------------------------------------------- duality and boundary

def test_duality_of_small_forms():
    B = circle_space(1)
    zero = QuadraticComplex(0, form_complex(QuadraticForm(((0,),)), B).C, ())
    assert not duality_map(zero).comps
    one = form_complex(QuadraticForm(((1,),)), B)
    assert im.equal(duality_map(one).at(0), mat([[2]]))
    H = form_complex(hyperbolic_form(), B)
    assert im.equal(duality_map(H).at(0), mat([[0, 1], [1, 0]]))


def test_poincare_certification():
    B = circle_space(1)
    cert = is_poincare(form_complex(hyperbolic_form(), B), 0)
    assert cert.bound == 0 and verify_equivalence(cert)
    assert verify_equivalence(is_poincare(form_complex(e8_form(), B), 0))
    with pytest.raises(ControlFailure):
        is_poincare(form_complex(QuadraticForm(((1,),)), B), 10)


def test_boundary_examples():
    B = circle_space(1)
    assert algebraic_boundary(QuadraticComplex(0, zero_complex(B), ())).C.is_zero()
    dE = algebraic_boundary(form_complex(e8_form(), B))
    assert find_contraction_over(dE.C, B.whole, 0)
    d1 = algebraic_boundary(form_complex(QuadraticForm(((1,),)), B))
    assert (d1.C.lo, d1.C.hi) == (-1, 0)
    assert abs(int(d1.C.d(0)[0, 0])) == 2
    assert check_quadratic(d1)
    # mod 2 the differential vanishes, so homology survives and no contraction exists
    assert im.rank_mod_p(d1.C.d(0), 2) == 0
    with pytest.raises(ControlFailure):
        find_contraction_over(d1.C, B.whole, 5)


def generated(seed=3):
    return generate_poincare(GeneratorSpec(seed, 2, {0: 1, 1: 4, 2: 1}, ("H",), Fraction(1, 4)), circle_space(4))


def mirror(P: QuadraticPair) -> QuadraticPair:
    return QuadraticPair(P.f, tuple(scale_structure(P.delta_psi, -1)), P.boundary.negated())


def test_thickening_pair_verifies():
    P = thickening_pair(generated())
    assert check_pair(P)
    assert check_quadratic(P.boundary)


def test_glue_with_mirror_gives_a_poincare_double():
    Q = generated()
    P = thickening_pair(Q)
    U = glue_union(P, mirror(P))
    assert check_complex(U.C) and check_quadratic(U)
    dU = algebraic_boundary(U)
    s = find_contraction_over(dU.C, Q.space.whole, 2)
    assert s.exact_over is None


def test_double_of_the_trivial_pair_is_zero():
    B = circle_space(2)
    E = QuadraticComplex(0, zero_complex(B), ())
    from ctrlsurg.chain_complexes import ChainMap
    P = QuadraticPair(ChainMap(zero_complex(B), zero_complex(B), {}), (), E)
    assert glue_union(P, mirror(P)).C.is_zero()


def test_glue_rejects_mismatched_boundaries():
    P = thickening_pair(generated())
    with pytest.raises(ValueError, match="not opposite"):
        glue_union(P, P)


# ---------------------------------------------------------------- surgery and bordism

def handle_plus_form():
    """H in degree 1 (n = 2) plus a unit handle Z -> Z in degrees 1, 0."""
    B = line_space([0])
    F = form_complex(hyperbolic_form(n=2), B)
    K = make_complex(B, {0: module(B, [0], "k"), 1: module(B, [0], "h")}, {1: mat([[1]])})
    return direct_sum_quadratic([F, QuadraticComplex(2, K, ())]), F


def test_surgery_cancels_a_handle_below_the_middle():
    Q, F = handle_plus_form()
    assert is_poincare(Q, 0)
    Qp, bord = surger_below_middle(Q, 0)
    assert [r for r in Qp.C.degrees if Qp.C.rank(r)] == [1]
    assert middle_form(Qp) == middle_form(F)
    assert verify_bordism(bord, 0)


def test_surgery_fixed_points():
    F = form_complex(e8_form(), circle_space(1))
    Fp, bord = surger_below_middle(F, 0)
    assert middle_form(Fp) == middle_form(F)
    assert verify_bordism(bord, 0)
    Z = QuadraticComplex(0, zero_complex(circle_space(1)), ())
    Zp, bz = surger_below_middle(Z, 0)
    assert Zp.C.is_zero() and verify_bordism(bz, 0)


def test_surgery_refuses_non_poincare_input():
    with pytest.raises(ValueError):
        surger_below_middle(form_complex(QuadraticForm(((1,),)), circle_space(1)), 1)


def test_surgery_on_generated_complexes():
    for seed in range(6):
        Q = generated(seed)
        Qp, bord, rep = surger_below_middle(Q, 1, report=True)
        assert check_quadratic(Qp)
        assert verify_bordism(bord, 1)
        assert rep.within_eps
        # nothing left below the middle unless the report says so
        assert all(Qp.C.rank(r) == rep.remaining_below.get(r, 0) for r in Qp.C.degrees if r < 1)


def test_product_bordism_and_too_small_eps():
    Q = generated()
    bord = product_bordism(Q)
    assert verify_bordism(bord, Q.radius)
    v = verify_bordism(bord, 0)
    assert not v and any("exceeds eps" in p for p in v.problems)
