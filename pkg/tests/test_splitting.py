from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ctrlsurg import intmat as im
from ctrlsurg.chain_complexes import ControlFailure, make_complex, verify_equivalence
from ctrlsurg.control_space import circle_space, line_space, outer_neighborhood, uniform_line
from ctrlsurg.fixtures import fixture
from ctrlsurg.generator import GeneratorSpec, generate_poincare, random_isomorphism_instance
from ctrlsurg.geometric_algebra import GeomMorphism, identity, is_basis_bijection_over
from ctrlsurg.quadratic_structures import (
    QuadraticComplex,
    QuadraticForm,
    check_quadratic,
    direct_sum_quadratic,
    form_complex,
    hyperbolic_form,
    is_poincare,
    middle_form,
)
from ctrlsurg.splitting import (
    STAGES,
    ControlLedger,
    StageFailure,
    check_split_iso,
    check_split_result,
    delete_trivial_summand,
    split_isomorphism,
    split_poincare_complex,
)

from conftest import mat, module


# ---------------------------------------------------------------- split isomorphisms

def test_identity_needs_no_moves():
    B = uniform_line(4)
    M = module(B, [0, 1, 2, 3])
    res = split_isomorphism(identity(M), identity(M), B.region([0]), 1)
    assert res.H == identity(M) and res.Hp == identity(M)
    assert res.ops == ()
    assert is_basis_bijection_over(res.conjugated, B.whole)
    assert check_split_iso(res) == []


def test_signed_permutation_is_left_alone():
    B = uniform_line(3)
    M = module(B, [2, 2])
    d = GeomMorphism(M, M, mat([[0, 1], [-1, 0]]))
    res = split_isomorphism(d, GeomMorphism(M, M, mat([[0, -1], [1, 0]])), B.region([0]), Fraction(1, 2))
    assert res.ops == ()
    assert check_split_iso(res) == []


def test_single_transvection_on_a_line():
    B = line_space([0, 1, 2, 3])
    M = module(B, [1, 1])
    d = GeomMorphism(M, M, mat([[1, 1], [0, 1]]))
    e = GeomMorphism(M, M, mat([[1, -1], [0, 1]]))
    res = split_isomorphism(d, e, B.region([0]), Fraction(1, 2), check_pre=False, strict=False)
    assert len(res.ops) == 1 and res.ops[0].kind == "add"
    assert im.equal(res.conjugated.matrix, im.eye(2))
    assert check_split_iso(res) == []


def test_preconditions_are_enforced():
    B = uniform_line(3)
    M = module(B, [0, 1, 2])
    d = GeomMorphism(M, M, mat([[1, 0, 0], [0, 2, 0], [0, 0, 1]]))
    with pytest.raises(ValueError, match="eps"):
        split_isomorphism(identity(M), identity(M), B.region([0]), 0)
    # the 2 at point 1 is not near V = {0} within delta = 0
    with pytest.raises(ValueError, match="certificate"):
        split_isomorphism(d, identity(M), B.region([0]), Fraction(1, 2))


def test_step_budget_exhaustion_names_the_element():
    B = uniform_line(48, Fraction(1, 32))
    V = B.region([0])
    d, e = random_isomorphism_instance(5, B, V, Fraction(1, 16))
    assert split_isomorphism(d, e, V, Fraction(1, 2)).ops
    with pytest.raises(ControlFailure, match="budget"):
        split_isomorphism(d, e, V, Fraction(1, 2), budget=0)


@given(st.integers(0, 10**6), st.booleans())
def test_random_instances_split(seed, circle):
    rng = random.Random(seed)
    B = circle_space(48, 3) if circle else uniform_line(24, Fraction(1, 32))
    x = rng.randrange(len(B) - 1)
    V = B.region([x, x + 1])
    d, e = random_isomorphism_instance(seed, B, V, Fraction(1, 16))
    res = split_isomorphism(d, e, V, Fraction(1, 2))
    assert check_split_iso(res) == []
    near = outer_neighborhood(V, Fraction(1, 2))
    for i, loc in enumerate(d.source.locs):
        if loc in near:
            assert res.H.matrix[i, i] == 1 and res.Hp.matrix[i, i] == 1


# ---------------------------------------------------------------- trivial summands

def point_quadratic(d1):
    B = line_space([0])
    C = make_complex(B, {0: module(B, [0], "k"), 1: module(B, [0], "h")}, {1: mat([[d1]])})
    return QuadraticComplex(2, C, ())


def test_deleting_the_whole_trivial_complex():
    Q = point_quadratic(1)
    Qp, cert = delete_trivial_summand(Q, 1, [("h0", "k0")])
    assert Qp.C.is_zero()
    assert verify_equivalence(cert)


def test_deleting_a_summand_next_to_a_form():
    F = form_complex(hyperbolic_form(n=2), line_space([0]))
    Q = direct_sum_quadratic([F, point_quadratic(-1)])
    Qp, cert = delete_trivial_summand(Q, 1, [("h0", "k0")])
    assert middle_form(Qp) == middle_form(F)
    assert verify_equivalence(cert) and check_quadratic(Qp)


def test_non_unit_summand_is_refused():
    with pytest.raises(ValueError):
        delete_trivial_summand(point_quadratic(2), 1, [("h0", "k0")])
    with pytest.raises(ValueError, match="unknown"):
        delete_trivial_summand(point_quadratic(1), 1, [("x", "k0")])


# ---------------------------------------------------------------- splitting complexes

@pytest.fixture(scope="module")
def circle_run():
    doc = fixture("circle_split")
    Q, W = doc.get("Q"), doc.get("W")
    return Q, W, split_poincare_complex(Q, W, Fraction(3, 4))


def test_circle_example_splits(circle_run):
    Q, W, res = circle_run
    assert [Q.C.rank(r) for r in Q.C.degrees] == [16]
    assert check_split_result(Q, W, Fraction(3, 4), res) == []
    assert verify_equivalence(res.cert)


def test_circle_ledger_is_complete_and_monotone(circle_run):
    _, _, res = circle_run
    led = res.ledger
    assert led.stages() == list(STAGES)
    outs = [e.output_radius for e in led.entries]
    assert outs == sorted(outs)
    assert all(a.output_radius == b.input_radius for a, b in zip(led.entries, led.entries[1:]))
    assert led.ratio == led.eps_required / led.delta_input
    assert led.eps_required <= Fraction(3, 4)


def test_support_inside_w_is_degenerate():
    B = circle_space(8)
    Q = form_complex(hyperbolic_form(location=2), B)
    W = B.region(range(5))
    res = split_poincare_complex(Q, W, Fraction(1, 4))
    assert res.D_prime.D.is_zero()
    assert res.D_doubleprime.D.total_rank() == 2
    assert res.ledger.notes["degenerate"] == "inside"
    assert all(e.loss_factor == 1 for e in res.ledger.entries)
    assert check_split_result(Q, W, Fraction(1, 4), res) == []


def test_support_outside_w_is_degenerate():
    B = circle_space(8)
    Q = form_complex(hyperbolic_form(location=6), B)
    W = B.region([0, 1, 2])
    res = split_poincare_complex(Q, W, Fraction(1, 4))
    assert res.D_doubleprime.D.is_zero()
    assert res.ledger.notes["degenerate"] == "outside"
    assert check_split_result(Q, W, Fraction(1, 4), res) == []


def test_failed_split_carries_a_partial_ledger():
    doc = fixture("circle_split")
    Q, W = doc.get("Q"), doc.get("W")
    cert = is_poincare(Q, Fraction(3, 8))
    with pytest.raises(StageFailure) as info:
        split_poincare_complex(Q, W, Fraction(1, 8), poincare_cert=cert)
    exc = info.value
    assert exc.stage in STAGES
    done = exc.ledger.stages()
    assert done == list(STAGES[:len(done)])
    assert exc.stage not in done
    assert exc.ledger.eps_required is None


def test_non_poincare_input_is_an_argument_error():
    B = circle_space(4)
    Q = form_complex(QuadraticForm(((1,),)), B)
    with pytest.raises(ValueError, match="Poincaré"):
        split_poincare_complex(Q, B.region([0, 1]), Fraction(1, 2))


def test_generated_complexes_split_on_the_circle():
    B = circle_space(16)
    W = B.region(range(8))
    for seed in range(3):
        spec = GeneratorSpec(seed, 2, {0: 1, 1: 4, 2: 1}, ("H",), Fraction(1, 16))
        Q = generate_poincare(spec, B)
        res = split_poincare_complex(Q, W, Fraction(3, 4))
        assert check_split_result(Q, W, Fraction(3, 4), res) == []


def test_empty_ledger_ratio():
    led = ControlLedger()
    assert led.ratio is None
    led.advance("subquotient", 0, 0)
    assert led.entries[0].loss_factor == 1
