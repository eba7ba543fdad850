from __future__ import annotations

from fractions import Fraction

import pytest

from ctrlsurg import intmat as im
from ctrlsurg.assembly import (
    PoincareCycle,
    SimplicialBase,
    assemble,
    assemble_with_fragments,
    bisectable_loop_cycle,
    check_cycle,
    fragment_locality,
    images_from_vertices,
    loop_cycle,
    split_edge_piece,
    subdivide,
    subdivision_certificate,
)
from ctrlsurg.chain_complexes import (
    ChainMap,
    check_complex,
    find_contraction_over,
    make_complex,
    verify_equivalence,
    zero_complex,
)
from ctrlsurg.control_space import circle_space, uniform_line
from ctrlsurg.fixtures import fixture
from ctrlsurg.quadratic_structures import (
    QuadraticComplex,
    QuadraticForm,
    QuadraticPair,
    arf,
    check_quadratic,
    e8_form,
    form_complex,
    hyperbolic_form,
    middle_form,
    signature,
)

from conftest import mat, module
from oracles import diagonal_signature, majority_arf

LINE = uniform_line(5, Fraction(1, 16))


def cap(E: QuadraticComplex) -> QuadraticPair:
    """E bounding nothing: the pair E -> 0."""
    Z = zero_complex(E.space)
    return QuadraticPair(ChainMap(E.C, Z, {}), (), E)


def closed(Q: QuadraticComplex) -> QuadraticPair:
    Z = zero_complex(Q.space)
    return QuadraticPair(ChainMap(Z, Q.C, {}), Q.psi, QuadraticComplex(Q.n - 1, Z, ()))


def unit_handle(point=2, d=1):
    C = make_complex(LINE, {0: module(LINE, [point], "k"), 1: module(LINE, [point], "h")}, {1: mat([[d]])})
    return QuadraticComplex(0, C, ())


def path_base(vertex_points):
    k = len(vertex_points)
    simp = [(i,) for i in range(k)] + [(i, i + 1) for i in range(k - 1)]
    verts = dict(enumerate(vertex_points))
    return SimplicialBase(LINE, tuple(simp), images_from_vertices(LINE, verts, simp))


def test_two_edges_cancel_along_a_shared_face():
    E = unit_handle()
    Z = PoincareCycle(path_base([0, 2, 4]), 1, {(0, 1): cap(E), (1, 2): cap(E.negated())}, {(1,): E})
    assert check_cycle(Z) == []
    Q = assemble(Z)
    assert check_complex(Q.C) and check_quadratic(Q)
    # zero homology: contractible with no defect anywhere
    assert find_contraction_over(Q.C, LINE.whole, Fraction(1, 4)).exact_over is None


def test_bisecting_a_single_edge():
    K = make_complex(LINE, {0: module(LINE, [1], "x"), 1: module(LINE, [1], "y")}, {1: mat([[2]])})
    P = closed(QuadraticComplex(1, K, ()))
    none = QuadraticComplex(0, zero_complex(LINE), ())
    base = path_base([0, 4])
    piece = split_edge_piece(PoincareCycle(base, 1, {(0, 1): P}), (0, 1), P, cap(none), none)
    Z = PoincareCycle(base, 1, {(0, 1): piece}, {}, {(0, 1): (P, cap(none), none)})
    assert check_cycle(Z) == []
    Zs = subdivide(Z)
    assert len(Zs.base.tops()) == 2 and check_cycle(Zs) == []
    A, B = assemble(Z), assemble(Zs)
    assert [A.C.rank(r) for r in A.C.degrees] == [B.C.rank(r) for r in B.C.degrees]
    assert all(im.equal(A.C.d(r), B.C.d(r)) for r in A.C.degrees)
    cert = subdivision_certificate(Z, Zs)
    assert verify_equivalence(cert) and cert.bound == 0


@pytest.mark.parametrize("F", [e8_form(), hyperbolic_form(), QuadraticForm(((1, 1), (0, 1)), n=2),
                               e8_form().direct_sum(hyperbolic_form())], ids=["E8", "H", "twisted", "E8+H"])
def test_a_single_closed_piece_keeps_its_invariants(F):
    B = circle_space(3)
    simp = ((0,), (1,), (2,))
    base = SimplicialBase(B, simp, {s: [s[0]] for s in simp})
    none = QuadraticComplex(F.n, zero_complex(B), ())
    Z = PoincareCycle(base, F.n, {(0,): closed(form_complex(F, B)), (1,): closed(none), (2,): closed(none)})
    assert check_cycle(Z) == []
    G = middle_form(assemble(Z))
    if (F.n // 2) % 2 == 0:
        assert signature(G) == diagonal_signature(F.symmetrization())
    else:
        assert arf(G) == majority_arf(F.matrix)


def test_loop_assembly_is_small_and_local():
    B = circle_space(16)
    Z = loop_cycle(B, list(range(0, 16, 2)), form_complex(hyperbolic_form(), B))
    assert check_cycle(Z) == []
    Q, frags = assemble_with_fragments(Z)
    assert check_quadratic(Q)
    assert Z.base.max_diameter() == Fraction(1, 8)
    assert Q.radius <= Z.base.max_diameter()
    assert fragment_locality(Z, Q, frags) == []


def test_finer_loops_assemble_below_an_eighth():
    B = circle_space(32)
    Z = loop_cycle(B, list(range(0, 32, 3)), form_complex(hyperbolic_form(location=0), B))
    assert Z.base.max_diameter() < Fraction(1, 8)
    assert assemble(Z).radius < Fraction(1, 8)


def test_mismatched_boundary_names_the_simplex():
    # a zero structure equals its negative, so use a form
    E = form_complex(hyperbolic_form(location=2), LINE)
    Z = PoincareCycle(path_base([0, 2, 4]), 1, {(0, 1): cap(E), (1, 2): cap(E)}, {(1,): E})
    problems = check_cycle(Z)
    assert any("1-2" in p for p in problems)
    with pytest.raises(ValueError, match="invalid cycle"):
        assemble(Z)


def test_base_validation():
    with pytest.raises(ValueError, match="not listed"):
        SimplicialBase(LINE, ((0,), (0, 1)), {(0,): [0], (0, 1): [0, 1]})
    with pytest.raises(ValueError, match="inside"):
        SimplicialBase(LINE, ((0,), (1,), (0, 1)), {(0,): [0], (1,): [3], (0, 1): [0, 1]})


def test_shipped_cycle_subdivides_to_an_equivalent_assembly():
    Z = fixture("circle_cycle").get("Z")
    assert check_cycle(Z) == []
    Zs = subdivide(Z)
    assert check_cycle(Zs) == []
    assert Zs.base.max_diameter() <= Z.base.max_diameter()
    cert = subdivision_certificate(Z, Zs)
    assert verify_equivalence(cert)
    assert cert.bound <= Z.base.max_diameter()


def test_subdivision_needs_halves():
    B = circle_space(8)
    Z = loop_cycle(B, [0, 3, 5], form_complex(hyperbolic_form(), B))
    with pytest.raises(ValueError, match="subdivision data"):
        subdivide(Z)
    Zb = bisectable_loop_cycle(B, [0, 3, 5], form_complex(hyperbolic_form(), B))
    assert check_cycle(subdivide(Zb)) == []
