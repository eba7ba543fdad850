"""Quadratic structures on located chain complexes.

An element of (C ⊗ C)_m is stored as a dict {(q, p): matrix} with q + p = m,
the matrix having rank(C_q) rows and rank(C_p) columns. A quadratic
structure of dimension n is a list psi with psi[s] in (C ⊗ C)_{n-s}.
The sign conventions are listed in docs/conventions.md.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import intmat as im
from .chain_complexes import (
    ChainMap,
    ControlFailure,
    EquivalenceCertificate,
    GeomChainComplex,
    Verdict,
    certify_chain_map,
    check_chain_map,
    check_complex,
    direct_sum_complexes,
    dual_complex,
    mapping_cone,
    same_modules,
    sum_injection,
    zero_complex,
)
from .geometric_algebra import matrix_radius

Elem = dict  # {(q, p): matrix}


# ---------------------------------------------------------------- element algebra

def clean(e: Elem) -> Elem:
    return {k: v for k, v in e.items() if v.size and not im.is_zero(v)}


def add(*elems: Elem, coeffs: Sequence[int] | None = None) -> Elem:
    coeffs = coeffs or [1] * len(elems)
    out: Elem = {}
    for c, e in zip(coeffs, elems):
        if not c:
            continue
        for k, v in e.items():
            out[k] = out[k] + c * v if k in out else c * v
    return clean(out)


def scale(e: Elem, c: int) -> Elem:
    return clean({k: c * v for k, v in e.items()})


def transpose(e: Elem) -> Elem:
    """T: (q, p) -> (p, q) with sign (-1)^{pq}."""
    return {(p, q): im.sign(p * q) * v.T.copy() for (q, p), v in e.items()}


def boundary_elem(C: GeomChainComplex, e: Elem) -> Elem:
    """Differential of C ⊗ C: d on the left factor, (-1)^q d on the right."""
    out: Elem = {}
    for (q, p), m in e.items():
        if C.rank(q - 1):
            v = im.mm(C.d(q), m)
            k = (q - 1, p)
            out[k] = out[k] + v if k in out else v
        if C.rank(p - 1):
            v = im.sign(q) * im.mm(m, C.d(p).T)
            k = (q, p - 1)
            out[k] = out[k] + v if k in out else v
    return clean(out)


def tensor_apply(a: Mapping[int, np.ndarray], da: int, b: Mapping[int, np.ndarray], db: int, e: Elem) -> Elem:
    """(a ⊗ b) for graded maps of degrees da, db: (-1)^{db q} a_q M b_p^T."""
    out: Elem = {}
    for (q, p), m in e.items():
        A, Bm = a.get(q), b.get(p)
        if A is None or Bm is None or not A.size or not Bm.size:
            continue
        v = im.sign(db * q) * im.mmm(A, m, Bm.T)
        k = (q + da, p + db)
        out[k] = out[k] + v if k in out else v
    return clean(out)


def push(f: Mapping[int, np.ndarray], chi: Sequence[Elem]) -> list[Elem]:
    return [tensor_apply(f, 0, f, 0, c) for c in chi]


def w_boundary(C: GeomChainComplex, chi: Sequence[Elem]) -> list[Elem]:
    """(∂χ)_s = (-1)^s dχ_s + χ_{s+1} - (-1)^s Tχ_{s+1}; squares to zero."""
    out = []
    for s in range(len(chi)):
        nxt = chi[s + 1] if s + 1 < len(chi) else {}
        out.append(add(boundary_elem(C, chi[s]), nxt, transpose(nxt), coeffs=[im.sign(s), 1, -im.sign(s)]))
    return out


def add_structures(*structs: Sequence[Elem], coeffs=None) -> list[Elem]:
    coeffs = coeffs or [1] * len(structs)
    L = max((len(s) for s in structs), default=0)
    return [add(*[s[i] if i < len(s) else {} for s in structs], coeffs=coeffs) for i in range(L)]


def structures_equal(a: Sequence[Elem], b: Sequence[Elem]) -> bool:
    return all(not e for e in add_structures(a, b, coeffs=[1, -1]))


def trim(chi: Sequence[Elem]) -> list[Elem]:
    out = [clean(dict(c)) for c in chi]
    while out and not out[-1]:
        out.pop()
    return out


def homotopy_push(g: Mapping, gp: Mapping, h: Mapping, chi: Sequence[Elem]) -> list[Elem]:
    """K with ∂K + K∂ = g_% - g'_% whenever g - g' = d h + h d.

    (Kχ)_s = (-1)^s [ (h⊗g)χ_s + (g'⊗h)χ_s + T (h⊗h) χ_{s+1} ].
    """
    out = []
    for s in range(len(chi)):
        t = add(tensor_apply(h, 1, g, 0, chi[s]), tensor_apply(gp, 0, h, 1, chi[s]))
        if s + 1 < len(chi):
            t = add(t, transpose(tensor_apply(h, 1, h, 1, chi[s + 1])))
        out.append(scale(t, im.sign(s)))
    return trim(out)


def elem_radius(C: GeomChainComplex, e: Elem) -> Fraction:
    return max((matrix_radius(C.space, C.locs(q), C.locs(p), m) for (q, p), m in e.items()), default=Fraction(0))


# ---------------------------------------------------------------- types

def _validate(C: GeomChainComplex, psi: Sequence[Elem], n: int, what: str):
    for s, e in enumerate(psi):
        for (q, p), m in e.items():
            if q + p != n - s:
                raise ValueError(f"{what}: component ({q},{p}) of psi_{s} has wrong total degree (expected {n - s})")
            if m.shape != (C.rank(q), C.rank(p)):
                raise ValueError(f"{what}: component ({q},{p}) of psi_{s} has shape {m.shape}, expected {(C.rank(q), C.rank(p))}")


@dataclass(frozen=True, eq=False)
class QuadraticComplex:
    n: int
    C: GeomChainComplex
    psi: tuple

    def __post_init__(self):
        psi = tuple(trim(self.psi))
        _validate(self.C, psi, self.n, "QuadraticComplex")
        object.__setattr__(self, "psi", psi)

    @property
    def space(self):
        return self.C.space

    @property
    def radius(self) -> Fraction:
        return max([self.C.radius()] + [elem_radius(self.C, e) for e in self.psi])

    def negated(self) -> "QuadraticComplex":
        return QuadraticComplex(self.n, self.C, tuple(scale(e, -1) for e in self.psi))


@dataclass(frozen=True, eq=False)
class QuadraticPair:
    """f: boundary.C -> D with ∂_W(delta_psi) = f_%(boundary.psi); dimension = boundary.n + 1."""

    f: ChainMap
    delta_psi: tuple
    boundary: QuadraticComplex

    def __post_init__(self):
        dp = tuple(trim(self.delta_psi))
        _validate(self.f.target, dp, self.n, "QuadraticPair")
        object.__setattr__(self, "delta_psi", dp)
        if not same_modules(self.f.source, self.boundary.C):
            raise ValueError("pair map source differs from the boundary complex")

    @property
    def n(self) -> int:
        return self.boundary.n + 1

    @property
    def D(self) -> GeomChainComplex:
        return self.f.target

    @property
    def radius(self) -> Fraction:
        return max([self.D.radius(), self.f.radius(), self.boundary.radius] + [elem_radius(self.D, e) for e in self.delta_psi])

    def ambient(self) -> QuadraticComplex:
        """The relative structure viewed on D alone (a complex only when the boundary is empty)."""
        return QuadraticComplex(self.n, self.D, self.delta_psi)


@dataclass(frozen=True, eq=False)
class BordismCertificate:
    left: QuadraticComplex
    right: QuadraticComplex
    pair: QuadraticPair
    radius: Fraction


@dataclass(frozen=True)
class QuadraticForm:
    """Middle-dimensional normal form: psi_0 on Z^rank at one location, dimension n = 2k."""

    matrix: tuple
    n: int = 0
    location: int = 0

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in self.matrix)
        k = len(rows)
        if any(len(r) != k for r in rows):
            raise ValueError("form matrix must be square")
        if self.n % 2:
            raise ValueError("forms live in even dimensions")
        object.__setattr__(self, "matrix", rows)

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def array(self) -> np.ndarray:
        return im.asint(self.matrix) if self.rank else im.zeros(0, 0)

    def symmetrization(self) -> np.ndarray:
        a = self.array()
        return a + im.sign((self.n // 2) ** 2) * a.T

    def is_poincare(self) -> bool:
        return abs(im.det(self.symmetrization())) == 1

    def direct_sum(self, other: "QuadraticForm") -> "QuadraticForm":
        a, b = self.array(), other.array()
        m = im.block([[a, im.zeros(a.shape[0], b.shape[1])], [im.zeros(b.shape[0], a.shape[1]), b]])
        return QuadraticForm(tuple(map(tuple, m.tolist())), self.n, self.location)


# ---------------------------------------------------------------- checks

def check_quadratic(Q: QuadraticComplex) -> Verdict:
    problems = list(check_complex(Q.C).problems)
    for s, e in enumerate(w_boundary(Q.C, list(Q.psi) + [{}])):
        if e:
            problems.append(f"quadratic relation fails at s={s} in components {sorted(e)[:3]}")
    return Verdict.of(problems)


def check_pair(P: QuadraticPair) -> Verdict:
    problems = list(check_chain_map(P.f).problems)
    problems += [f"boundary: {p}" for p in check_quadratic(P.boundary).problems]
    problems += [f"ambient: {p}" for p in check_complex(P.D).problems]
    lhs = w_boundary(P.D, list(P.delta_psi) + [{}])
    rhs = push(P.f.comps, P.boundary.psi)
    if not structures_equal(lhs, rhs):
        problems.append("relative quadratic relation ∂(δψ) = f_%(ψ) fails")
    return Verdict.of(problems)


# ---------------------------------------------------------------- duality and the boundary

def duality_map(Q: QuadraticComplex) -> ChainMap:
    """(1 + T)ψ_0 : C^{n-*} -> C."""
    C, n = Q.C, Q.n
    Cd = dual_complex(C, n)
    phi = add(Q.psi[0], transpose(Q.psi[0])) if Q.psi else {}
    comps = {r: phi[(r, n - r)] for r in Cd.degrees if (r, n - r) in phi}
    f = ChainMap(Cd, C, comps)
    return f


def is_poincare(Q: QuadraticComplex, budget) -> EquivalenceCertificate:
    """Certificate that the duality map is a chain equivalence of radius <= budget."""
    budget = Fraction(budget)
    phi = duality_map(Q)
    try:
        cert = certify_chain_map(phi, budget)
    except ControlFailure as exc:
        raise ControlFailure(f"duality map not certified within {budget}: {exc}", exc.degree, exc.location) from exc
    if cert.bound > budget:
        raise ControlFailure(f"duality certificate radius {cert.bound} exceeds budget {budget}")
    return cert


def algebraic_boundary(Q: QuadraticComplex) -> QuadraticComplex:
    """(n-1)-dimensional Poincaré complex on the desuspended cone of the duality map.

    Degree r holds C_{r+1} ⊕ C^{n-r} with d = [[-d, -φ], [0, δ]].
    """
    C, n = Q.C, Q.n
    space = C.space
    if C.is_zero():
        return QuadraticComplex(n - 1, zero_complex(space), ())
    Cd = dual_complex(C, n)
    phi = duality_map(Q)
    degs = [r - 1 for r in C.nonzero_degrees()] + Cd.nonzero_degrees()
    lo, hi = min(degs), max(degs)
    from .geometric_algebra import direct_sum_modules
    mods = tuple(direct_sum_modules([C.module(r + 1), Cd.module(r)]) for r in range(lo, hi + 1))
    diffs = {}
    for r in range(lo + 1, hi + 1):
        diffs[r] = im.block([[-C.d(r + 1), -phi.at(r)], [im.zeros(Cd.rank(r - 1), C.rank(r + 1)), Cd.d(r)]])
    B = GeomChainComplex(space, lo, mods, diffs)
    chi = list(Q.psi)
    out = []
    for s in range(len(chi) + 1):
        e: Elem = {}
        for q in B.degrees:
            p = n - 1 - s - q
            if not (B.rank(q) and B.rank(p)):
                continue
            M = im.zeros(B.rank(q), B.rank(p))
            if s == 0:
                a = C.rank(q + 1)
                k = C.rank(p + 1)
                if Cd.rank(q) and k:
                    M[a:, :k] = im.sign(q) * im.eye(k)
            else:
                src = chi[s - 1].get((q + 1, p + 1))
                if src is not None:
                    M[:C.rank(q + 1), :C.rank(p + 1)] = im.sign(q + s) * src
            if not im.is_zero(M):
                e[(q, p)] = M
        out.append(e)
    return QuadraticComplex(n - 1, B, tuple(out))


def boundary_projection(Q: QuadraticComplex, dQ: QuadraticComplex) -> ChainMap:
    """The projection ∂C -> C^{n-*} onto the second summand (a chain map)."""
    C, n = Q.C, Q.n
    Cd = dual_complex(C, n)
    comps = {}
    for r in dQ.C.degrees:
        a, b = C.rank(r + 1), Cd.rank(r)
        if not b:
            continue
        m = im.zeros(b, a + b)
        m[:, a:] = im.eye(b)
        comps[r] = m
    return ChainMap(dQ.C, Cd, comps)


def thickening_pair(Q: QuadraticComplex) -> QuadraticPair:
    """The pair (∂C -> C^{n-*}, 0, ∂ψ), a Poincaré pair whenever C is."""
    dQ = algebraic_boundary(Q)
    return QuadraticPair(boundary_projection(Q, dQ), (), dQ)


# ---------------------------------------------------------------- glueing

def glue_union(P1: QuadraticPair, P2: QuadraticPair) -> QuadraticComplex:
    """D1 ∪_E D2: the cone of (f1, -f2): E -> D1 ⊕ D2 with the glued structure."""
    U, psiU, _ = glue_with_maps(P1, P2)
    return QuadraticComplex(P1.n, U, tuple(psiU))


def _boundaries_match(P1: QuadraticPair, P2: QuadraticPair):
    b1, b2 = P1.boundary, P2.boundary
    if b1.n != b2.n:
        raise ValueError(f"boundary dimensions differ: {b1.n} vs {b2.n}")
    E1, E2 = b1.C, b2.C
    for r in sorted(set(E1.degrees) | set(E2.degrees)):
        if E1.module(r) != E2.module(r):
            raise ValueError(f"boundary modules differ in degree {r}")
        if not im.equal(E1.d(r), E2.d(r)):
            raise ValueError(f"boundary differentials differ in degree {r}")
    diff = add_structures(b1.psi, b2.psi)
    for s, e in enumerate(diff):
        if e:
            raise ValueError(f"boundary structures are not opposite: psi_{s} component {sorted(e)[0]} disagrees")


def glue_with_maps(P1: QuadraticPair, P2: QuadraticPair):
    """Returns (U, psi_U, parts) where parts holds the inclusions used for glueing."""
    _boundaries_match(P1, P2)
    E = P1.boundary.C
    D1, D2 = P1.D, P2.D
    Y = direct_sum_complexes([D1, D2])
    j1, j2 = sum_injection([D1, D2], 0, Y), sum_injection([D1, D2], 1, Y)
    h = ChainMap(E, Y, {r: im.mm(j1.at(r), P1.f.at(r)) - im.mm(j2.at(r), P2.f.at(r)) for r in E.degrees})
    U = mapping_cone(h)
    # inclusion Y -> U and k: E_r -> U_{r+1}
    jY, k = {}, {}
    for r in U.degrees:
        m = im.zeros(U.rank(r), Y.rank(r))
        m[:Y.rank(r), :] = im.eye(Y.rank(r))
        jY[r] = m
    for r in E.degrees:
        m = im.zeros(U.rank(r + 1), E.rank(r))
        m[Y.rank(r + 1):, :] = im.eye(E.rank(r))
        k[r] = m
    inY = add_structures(push(j1.comps, P1.delta_psi), push(j2.comps, P2.delta_psi))
    g = {r: im.mm(jY[r], im.mm(j1.at(r), P1.f.at(r))) for r in E.degrees if r in jY}
    gp = {r: im.mm(jY[r], im.mm(j2.at(r), P2.f.at(r))) for r in E.degrees if r in jY}
    K = homotopy_push(g, gp, k, P1.boundary.psi)
    psiU = add_structures(push(jY, inY), K, coeffs=[1, -1])
    return U, psiU, {"Y": Y, "jY": jY, "k": k, "j1": j1, "j2": j2, "h": h}


def direct_sum_quadratic(parts: Sequence[QuadraticComplex]) -> QuadraticComplex:
    n = parts[0].n
    Cs = [P.C for P in parts]
    S = direct_sum_complexes(Cs)
    psi = add_structures(*[push(sum_injection(Cs, i, S).comps, P.psi) for i, P in enumerate(parts)])
    return QuadraticComplex(n, S, tuple(psi))


# ---------------------------------------------------------------- equivalences and bordisms

def transport(Q: QuadraticComplex, cert: EquivalenceCertificate) -> QuadraticComplex:
    """Push the structure along the forward map of a certificate."""
    return QuadraticComplex(Q.n, cert.target, tuple(push(cert.forward.comps, Q.psi)))


def bordism_from_equivalence(Q: QuadraticComplex, cert: EquivalenceCertificate) -> BordismCertificate:
    """Q ~ transport(Q): pair (1, g): C ⊕ C' -> C with δψ = -K ψ."""
    right = transport(Q, cert)
    C = Q.C
    g = cert.backward
    h = cert.homotopy_gf  # g f - 1 = d h + h d on C
    gf = {r: im.mm(g.at(r), cert.forward.at(r)) for r in C.degrees}
    one = {r: im.eye(C.rank(r)) for r in C.degrees}
    dpsi = scale_structure(homotopy_push(gf, one, h.comps, Q.psi), -1)
    return _pair_bordism(Q, right, {r: im.eye(C.rank(r)) for r in C.degrees}, g.comps, dpsi)


def scale_structure(chi: Sequence[Elem], c: int) -> list[Elem]:
    return [scale(e, c) for e in chi]


def _pair_bordism(left: QuadraticComplex, right: QuadraticComplex, a_comps, b_comps, dpsi) -> BordismCertificate:
    C, C2 = left.C, right.C
    bd = direct_sum_quadratic([left, right.negated()])
    Ecx = bd.C
    f = ChainMap(Ecx, C, {r: im.block([[a_comps.get(r, im.zeros(C.rank(r), C.rank(r))),
                                         b_comps.get(r, im.zeros(C.rank(r), C2.rank(r)))]])
                          for r in Ecx.degrees if C.rank(r)})
    pair = QuadraticPair(f, tuple(dpsi), bd)
    return BordismCertificate(left, right, pair, pair.radius)


def product_bordism(Q: QuadraticComplex) -> BordismCertificate:
    one = {r: im.eye(Q.C.rank(r)) for r in Q.C.degrees}
    return _pair_bordism(Q, Q, one, one, [])


def verify_bordism(cert: BordismCertificate, eps) -> Verdict:
    eps = Fraction(eps)
    problems = list(check_pair(cert.pair).problems)
    left, right = cert.left, cert.right
    if left.n != right.n or cert.pair.boundary.n != left.n:
        problems.append("dimensions of the bordism ends do not match")
    expect = direct_sum_quadratic([left, right.negated()])
    got = cert.pair.boundary
    if not same_modules(expect.C, got.C):
        problems.append("pair boundary modules are not left ⊕ right")
    else:
        for r in expect.C.degrees:
            if not im.equal(expect.C.d(r), got.C.d(r)):
                problems.append(f"pair boundary differential differs in degree {r}")
                break
        if not structures_equal(expect.psi, got.psi):
            problems.append("pair boundary structure is not left ⊕ (-right)")
    rad = cert.pair.radius
    if rad != cert.radius:
        problems.append(f"recorded radius {cert.radius} differs from measured {rad}")
    if rad > eps:
        problems.append(f"bordism radius {rad} exceeds eps {eps}")
    return Verdict.of(problems)


# ---------------------------------------------------------------- surgery below the middle

@dataclass(frozen=True, eq=False)
class SurgeryReport:
    steps: tuple  # (degree, kept-out label in degree m, label in degree m-1)
    achieved: Fraction  # radius of the bordism certificate
    eps: Fraction
    remaining_below: dict  # degree -> rank still present below the middle

    @property
    def within_eps(self) -> bool:
        return self.achieved <= self.eps


def _unit_pivots(C: GeomChainComplex, m: int, lim: int):
    """Candidate ±1 entries of d_m, shortest first, then by (row, column)."""
    dm = C.d(m)
    if not dm.size:
        return []
    S = C.space._scaled
    rows, cols = np.nonzero((dm == 1) | (dm == -1))
    cand = [(int(S[C.locs(m - 1)[i], C.locs(m)[j]]), int(i), int(j)) for i, j in zip(rows, cols)]
    return sorted(c for c in cand if c[0] <= lim)


def surger_below_middle(Q: QuadraticComplex, eps, poincare_cert: EquivalenceCertificate | None = None,
                        report: bool = False):
    """Cancel unit handles whose lower end sits below degree ceil(n/2).

    Each cancellation is a Gaussian elimination, so the result is chain
    equivalent to Q and the bordism is the mapping cylinder of the composite
    equivalence. Pivots are kept only while the running complex and the
    certificate stay within eps; whatever is left below the middle is
    reported. Returns (Q', cert), plus a SurgeryReport when report=True.
    """
    from .chain_complexes import compose_certificates, gaussian_eliminate, identity_certificate
    eps = Fraction(eps)
    if poincare_cert is None:
        try:
            is_poincare(Q, eps)
        except ControlFailure as exc:
            raise ValueError(f"surgery needs a Poincaré complex: {exc}") from exc
    top = -(-Q.n // 2)
    lim = Q.space.scaled(eps)
    C = Q.C
    cert = identity_certificate(C)
    steps = []
    progress = True
    while progress:
        progress = False
        for m in C.degrees:
            if m - 1 >= top or not C.rank(m - 1) or not C.rank(m):
                continue
            for _, i, j in _unit_pivots(C, m, lim):
                D, c = gaussian_eliminate(C, m, [j], [i])
                total = compose_certificates(cert, c)
                if D.radius() > eps or total.bound > eps:
                    continue
                steps.append((m, C.module(m).labels[j], C.module(m - 1).labels[i]))
                C, cert = D, total
                progress = True
                break
            if progress:
                break
    Qp = transport(Q, cert)
    bord = bordism_from_equivalence(Q, cert)
    if not report:
        return Qp, bord
    left = {r: Qp.C.rank(r) for r in Qp.C.degrees if r < top and Qp.C.rank(r)}
    return Qp, bord, SurgeryReport(tuple(steps), bord.radius, eps, left)


def below_middle_contraction(Q: QuadraticComplex, budget) -> dict:
    """Maps s_r: C_r -> C_{r+1} with d s + s d = 1 on every degree below ceil(n/2).

    Raises ControlFailure when some low-degree column has no solution within budget.
    """
    from .chain_complexes import solve_contraction
    top = -(-Q.n // 2)
    s, failed = solve_contraction(Q.C, budget)
    bad = {r: xs for r, xs in failed.items() if r < top}
    if bad:
        r = min(bad)
        lab = Q.C.module(r).labels[bad[r][0]]
        raise ControlFailure(f"homology below the middle survives in degree {r} at {lab!r}", degree=r)
    return {r: m for r, m in s.items() if r < top}


# ---------------------------------------------------------------- forms

def form_complex(F: QuadraticForm, space, label: str = "e") -> QuadraticComplex:
    from .geometric_algebra import GeomModule
    k = F.n // 2
    M = GeomModule(space, tuple((f"{label}{i}", F.location) for i in range(F.rank)))
    C = GeomChainComplex(space, k, (M,), {})
    psi = ({(k, k): F.array()},) if F.rank else ()
    return QuadraticComplex(F.n, C, psi)


def middle_form(Q: QuadraticComplex) -> QuadraticForm:
    """psi_0 in the middle degree of an even complex with no modules elsewhere."""
    if Q.n % 2:
        raise ValueError("odd-dimensional complexes carry no middle form")
    k = Q.n // 2
    others = [r for r in Q.C.degrees if r != k and Q.C.rank(r)]
    if others:
        raise ValueError(f"complex has modules outside the middle degree: {others}")
    m = Q.psi[0].get((k, k)) if Q.psi else None
    rank = Q.C.rank(k)
    if m is None:
        m = im.zeros(rank, rank)
    loc = int(min(Q.C.locs(k))) if rank else 0
    return QuadraticForm(tuple(tuple(int(v) for v in row) for row in m.tolist()), Q.n, loc)


def _charpoly(a: np.ndarray) -> list[Fraction]:
    """Coefficients of det(xI - a), leading first: Hessenberg reduction over Q, then the usual recurrence."""
    n = a.shape[0]
    H = [[Fraction(int(a[i, j])) for j in range(n)] for i in range(n)]
    for m in range(1, n - 1):
        piv = next((i for i in range(m, n) if H[i][m - 1] != 0), None)
        if piv is None:
            continue
        if piv != m:  # similarity by a transposition
            H[piv], H[m] = H[m], H[piv]
            for row in H:
                row[piv], row[m] = row[m], row[piv]
        p = H[m][m - 1]
        for i in range(m + 1, n):
            u = H[i][m - 1] / p
            if u:
                Hi, Hm = H[i], H[m]
                for j in range(n):
                    if Hm[j]:
                        Hi[j] -= u * Hm[j]
                for row in H:
                    if row[i]:
                        row[m] += u * row[i]
    # p_k = charpoly of the leading k x k block, stored low degree first
    polys = [[Fraction(1)]]
    for k in range(1, n + 1):
        prev = polys[-1]
        p = [Fraction(0)] + prev
        for i in range(len(prev)):
            p[i] -= H[k - 1][k - 1] * prev[i]
        t = Fraction(1)
        for i in range(1, k):
            t *= H[k - i][k - i - 1]
            if not t:
                break
            c = t * H[k - i - 1][k - 1]
            if not c:
                continue
            for j, v in enumerate(polys[k - i - 1]):
                p[j] -= c * v
        polys.append(p)
    return list(reversed(polys[-1]))


def _sign_changes(seq) -> int:
    s = [x for x in seq if x != 0]
    return sum(1 for a, b in zip(s, s[1:]) if (a > 0) != (b > 0))


def signature(F: QuadraticForm) -> int:
    """Signature of the symmetrized matrix, via Descartes' rule on its characteristic polynomial."""
    if F.rank == 0:
        return 0
    if (F.n // 2) % 2:
        raise ValueError("signature needs a symmetric form (dimension divisible by 4)")
    S = F.symmetrization()
    if im.det(S) == 0:
        raise ValueError("degenerate symmetrization has no signature in this sense")
    c = _charpoly(S)
    k = len(c) - 1
    pos = _sign_changes(c)
    neg = _sign_changes([x * (-1) ** (k - i) for i, x in enumerate(c)])
    return pos - neg


def arf(F: QuadraticForm) -> int:
    """Arf invariant of q(x) = x^T M x mod 2, via a symplectic basis mod 2."""
    k = F.rank
    A = F.array()
    b = [[int(A[i, j] + A[j, i]) % 2 for j in range(k)] for i in range(k)]

    def bil(x, y):
        return sum(x[i] * b[i][j] * y[j] for i in range(k) for j in range(k)) % 2

    def q(x):
        return sum(x[i] * int(A[i, j]) * x[j] for i in range(k) for j in range(k)) % 2

    if k % 2 or im.rank_mod_p(im.asint(b) if k else im.zeros(0, 0), 2) != k:
        raise ValueError("arf needs a nonsingular bilinear form mod 2")
    vecs = [[1 if i == j else 0 for i in range(k)] for j in range(k)]
    total = 0
    while vecs:
        e = vecs.pop(0)
        idx = next(i for i, v in enumerate(vecs) if bil(e, v))
        f = vecs.pop(idx)
        total += q(e) * q(f)
        rest = []
        for v in vecs:
            # v - b(v,f) e - b(v,e) f is orthogonal to e and f (mod 2)
            be, bf = bil(v, e), bil(v, f)
            rest.append([(v[i] + bf * e[i] + be * f[i]) % 2 for i in range(k)])
        vecs = rest
    return total % 2


E8_GRAM = (
    (2, -1, 0, 0, 0, 0, 0, 0),
    (-1, 2, -1, 0, 0, 0, 0, 0),
    (0, -1, 2, -1, 0, 0, 0, -1),
    (0, 0, -1, 2, -1, 0, 0, 0),
    (0, 0, 0, -1, 2, -1, 0, 0),
    (0, 0, 0, 0, -1, 2, -1, 0),
    (0, 0, 0, 0, 0, -1, 2, 0),
    (0, 0, -1, 0, 0, 0, 0, 2),
)


def form_from_gram(gram, n: int = 0, location: int = 0) -> QuadraticForm:
    """The quadratic form with psi + psi^T = gram (gram even symmetric)."""
    k = len(gram)
    m = [[0] * k for _ in range(k)]
    for i in range(k):
        if gram[i][i] % 2:
            raise ValueError("gram matrix must be even")
        m[i][i] = gram[i][i] // 2
        for j in range(i + 1, k):
            m[i][j] = gram[i][j]
    return QuadraticForm(tuple(map(tuple, m)), n, location)


def e8_form(n: int = 0, location: int = 0) -> QuadraticForm:
    return form_from_gram(E8_GRAM, n, location)


def hyperbolic_form(n: int = 0, location: int = 0) -> QuadraticForm:
    return QuadraticForm(((0, 1), (0, 0)), n, location)
