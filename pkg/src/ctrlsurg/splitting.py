"""Splitting controlled isomorphisms and controlled Poincaré complexes."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import intmat as im
from .chain_complexes import (
    ChainMap,
    ControlFailure,
    EquivalenceCertificate,
    GeomChainComplex,
    certify_chain_map,
    change_basis,
    compose_certificates,
    compose_maps,
    contraction_where_possible,
    delete_pairs,
    dual_complex,
    fold_over_region,
    invert_certificate,
    max_subcomplex_and_quotient,
    relabel_certificate,
    relocate,
    verify_equivalence,
    zero_complex,
    zero_map,
)
from .control_space import Region, as_rational, outer_neighborhood
from .geometric_algebra import GeomMorphism, is_basis_bijection_over, radius
from .quadratic_structures import (
    QuadraticComplex,
    QuadraticPair,
    add as add_elem,
    add_structures,
    algebraic_boundary,
    boundary_projection,
    check_pair,
    check_quadratic,
    duality_map,
    glue_with_maps,
    homotopy_push,
    is_poincare,
    push,
    scale_structure,
    tensor_apply,
    transpose,
    w_boundary,
)


# ---------------------------------------------------------------- ledger

@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    input_radius: Fraction
    output_radius: Fraction
    declared_bound: Fraction | None = None

    @property
    def loss_factor(self) -> Fraction | None:
        """output / input; 1 when both vanish, None when only the input vanishes."""
        if self.input_radius == 0:
            return Fraction(1) if self.output_radius == 0 else None
        return self.output_radius / self.input_radius


@dataclass
class ControlLedger:
    entries: list = field(default_factory=list)
    delta_input: Fraction = Fraction(0)
    eps_required: Fraction | None = None
    notes: dict = field(default_factory=dict)

    def record(self, stage: str, inp, out, bound=None) -> LedgerEntry:
        e = LedgerEntry(stage, Fraction(inp), Fraction(out), None if bound is None else Fraction(bound))
        self.entries.append(e)
        return e

    @property
    def ratio(self) -> Fraction | None:
        """Headline number eps_required / delta_input (None when delta is 0 or the run failed)."""
        if self.eps_required is None or self.delta_input == 0:
            return None
        return self.eps_required / self.delta_input

    def advance(self, stage: str, measured, bound) -> LedgerEntry:
        """Record a stage whose output is everything built so far (running maxima)."""
        prev = self.entries[-1] if self.entries else None
        inp = prev.output_radius if prev else self.delta_input
        out = max(inp, Fraction(measured))
        b = Fraction(bound)
        if prev is not None and prev.declared_bound is not None:
            b = max(b, prev.declared_bound)
        return self.record(stage, inp, out, b)

    def stages(self) -> list[str]:
        return [e.stage for e in self.entries]

    def table(self) -> str:
        rows = [("stage", "input", "output", "bound", "loss")]
        for e in self.entries:
            loss = "-" if e.loss_factor is None else str(e.loss_factor)
            rows.append((e.stage, str(e.input_radius), str(e.output_radius),
                         "-" if e.declared_bound is None else str(e.declared_bound), loss))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.append(f"delta_input = {self.delta_input}")
        lines.append(f"eps_required = {self.eps_required}")
        lines.append(f"ratio = {self.ratio}")
        for k in sorted(self.notes):
            lines.append(f"{k} = {self.notes[k]}")
        return "\n".join(lines)


STAGES = ("subquotient", "boundary", "contraction", "fold", "split", "delete")


class StageFailure(ControlFailure):
    def __init__(self, stage: str, message: str, ledger: ControlLedger, cause: Exception | None = None):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage
        self.ledger = ledger
        self.cause = cause


# ---------------------------------------------------------------- split isomorphisms

@dataclass(frozen=True, eq=False)
class ElementaryOp:
    side: str  # "row" acts on the target (H'), "col" on the source (H)
    kind: str  # "add" or "swap"
    a: int
    b: int
    c: int = 0
    radius: Fraction = Fraction(0)


@dataclass(frozen=True, eq=False)
class SplitIsoResult:
    H: GeomMorphism
    H_inv: GeomMorphism
    Hp: GeomMorphism
    Hp_inv: GeomMorphism
    conjugated: GeomMorphism
    d: GeomMorphism
    V: Region
    eps: Fraction
    pairs: tuple  # (source index, target index) with conjugated entry ±1 and clean row/column
    ops: tuple
    ledger: ControlLedger
    strict: bool = True  # False: best effort, only V itself is left alone


def split_isomorphism(d: GeomMorphism, inverse_cert: GeomMorphism, V: Region, eps, budget: int | None = None,
                      check_pre: bool = True, strict: bool = True) -> SplitIsoResult:
    """Find H, H' (products of local elementary moves) so H' d H is a basis bijection off V^{2 eps}.

    Source columns are processed in decreasing distance from V. Each column is
    reduced by Euclid row steps to a single unit, moved to the nearest free
    target row, and its row is then cleared by column steps. No move touches a
    basis element located in outer(V, eps).
    """
    from .geometric_algebra import is_delta_iso_certificate

    eps = as_rational(eps)
    space = d.space
    delta = max(radius(d), radius(inverse_cert))
    ledger = ControlLedger(delta_input=delta)
    if check_pre:
        if eps <= delta:
            raise ValueError(f"eps {eps} must exceed delta {delta}")
        probs = is_delta_iso_certificate(d, inverse_cert, V, delta)
        if probs:
            raise ValueError(f"inverse certificate does not witness a delta isomorphism: {probs[0]}")
    A, Ap = d.source, d.target
    M = d.matrix.copy()
    ns, nt = A.rank, Ap.rank
    H, Hi = im.eye(ns), im.eye(ns)
    Hp, Hpi = im.eye(nt), im.eye(nt)
    S = space._scaled
    lim = space.scaled(eps)
    # strict mode keeps an eps buffer around V untouched; otherwise only V itself is off limits
    if not V.members:
        frozen = np.zeros(len(space), dtype=bool)
    else:
        frozen = (outer_neighborhood(V, eps) if strict else V).mask()
    far = (outer_neighborhood(V, 2 * eps).complement() if V.members else space.whole)
    far_mask = far.mask()
    vdist = V.distance_to() if V.members else np.full(len(space), 1 << 60, dtype=object)
    ops: list[ElementaryOp] = []
    budget = budget if budget is not None else 50 * (ns + nt) + 100
    done_rows: set[int] = set()
    done_cols: set[int] = set()
    pairs = []

    def op_radius(locs, a, b):
        return Fraction(int(S[locs[a], locs[b]]), space._denom)

    def row_add(a, b, c):  # row a += c row b
        M[a, :] += c * M[b, :]
        Hp[a, :] += c * Hp[b, :]
        Hpi[:, b] -= c * Hpi[:, a]
        ops.append(ElementaryOp("row", "add", a, b, c, op_radius(Ap.locs, a, b)))

    def row_swap(a, b):
        M[[a, b], :] = M[[b, a], :]
        Hp[[a, b], :] = Hp[[b, a], :]
        Hpi[:, [a, b]] = Hpi[:, [b, a]]
        ops.append(ElementaryOp("row", "swap", a, b, 0, op_radius(Ap.locs, a, b)))

    def col_add(a, b, c):  # col a += c col b
        M[:, a] += c * M[:, b]
        H[:, a] += c * H[:, b]
        Hi[b, :] -= c * Hi[a, :]
        ops.append(ElementaryOp("col", "add", a, b, c, op_radius(A.locs, a, b)))

    order = sorted(range(ns), key=lambda j: (-int(vdist[A.locs[j]]), j))
    for j in order:
        if len(ops) > budget:
            raise ControlFailure(f"step budget {budget} exhausted at source element {A.labels[j]!r}",
                                 location=space.points[A.locs[j]])
        lj = A.locs[j]
        required = far_mask[lj] and strict
        if frozen[lj]:
            continue
        rows = [int(i) for i in np.nonzero(M[:, j] != 0)[0]]
        reason = None
        if not rows:
            reason = "column is zero"
        elif any(frozen[Ap.locs[i]] for i in rows):
            reason = "column reaches the frozen neighborhood of V"
        elif any(S[Ap.locs[a], Ap.locs[b]] > lim for a in rows for b in rows):
            reason = "column support wider than eps"
        else:
            from math import gcd
            g = 0
            for i in rows:
                g = gcd(g, int(M[i, j]))
            if g != 1:
                reason = f"column gcd {g} is not a unit"
        if reason is None:
            # row i with entries in columns that would need clearing must also be clear of V
            pass
        if reason is not None:
            if required:
                raise ControlFailure(f"cannot split at source element {A.labels[j]!r}: {reason}",
                                     location=space.points[lj])
            continue
        snapshot = (M.copy(), H.copy(), Hi.copy(), Hp.copy(), Hpi.copy(), len(ops))
        # Euclid on column j
        while True:
            nz = [i for i in rows if M[i, j] != 0]
            if len(nz) == 1:
                break
            p = min(nz, key=lambda i: (abs(M[i, j]), S[Ap.locs[i], lj], i))
            for q in nz:
                if q != p:
                    row_add(q, p, -(M[q, j] // M[p, j]))
        p = next(i for i in rows if M[i, j] != 0)
        target = min(rows, key=lambda i: (not far_mask[Ap.locs[i]] if far_mask[lj] else False, S[Ap.locs[i], lj], i))
        if target != p:
            row_swap(target, p)
        i = target
        # clear row i using column j
        bad = None
        for k in [int(x) for x in np.nonzero(M[i, :] != 0)[0]]:
            if k == j:
                continue
            if frozen[A.locs[k]] or S[A.locs[k], lj] > lim:
                bad = k
                break
            col_add(k, j, -(M[i, k] * M[i, j]))  # M[i, j] = ±1 so this zeroes entry (i, k)
        if bad is not None:
            M[:], H[:], Hi[:], Hp[:], Hpi[:] = snapshot[:5]
            del ops[snapshot[5]:]
            if required:
                raise ControlFailure(f"cannot clear row for source element {A.labels[j]!r}: "
                                     f"entry at {A.labels[bad]!r} is frozen or too far", location=space.points[lj])
            continue
        for op in ops[snapshot[5]:]:
            if op.radius > eps:
                raise AssertionError("elementary move exceeds eps")
        done_rows.add(i)
        done_cols.add(j)
        pairs.append((j, i))
    conj = GeomMorphism(A, Ap, M)
    res = SplitIsoResult(
        GeomMorphism(A, A, H), GeomMorphism(A, A, Hi), GeomMorphism(Ap, Ap, Hp), GeomMorphism(Ap, Ap, Hpi),
        conj, d, V, eps, tuple(pairs), tuple(ops), ledger, strict)
    op_sum = sum((op.radius for op in ops), Fraction(0))
    ledger.advance("split", max(radius(res.H), radius(res.Hp), radius(conj)), op_sum * 2 + delta)
    ledger.eps_required = eps
    return res


def check_split_iso(res: SplitIsoResult) -> list[str]:
    """Exact checks of the split-isomorphism conclusions."""
    problems = []
    A, Ap = res.d.source, res.d.target
    if not im.equal(im.mm(res.H.matrix, res.H_inv.matrix), im.eye(A.rank)):
        problems.append("H H^-1 != 1")
    if not im.equal(im.mm(res.Hp.matrix, res.Hp_inv.matrix), im.eye(Ap.rank)):
        problems.append("H' H'^-1 != 1")
    expect = im.mmm(res.Hp.matrix, res.d.matrix, res.H.matrix)
    if not im.equal(expect, res.conjugated.matrix):
        problems.append("conjugated != H' d H")
    V = res.V
    near = outer_neighborhood(V, res.eps) if V.members and res.strict else V
    for name, Hm, mod in (("H", res.H, A), ("H'", res.Hp, Ap)):
        idx = mod.indices_in(near)
        for x in idx:
            col = Hm.matrix[:, x]
            row = Hm.matrix[x, :]
            if col[x] != 1 or np.count_nonzero(col != 0) != 1 or np.count_nonzero(row != 0) != 1:
                problems.append(f"{name} moves basis element {mod.labels[x]!r} located in V^eps")
                break
    far = outer_neighborhood(V, 2 * res.eps).complement() if V.members else V.space.whole
    if res.strict and not is_basis_bijection_over(res.conjugated, far):
        problems.append("conjugated is not a basis bijection off V^{2 eps}")
    for op in res.ops:
        if op.radius > res.eps:
            problems.append(f"elementary move of radius {op.radius} exceeds eps")
            break
    return problems


# ---------------------------------------------------------------- trivial summands

def delete_trivial_summand(Q: QuadraticComplex, degree: int, pairs: Sequence[tuple[str, str]]):
    """Remove split pairs (label in degree m, label in degree m-1) joined by ±1.

    Returns (Q', certificate Q.C ≃ Q'.C); the structure is pushed forward.
    """
    C = Q.C
    top, bot = C.module(degree).labels, C.module(degree - 1).labels
    idx = []
    for a, b in pairs:
        if a not in top or b not in bot:
            raise ValueError(f"unknown summand labels ({a!r}, {b!r}) in degrees {degree}, {degree - 1}")
        idx.append((top.index(a), bot.index(b)))
    D, cert = delete_pairs(C, degree, idx)
    return QuadraticComplex(Q.n, D, tuple(push(cert.forward.comps, Q.psi))), cert


# ---------------------------------------------------------------- splitting a Poincaré complex

@dataclass(frozen=True, eq=False)
class SplitComplexResult:
    D_prime: QuadraticPair
    D_doubleprime: QuadraticPair
    C: QuadraticComplex
    cert: EquivalenceCertificate  # D.C -> union
    union: QuadraticComplex
    ledger: ControlLedger


def _zero_pair(space, n: int) -> QuadraticPair:
    Z = zero_complex(space)
    return QuadraticPair(zero_map(Z, Z), (), QuadraticComplex(n - 1, Z, ()))


def _closed_pair(Q: QuadraticComplex) -> QuadraticPair:
    Z = zero_complex(Q.space)
    return QuadraticPair(zero_map(Z, Q.C), Q.psi, QuadraticComplex(Q.n - 1, Z, ()))


def transport_pair(P: QuadraticPair, cert: EquivalenceCertificate) -> QuadraticPair:
    """Move the boundary of a pair along an equivalence E ≃ E'.

    With F: E -> E', G: E' -> E and G F - 1 = d h + h d, the new pair is
    (f G, δψ + f_% K ψ_E, F_% ψ_E).
    """
    F, G = cert.forward, cert.backward
    E = cert.source
    gf = {r: im.mm(G.at(r), F.at(r)) for r in E.degrees}
    one = {r: im.eye(E.rank(r)) for r in E.degrees}
    K = homotopy_push(gf, one, cert.homotopy_gf.comps, P.boundary.psi)
    dpsi = add_structures(P.delta_psi, push(P.f.comps, K))
    new_boundary = QuadraticComplex(P.boundary.n, cert.target, tuple(push(F.comps, P.boundary.psi)))
    return QuadraticPair(compose_maps(P.f, G), tuple(dpsi), new_boundary)


def complementary_pair(D: QuadraticComplex, sub, quot, inc: ChainMap, proj: ChainMap, dQ: QuadraticComplex):
    """The pair (λ: ∂Q -> S, σ_% η, -∂χ) and the homotopy H: ∂Q -> C used to map the union back to C.

    Here j = φ p^T : Q^{n-*} -> C, H(a, b) = s_Q a, and i_S λ = j i + d H + H d.
    """
    n = D.n
    C = D.C
    Cd = dual_complex(quot, n)
    phi = duality_map(D)
    E = dQ.C
    # j: Q^{n-*} -> C
    j = {r: im.mm(phi.at(r), proj.at(n - r).T) for r in Cd.degrees if C.rank(r) and Cd.rank(r)}
    # H: E_r -> C_{r+1}
    Hm = {}
    for r in E.degrees:
        a = quot.rank(r + 1)
        m = im.zeros(C.rank(r + 1), E.rank(r))
        if a:
            m[:, :a] = proj.at(r + 1).T
        Hm[r] = m
    ip = boundary_projection(QuadraticComplex(n, quot, ()), dQ)
    g = {}
    for r in E.degrees:
        v = im.zeros(C.rank(r), E.rank(r))
        if r in j:
            v = v + im.mm(j[r], ip.at(r))
        v = v + im.mm(C.d(r + 1), Hm[r]) + im.mm(Hm.get(r - 1, im.zeros(C.rank(r), E.rank(r - 1))), E.d(r))
        g[r] = v
    for r, v in g.items():
        if not im.is_zero(im.mm(proj.at(r), v)):
            raise AssertionError("complementary map does not land in the subcomplex")
    sigma = {r: inc.at(r).T.copy() for r in C.degrees}
    lam = ChainMap(E, sub, {r: im.mm(sigma[r], g[r]) for r in E.degrees if sub.rank(r) and E.rank(r)})
    PS = {r: im.mm(inc.at(r), sigma[r]) for r in C.degrees}
    PQ = {r: im.mm(proj.at(r).T, proj.at(r)) for r in C.degrees}
    nu = {r: im.mmm(PS[r - 1], C.d(r), PQ[r]) for r in C.degrees if C.rank(r - 1)}
    psi = list(D.psi)
    eta = []
    for s in range(len(psi) + 2):
        parts, co = [], []
        if s < len(psi):
            parts.append(tensor_apply(PS, 0, PS, 0, psi[s])); co.append(1)
        if 0 <= s - 1 < len(psi):
            parts.append(tensor_apply(PS, 0, nu, -1, transpose(psi[s - 1]))); co.append(-1)
        if 0 <= s - 2 < len(psi):
            parts.append(tensor_apply(nu, -1, nu, -1, psi[s - 2])); co.append(-1)
        eta.append(add_elem(*parts, coeffs=co) if parts else {})
    eta_S = push(sigma, eta)
    minus = QuadraticComplex(dQ.n, E, tuple(scale_structure(dQ.psi, -1)))
    target = push(lam.comps, minus.psi)
    eta_S = _refine_top(sub, eta_S, target)
    P1 = QuadraticPair(lam, tuple(eta_S), minus)
    return P1, {"j": j, "H": Hm}


def _solve_symmetric(r: dict, s: int) -> dict | None:
    """ξ with ξ - (-1)^s T ξ = r, or None when r is not in the image."""
    xi = {}
    eps = im.sign(s)
    for (q, p), m in r.items():
        if (q, p) in xi:
            continue
        e = eps * im.sign(q * p)
        if q != p:
            other = r.get((p, q))
            expect = -e * m.T
            if other is None or not im.equal(other, expect):
                return None
            if q < p:
                xi[(q, p)] = m.copy()
            else:
                xi[(p, q)] = other.copy()
            continue
        if e == 1:
            if not im.equal(m, -m.T) or any(m[i, i] for i in range(m.shape[0])):
                return None
            xi[(q, q)] = np.triu(m, 1)
        else:
            if not im.equal(m, m.T) or any(m[i, i] % 2 for i in range(m.shape[0])):
                return None
            u = np.triu(m, 1)
            for i in range(m.shape[0]):
                u[i, i] = m[i, i] // 2
            xi[(q, q)] = u
    return xi


def _refine_top(S: GeomChainComplex, eta: list, target: list) -> list:
    """Add terms ξ_{s+1} so ∂_W η matches the target where a tensor formula cannot.

    Needed when a residual is (1 ± T)-symmetric on a diagonal component: the
    fix takes the upper triangle and half the diagonal, which no tensor of
    chain maps produces.
    """
    eta = list(eta)
    for _ in range(len(eta) + len(target) + 2):
        lhs = w_boundary(S, eta + [{}])
        diff = add_structures(target, lhs, coeffs=[1, -1])
        bad = [i for i, e in enumerate(diff) if e]
        if not bad:
            return eta
        s = bad[-1]
        xi = _solve_symmetric(diff[s], s)
        if xi is None:
            raise AssertionError(f"complementary structure has a residual at s={s} that cannot be absorbed")
        while len(eta) <= s + 1:
            eta.append({})
        eta[s + 1] = add_elem(eta[s + 1], xi)
    raise AssertionError("complementary structure refinement did not settle")


def _choose_fold_degree(E: GeomChainComplex, R: Region) -> int:
    mask = R.mask()
    degs = [r for r in E.degrees if any(mask[x] for x in E.locs(r))]
    if not degs:
        return E.lo + 1
    best = None
    for j in range(min(degs) + 1, max(max(degs), min(degs) + 1) + 1):
        cost = sum((r - j + 1) // 2 for r in degs if r > j) + sum((j - 1 - r + 1) // 2 for r in degs if r < j - 1)
        if best is None or cost < best[0]:
            best = (cost, j)
    return best[1]


def _support_ok(mods, region_mask) -> bool:
    return all(region_mask[x] for M in mods for x in M.locs)


def _complex_support(C: GeomChainComplex) -> set[int]:
    return {int(x) for M in C.modules for x in M.locs}


def split_poincare_complex(D: QuadraticComplex, W: Region, eps, budget=None, poincare_cert=None) -> SplitComplexResult:
    """Split D along W into pairs over B - W and W^eps glued along a boundary near the cut.

    The subcomplex side is cut at increasing distance m from W until the
    residual common boundary lies in B - W; each attempt runs the full chain
    of stages (subquotient, boundary, contraction, fold, split, delete).
    """
    eps = as_rational(eps)
    space = D.space
    delta = D.radius
    check = check_quadratic(D)
    if not check:
        raise ValueError(f"input is not a quadratic complex: {check.problems[0]}")
    try:
        pcert = poincare_cert or is_poincare(D, eps)
    except ControlFailure as exc:
        raise ValueError(f"input is not certified Poincaré within {eps}: {exc}") from exc
    r_poincare = pcert.bound
    support = _complex_support(D.C)
    wdist = W.distance_to() if W.members else np.full(len(space), 1 << 60)
    near_w = outer_neighborhood(W, eps)
    # trivial cases: nothing on one side of the cut
    if all(x in W for x in support):
        return _degenerate_split(D, "inside", W, eps, delta)
    if not any(x in W for x in support):
        return _degenerate_split(D, "outside", W, eps, delta)
    cuts = sorted({0} | {int(wdist[x]) for x in range(len(space)) if x not in W})
    last_failure = None
    for m_scaled in cuts:
        cut = Region(space, frozenset(x for x in range(len(space)) if int(wdist[x]) > m_scaled)) if W.members else space.whole
        ledger = ControlLedger(delta_input=delta)
        ledger.notes["cut"] = Fraction(m_scaled, space._denom)
        try:
            res = _split_at(D, W, cut, eps, budget, r_poincare, ledger)
        except StageFailure as exc:
            last_failure = exc
            continue
        return res
    if all(x in near_w for x in support):
        # no cut leaves a usable subcomplex, but D already lies over W^eps
        return _degenerate_split(D, "inside", W, eps, delta)
    if last_failure is None:
        raise StageFailure("subquotient", "no admissible cut", ControlLedger(delta_input=delta))
    raise last_failure


def _degenerate_split(D: QuadraticComplex, where: str, W: Region, eps, delta) -> SplitComplexResult:
    ledger = ControlLedger(delta_input=delta)
    for st in STAGES:
        ledger.advance(st, delta, delta)
    space = D.space
    wd = W.distance_to() if W.members else None
    far = [Fraction(int(wd[x]), space._denom) for x in _complex_support(D.C)] if where == "inside" else []
    ledger.eps_required = max(far, default=Fraction(0))
    ledger.notes["degenerate"] = where
    if where == "inside":
        P1, P2 = _zero_pair(space, D.n), _closed_pair(D)
    else:
        P1, P2 = _closed_pair(D), _zero_pair(space, D.n)
    from .quadratic_structures import glue_union
    U = glue_union(P1, P2)
    # the union is D itself up to the direct-sum bookkeeping of an empty piece
    cert = relabel_certificate(D.C, U.C)
    return SplitComplexResult(P1, P2, QuadraticComplex(D.n - 1, zero_complex(space), ()), cert, U, ledger)


def _split_at(D: QuadraticComplex, W: Region, cut: Region, eps, budget, r_poincare, ledger: ControlLedger) -> SplitComplexResult:
    space = D.space
    n = D.n
    delta = D.radius
    stage = "subquotient"
    try:
        # (a) subcomplex over the cut region and the quotient
        sub, quot, inc, proj = max_subcomplex_and_quotient(D.C, cut)
        chi = push(proj.comps, D.psi)
        Qq = QuadraticComplex(n, quot, tuple(chi))
        if sub.is_zero():
            raise ControlFailure("empty subcomplex at this cut")
        ledger.advance(stage, max(sub.radius(), Qq.radius), delta)
        # (b) algebraic boundary and the two pairs over it
        stage = "boundary"
        dQ = algebraic_boundary(Qq)
        P_thick = QuadraticPair(boundary_projection(Qq, dQ), (), dQ)
        P_comp, aux = complementary_pair(D, sub, quot, inc, proj, dQ)
        E = dQ.C
        ledger.advance(stage, max(dQ.radius, P_comp.radius), delta)
        # (c) contraction away from the cut
        stage = "contraction"
        budget_c = Fraction(budget) if budget is not None else r_poincare + delta
        s = contraction_where_possible(E, budget_c)
        R = s.exact_over if s.exact_over is not None else space.whole
        ledger.advance(stage, s.radius(), budget_c)
        # (d) fold to two degrees over the contractible region
        stage = "fold"
        j = _choose_fold_degree(E, R)
        R_fold = R
        for _ in range(8):
            try:
                E_f, c_fold = fold_over_region(E, R_fold, s, j, budget_c)
                break
            except ControlFailure as exc:
                bad = [i for i, p in enumerate(space.points) if p == exc.location]
                if not bad:
                    raise
                R_fold = R_fold - outer_neighborhood(space.region(bad), budget_c)
                s = contraction_where_possible(E, budget_c)
        else:
            raise ControlFailure("fold did not settle")
        nfold = max(1, sum(1 for r in E.degrees if r > j or r < j - 1))
        ledger.advance(stage, max(E_f.radius(), c_fold.measured_radius()),
                      nfold * (E.radius() + budget_c) * 4)
        # (e) split the folded isomorphism where it is one
        stage = "split"
        # inverse certificate from the two-degree truncation, so s_j = 0 is forced
        T2 = GeomChainComplex(space, j - 1, (E_f.module(j - 1), E_f.module(j)), {j: E_f.d(j)})
        s_f = contraction_where_possible(T2, budget_c)
        dj = E_f.differential_at(j)
        e_inv = GeomMorphism(E_f.module(j - 1), E_f.module(j), s_f.at(j - 1))
        defect_locs = set()
        for prod, mod in ((im.mm(dj.matrix, e_inv.matrix), E_f.module(j - 1)), (im.mm(e_inv.matrix, dj.matrix), E_f.module(j))):
            dfc = prod - im.eye(mod.rank)
            for b in np.nonzero(np.any(dfc != 0, axis=0))[0]:
                defect_locs.add(int(mod.locs[b]))
        for r in E_f.degrees:
            if r not in (j, j - 1):
                defect_locs |= {int(x) for x in E_f.locs(r)}
        V = space.region(defect_locs)
        d7 = max(radius(dj), radius(e_inv))
        unit = Fraction(1, space._denom)
        sres = None
        for eps7 in sorted({d7 + unit, 2 * d7 + unit, 3 * d7 + unit}):
            cand = split_isomorphism(dj, e_inv, V, eps7, check_pre=False, strict=False)
            if sres is None or len(cand.pairs) > len(sres.pairs):
                sres = cand
        ledger.notes["split_eps"] = sres.eps
        autos = {j: (sres.H_inv.matrix, sres.H.matrix), j - 1: (sres.Hp.matrix, sres.Hp_inv.matrix)}
        E_c, c_conj = change_basis(E_f, autos)
        ledger.advance(stage, max(E_c.radius(), c_conj.measured_radius()),
                      sres.ledger.entries[-1].declared_bound + E_f.radius())
        # (f) delete the trivial summand and glue
        stage = "delete"
        clean = []
        dm = E_c.d(j)
        for col, row in sres.pairs:
            if abs(int(dm[row, col])) == 1 and np.count_nonzero(dm[:, col] != 0) == 1 and np.count_nonzero(dm[row, :] != 0) == 1:
                clean.append((col, row))
        E_del, c_del = delete_pairs(E_c, j, clean)
        # residual boundary elements sitting in W move to the nearest point of B - W
        outside = [x for x in range(len(space)) if x not in W]
        S_ = space._scaled
        move = {x: min(outside, key=lambda y: (S_[x, y], y)) for x in _complex_support(E_del) if x in W}
        E_fin, c_rel = relocate(E_del, move)
        ledger.notes["relocated"] = len(move)
        c_total = compose_certificates(compose_certificates(compose_certificates(c_fold, c_conj), c_del), c_rel)
        P1 = transport_pair(P_comp, c_total)
        P2 = transport_pair(P_thick, c_total)
        fin_support = _complex_support(E_fin)
        wd = W.distance_to()
        U, psiU, parts = glue_with_maps(P1, P2)
        union = QuadraticComplex(n, U, tuple(psiU))
        # chain map union -> C: (s, b, e) -> i_S s + j b + H G e
        C = D.C
        G = c_total.backward
        comps = {}
        Cd = P_thick.D
        for r in U.degrees:
            if not C.rank(r):
                continue
            blocks = []
            blocks.append(inc.at(r) if sub.rank(r) else im.zeros(C.rank(r), 0))
            blocks.append(aux["j"].get(r, im.zeros(C.rank(r), Cd.rank(r))) if Cd.rank(r) else im.zeros(C.rank(r), 0))
            hg = im.mm(aux["H"].get(r - 1, im.zeros(C.rank(r), E.rank(r - 1))), G.at(r - 1)) if E_fin.rank(r - 1) else im.zeros(C.rank(r), 0)
            blocks.append(hg)
            comps[r] = im.block([blocks])
        Phi = ChainMap(U, C, comps)
        cert_u = certify_chain_map(Phi, eps)
        cert = invert_certificate(cert_u)
        req = max([cert.bound, c_total.bound]
                  + [Fraction(int(wd[x]), space._denom) for x in _complex_support(P2.D) | fin_support])
        ledger.advance(stage,
                      max(E_fin.radius(), P1.radius, P2.radius, cert.measured_radius()), c_total.bound + cert.bound + eps)
        ledger.eps_required = req
        ledger.notes["fold_degree"] = j
        ledger.notes["deleted_pairs"] = len(clean)
        ledger.notes["residual_rank"] = E_fin.total_rank()
        if cert.bound > eps:
            raise ControlFailure(f"equivalence radius {cert.bound} exceeds eps {eps}")
        if req > eps:
            raise ControlFailure(f"supports need eps {req} > {eps}")
    except ControlFailure as exc:
        if isinstance(exc, StageFailure):
            raise
        raise StageFailure(stage, str(exc), ledger, exc) from exc
    return SplitComplexResult(P1, P2, P1.boundary, cert, union, ledger)


def check_split_result(D: QuadraticComplex, W: Region, eps, res: SplitComplexResult) -> list[str]:
    """Independent re-verification of a split: pairs, glue, certificate and supports."""
    from .quadratic_structures import glue_union
    eps = as_rational(eps)
    problems = []
    for name, P in (("D'", res.D_prime), ("D''", res.D_doubleprime)):
        problems += [f"{name}: {p}" for p in check_pair(P).problems]
    U = glue_union(res.D_prime, res.D_doubleprime)
    problems += [f"union: {p}" for p in check_quadratic(U).problems]
    v = verify_equivalence(res.cert)
    problems += [f"cert: {p}" for p in v.problems]
    if res.cert.bound > eps:
        problems.append(f"certificate radius {res.cert.bound} exceeds {eps}")
    near = outer_neighborhood(W, eps).mask() if W.members else np.zeros(len(W.space), dtype=bool)
    outside = W.complement().mask()
    if not _support_ok(res.D_prime.D.modules, outside):
        problems.append("D' is not located over B - W")
    if not _support_ok(res.D_doubleprime.D.modules, near):
        problems.append("D'' is not located over W^eps")
    both = near & outside
    if not _support_ok(res.C.C.modules, both):
        problems.append("C is not located over W^eps ∩ (B - W)")
    return problems


def report_ledger(result) -> ControlLedger:
    return result.ledger
