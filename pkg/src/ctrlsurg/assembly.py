"""Simplicial Poincaré cycles over a control space and their assembly into one controlled complex.

A cycle assigns an n-dimensional quadratic pair to every top simplex and an
(n-1)-dimensional closed quadratic complex to every codimension-one face.
The boundary of a top piece must be the direct sum of its face pieces, in
lexicographic face order, each taken with the incidence sign
orientation(top) * (-1)^i, where i is the position of the omitted vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import intmat as im
from .chain_complexes import (
    ChainHomotopy,
    ChainMap,
    EquivalenceCertificate,
    GeomChainComplex,
    compose_maps,
    direct_sum_complexes,
    identity_map,
    mapping_cone,
    sum_injection,
    zero_complex,
)
from .control_space import ControlSpace, Region
from .geometric_algebra import GeomModule
from .quadratic_structures import (
    QuadraticComplex,
    QuadraticPair,
    add_structures,
    homotopy_push,
    product_bordism,
    push,
    structures_equal,
)

Simplex = tuple


def simplex_name(s: Simplex) -> str:
    return "-".join(str(v) for v in s)


def faces_of(s: Simplex) -> list[tuple[Simplex, int]]:
    """Codimension-one faces in lexicographic order, with the omitted vertex position."""
    out = [(s[:i] + s[i + 1:], i) for i in range(len(s))]
    return sorted(out)


@dataclass(frozen=True, eq=False)
class SimplicialBase:
    space: ControlSpace
    simplices: tuple
    image: Mapping
    orientation: Mapping = field(default_factory=dict)

    def __post_init__(self):
        simp = tuple(sorted({tuple(sorted(int(v) for v in s)) for s in self.simplices}, key=lambda s: (len(s), s)))
        if any(len(s) == 0 for s in simp):
            raise ValueError("empty simplex")
        have = set(simp)
        for s in simp:
            for f, _ in faces_of(s):
                if f and f not in have:
                    raise ValueError(f"face {simplex_name(f)} of {simplex_name(s)} is not listed")
        image = {}
        for s in simp:
            key = s if s in self.image else (s[0] if len(s) == 1 and s[0] in self.image else None)
            if key is None:
                raise ValueError(f"simplex {simplex_name(s)} has no image")
            reg = self.image[key]
            if not isinstance(reg, Region):
                reg = self.space.region(reg)
            image[s] = reg
        for s in simp:
            for f, _ in faces_of(s):
                if f and not image[f].issubset(image[s]):
                    raise ValueError(f"image of face {simplex_name(f)} is not inside the image of {simplex_name(s)}")
        orient = {tuple(sorted(k)): int(v) for k, v in dict(self.orientation).items()}
        if any(v not in (1, -1) for v in orient.values()):
            raise ValueError("orientations must be +1 or -1")
        object.__setattr__(self, "simplices", simp)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "orientation", orient)

    @property
    def dim(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    def tops(self) -> list[Simplex]:
        return [s for s in self.simplices if len(s) - 1 == self.dim]

    def codim_one(self) -> list[Simplex]:
        return [s for s in self.simplices if len(s) - 1 == self.dim - 1]

    def incidence(self, top: Simplex, face: Simplex) -> int:
        for f, i in faces_of(top):
            if f == face:
                return self.orientation.get(top, 1) * im.sign(i)
        raise ValueError(f"{simplex_name(face)} is not a face of {simplex_name(top)}")

    def diameter(self, s: Simplex) -> Fraction:
        return self.space.diameter(self.image[s])

    def max_diameter(self) -> Fraction:
        return max((self.diameter(s) for s in self.simplices), default=Fraction(0))


def images_from_vertices(space: ControlSpace, vertex_point: Mapping[int, int], simplices: Sequence[Simplex]) -> dict:
    """Image of a simplex: its vertex points plus every point metrically between two of them."""
    S = space._scaled
    out = {}
    for s in simplices:
        s = tuple(sorted(s))
        pts = {vertex_point[v] for v in s}
        for a in s:
            for b in s:
                pa, pb = vertex_point[a], vertex_point[b]
                for x in range(len(space)):
                    if S[pa, x] + S[x, pb] == S[pa, pb]:
                        pts.add(x)
        out[s] = space.region(pts)
    return out


@dataclass(frozen=True, eq=False)
class PoincareCycle:
    base: SimplicialBase
    n: int
    pieces: Mapping  # top simplex -> QuadraticPair of dimension n
    faces: Mapping = field(default_factory=dict)  # codim-one simplex -> QuadraticComplex of dimension n-1
    halves: Mapping = field(default_factory=dict)  # top edge -> (left pair, right pair, middle complex)
    refines: Mapping = field(default_factory=dict)  # coarse edge -> (left edge, right edge, new vertex)

    def piece(self, s: Simplex) -> QuadraticPair | None:
        return self.pieces.get(tuple(s))

    def face(self, s: Simplex) -> QuadraticComplex | None:
        return self.faces.get(tuple(s))


def loop_cycle(space: ControlSpace, vertex_points: Sequence[int], E: QuadraticComplex) -> PoincareCycle:
    """Closed loop of k >= 3 edges, every vertex carrying E and every edge the cylinder on E.

    Edges (i, i+1) are oriented -1 and the closing edge (0, k-1) carries the
    cylinder on -E with orientation +1, so each vertex sees E twice with
    opposite signs.
    """
    k = len(vertex_points)
    if k < 3:
        raise ValueError("a loop needs at least three vertices")
    verts = {i: int(p) for i, p in enumerate(vertex_points)}
    edges = [(i, i + 1) for i in range(k - 1)] + [(0, k - 1)]
    simp = [(i,) for i in range(k)] + edges
    base = SimplicialBase(space, tuple(simp), images_from_vertices(space, verts, simp),
                          {**{e: -1 for e in edges[:-1]}, (0, k - 1): 1})
    pieces = {e: product_bordism(E).pair for e in edges[:-1]}
    pieces[(0, k - 1)] = product_bordism(E.negated()).pair
    return PoincareCycle(base, E.n + 1, pieces, {(i,): E for i in range(k)})


def bisectable_loop_cycle(space: ControlSpace, vertex_points: Sequence[int], E: QuadraticComplex) -> PoincareCycle:
    """loop_cycle whose edges also carry halves (two cylinders meeting in E), ready for subdivide."""
    Z0 = loop_cycle(space, vertex_points, E)
    halves, pieces = {}, {}
    for e in Z0.pieces:
        o = Z0.base.orientation.get(e, 1)
        Fa = E if o == -1 else E.negated()
        left, right = product_bordism(Fa).pair, product_bordism(Fa.negated()).pair
        pieces[e] = split_edge_piece(Z0, e, left, right, E)
        halves[e] = (left, right, E)
    return PoincareCycle(Z0.base, Z0.n, pieces, Z0.faces, halves)


def _signed(Q: QuadraticComplex, sign: int) -> QuadraticComplex:
    return Q if sign == 1 else Q.negated()


def _same_shape_complex(A: GeomChainComplex, B: GeomChainComplex) -> str | None:
    for r in sorted(set(A.degrees) | set(B.degrees)):
        if A.rank(r) != B.rank(r):
            return f"rank differs in degree {r} ({A.rank(r)} vs {B.rank(r)})"
        if not im.equal(A.d(r), B.d(r)):
            return f"differential differs in degree {r}"
    return None


def _face_sum(Z: PoincareCycle, top: Simplex) -> QuadraticComplex:
    space = Z.base.space
    parts = []
    for f, _ in faces_of(top):
        F = Z.face(f)
        if F is not None and not F.C.is_zero():
            parts.append(_signed(F, Z.base.incidence(top, f)))
    if not parts:
        return QuadraticComplex(Z.n - 1, zero_complex(space), ())
    C = direct_sum_complexes([p.C for p in parts], tags=[f"{i}." for i in range(len(parts))])
    psi = add_structures(*[push(sum_injection([p.C for p in parts], i, C).comps, p.psi) for i, p in enumerate(parts)])
    return QuadraticComplex(Z.n - 1, C, tuple(psi))


def check_cycle(Z: PoincareCycle) -> list[str]:
    """Face compatibility, dimensions and closure; an empty list means the cycle is valid."""
    base = Z.base
    report = []
    tops = set(base.tops())
    codim = set(base.codim_one())
    for s in Z.pieces:
        if tuple(s) not in tops:
            report.append(f"piece on {simplex_name(s)}, which is not a top simplex")
    for s in Z.faces:
        if tuple(s) not in codim:
            report.append(f"face piece on {simplex_name(s)}, which is not a codimension-one simplex")
    for top in base.tops():
        P = Z.piece(top)
        if P is None:
            report.append(f"top simplex {simplex_name(top)} has no piece")
            continue
        if P.n != Z.n:
            report.append(f"piece on {simplex_name(top)} has dimension {P.n}, expected {Z.n}")
            continue
        from .quadratic_structures import check_pair
        v = check_pair(P)
        if not v:
            report.append(f"piece on {simplex_name(top)} is not a quadratic pair: {v.problems[0]}")
        want = _face_sum(Z, top)
        got = P.boundary
        why = _same_shape_complex(got.C, want.C)
        if why is None and not structures_equal(got.psi, want.psi):
            why = "boundary structure differs"
        if why is not None:
            faces = [simplex_name(f) for f, _ in faces_of(top)]
            report.append(f"({simplex_name(top)}, faces {', '.join(faces)}): boundary does not match the face pieces: {why}")
    for f in base.codim_one():
        F = Z.face(f)
        if F is None or F.C.is_zero():
            continue
        if F.n != Z.n - 1:
            report.append(f"face piece on {simplex_name(f)} has dimension {F.n}, expected {Z.n - 1}")
        from .quadratic_structures import check_quadratic
        v = check_quadratic(F)
        if not v:
            report.append(f"face piece on {simplex_name(f)} is not a quadratic complex: {v.problems[0]}")
        signs = sorted(base.incidence(t, f) for t in base.tops() if f in dict(faces_of(t)))
        if signs != [-1, 1]:
            report.append(f"face {simplex_name(f)} is not closed up: incidence signs {signs}")
    return report


# ---------------------------------------------------------------- glueing a family of pieces

def _rebuild(C: GeomChainComplex, prefix: str, point: int | None) -> GeomChainComplex:
    if C.is_zero() and not C.modules:
        return C
    mods = tuple(GeomModule(C.space, tuple((prefix + lab, loc if point is None else point) for lab, loc in M.basis))
                 for M in C.modules)
    return GeomChainComplex(C.space, C.lo, mods, {r: C.d(r) for r in range(C.lo + 1, C.hi + 1)})


@dataclass(frozen=True, eq=False)
class GluedFamily:
    pair: QuadraticPair  # boundary = free faces
    fragments: dict  # degree -> list of fragment names, one per basis element
    tops: tuple
    interior: tuple
    free: tuple


def glue_family(space: ControlSpace, n: int, tops: Sequence[tuple[str, QuadraticPair, Sequence[tuple[str, int]]]],
                faces: Mapping[str, QuadraticComplex]) -> GluedFamily:
    """Glue top pieces along shared faces.

    Each top comes with its face incidences (name, sign) in the order the
    boundary summands appear. A face met with both signs is glued; a face met
    once stays on the boundary of the result.
    """
    seen: dict[str, list] = {}
    for ti, (name, P, inc) in enumerate(tops):
        for fi, (fname, sg) in enumerate(inc):
            seen.setdefault(fname, []).append((ti, fi, sg))
    interior, free = [], []
    for fname in sorted(seen):
        uses = seen[fname]
        F = faces[fname]
        if F.C.is_zero():
            continue
        if sorted(u[2] for u in uses) == [-1, 1]:
            interior.append(fname)
        elif len(uses) == 1:
            free.append(fname)
        else:
            raise ValueError(f"face {fname} is used with incidence signs {sorted(u[2] for u in uses)}")
    # offsets of each face summand inside each top's boundary complex
    offsets: dict[tuple[int, str], dict[int, int]] = {}
    for ti, (name, P, inc) in enumerate(tops):
        acc: dict[int, int] = {}
        for fname, sg in inc:
            F = faces[fname]
            if F.C.is_zero():
                continue
            offsets[(ti, fname)] = dict(acc)
            for r in F.C.degrees:
                acc[r] = acc.get(r, 0) + F.C.rank(r)
    Ds = [P.D for _, P, _ in tops]
    Y = direct_sum_complexes(Ds) if Ds else zero_complex(space)
    Es = [faces[f].C for f in interior]
    E = direct_sum_complexes(Es) if Es else zero_complex(space)
    Efree = direct_sum_complexes([faces[f].C for f in free]) if free else zero_complex(space)

    def face_to_top(ti: int, fname: str, F: GeomChainComplex) -> dict:
        """ι then f: face complex -> top ambient complex (inside Y)."""
        P = tops[ti][1]
        jt = sum_injection(Ds, ti, Y)
        off = offsets[(ti, fname)]
        out = {}
        for r in F.degrees:
            if not F.rank(r) or not P.D.rank(r):
                continue
            iota = im.zeros(P.boundary.C.rank(r), F.rank(r))
            o = off.get(r, 0)
            iota[o:o + F.rank(r), :] = im.eye(F.rank(r))
            out[r] = im.mm(jt.at(r), im.mm(P.f.at(r), iota))
        return out

    plus, minus = {}, {}
    for ei, fname in enumerate(interior):
        F = faces[fname].C
        pe = sum_injection(Es, ei, E).comps if Es else {}
        for ti, fi, sg in seen[fname]:
            comp = face_to_top(ti, fname, F)
            tgt = plus if sg == 1 else minus
            for r, m in comp.items():
                # precompose with the projection E -> this face summand
                proj = pe[r].T if r in pe else im.zeros(F.rank(r), E.rank(r))
                tgt[r] = tgt.get(r, im.zeros(Y.rank(r), E.rank(r))) + im.mm(m, proj)
    h = ChainMap(E, Y, {r: plus.get(r, im.zeros(Y.rank(r), E.rank(r))) - minus.get(r, im.zeros(Y.rank(r), E.rank(r)))
                        for r in E.degrees if Y.rank(r) and E.rank(r)})
    U = mapping_cone(h) if not E.is_zero() else Y
    jY, k = {}, {}
    for r in U.degrees:
        m = im.zeros(U.rank(r), Y.rank(r))
        m[:Y.rank(r), :] = im.eye(Y.rank(r))
        jY[r] = m
    for r in E.degrees:
        m = im.zeros(U.rank(r + 1), E.rank(r))
        m[Y.rank(r + 1):, :] = im.eye(E.rank(r))
        k[r] = m
    inY = add_structures(*[push(sum_injection(Ds, ti, Y).comps, P.delta_psi) for ti, (_, P, _) in enumerate(tops)]) if tops else []
    psiE = add_structures(*[push(sum_injection(Es, ei, E).comps, faces[f].psi) for ei, f in enumerate(interior)]) if Es else []
    g = {r: im.mm(jY[r], plus[r]) for r in plus if r in jY}
    gp = {r: im.mm(jY[r], minus[r]) for r in minus if r in jY}
    K = homotopy_push(g, gp, k, psiE)
    psiU = add_structures(push(jY, inY), K, coeffs=[1, -1])
    # free boundary: sign-adjusted face structures mapped into U
    fcomps = {}
    free_parts = []
    for fi_, fname in enumerate(free):
        ti, fi, sg = seen[fname][0]
        F = faces[fname]
        free_parts.append(_signed(F, sg))
        comp = face_to_top(ti, fname, F.C)
        inj = sum_injection([faces[f].C for f in free], fi_, Efree)
        for r, m in comp.items():
            fcomps[r] = fcomps.get(r, im.zeros(U.rank(r), Efree.rank(r))) + im.mm(jY[r], im.mm(m, inj.at(r).T))
    if free_parts:
        Cs = [p.C for p in free_parts]
        bpsi = add_structures(*[push(sum_injection(Cs, i, Efree).comps, p.psi) for i, p in enumerate(free_parts)])
    else:
        bpsi = []
    boundary = QuadraticComplex(n - 1, Efree, tuple(bpsi))
    pair = QuadraticPair(ChainMap(Efree, U, {r: m for r, m in fcomps.items() if U.rank(r)}), tuple(psiU), boundary)
    frags = {}
    for r in U.degrees:
        names = []
        for (name, P, _) in tops:
            names += [name] * P.D.rank(r)
        for f in interior:
            names += [f] * faces[f].C.rank(r - 1)
        frags[r] = names
    return GluedFamily(pair, frags, tuple(t[0] for t in tops), tuple(interior), tuple(free))


# ---------------------------------------------------------------- assembly

def locate_assembly_basis(Z: PoincareCycle) -> dict:
    """Canonical point (least index) of each simplex image; every basis element of that fragment sits there."""
    out = {}
    for s in Z.base.simplices:
        reg = Z.base.image[s]
        if not reg.members:
            raise ValueError(f"simplex {simplex_name(s)} has an empty image")
        out[s] = min(reg.members)
    return out


def _family_inputs(Z: PoincareCycle, relocate: bool = True):
    base = Z.base
    where = locate_assembly_basis(Z)
    faces = {}
    for f in base.codim_one():
        F = Z.face(f)
        if F is None or F.C.is_zero():
            continue
        C = _rebuild(F.C, simplex_name(f) + "/", where[f] if relocate else None)
        faces[simplex_name(f)] = QuadraticComplex(F.n, C, F.psi)
    tops = []
    for t in base.tops():
        P = Z.piece(t)
        pre = simplex_name(t) + "/"
        D = _rebuild(P.D, pre, where[t] if relocate else None)
        bnd = _face_sum_relocated(Z, t, faces)
        f = ChainMap(bnd.C, D, P.f.comps)
        tops.append((simplex_name(t), QuadraticPair(f, P.delta_psi, bnd),
                     [(simplex_name(fc), base.incidence(t, fc)) for fc, _ in faces_of(t)
                      if simplex_name(fc) in faces]))
    return tops, faces


def _face_sum_relocated(Z: PoincareCycle, top: Simplex, faces: Mapping[str, QuadraticComplex]) -> QuadraticComplex:
    parts = []
    for f, _ in faces_of(top):
        F = faces.get(simplex_name(f))
        if F is not None:
            parts.append(_signed(F, Z.base.incidence(top, f)))
    space = Z.base.space
    if not parts:
        return QuadraticComplex(Z.n - 1, zero_complex(space), ())
    C = direct_sum_complexes([p.C for p in parts])
    psi = add_structures(*[push(sum_injection([p.C for p in parts], i, C).comps, p.psi) for i, p in enumerate(parts)])
    return QuadraticComplex(Z.n - 1, C, tuple(psi))


def assemble_with_fragments(Z: PoincareCycle) -> tuple[QuadraticComplex, dict]:
    problems = check_cycle(Z)
    if problems:
        raise ValueError(f"invalid cycle: {problems[0]}")
    tops, faces = _family_inputs(Z)
    fam = glue_family(Z.base.space, Z.n, tops, faces)
    if not fam.pair.boundary.C.is_zero():
        raise AssertionError("closed cycle left a free boundary")
    return QuadraticComplex(Z.n, fam.pair.D, fam.pair.delta_psi), fam.fragments


def assemble(Z: PoincareCycle) -> QuadraticComplex:
    """Glue every piece of a valid cycle; basis elements sit at the least point of their simplex image."""
    return assemble_with_fragments(Z)[0]


def fragment_locality(Z: PoincareCycle, Q: QuadraticComplex, fragments: Mapping[int, list]) -> list[str]:
    """Nonzero entries may only join a fragment to itself or to a face-related fragment."""
    related = set()
    for s in Z.base.simplices:
        a = simplex_name(s)
        related.add((a, a))
        for t in Z.base.simplices:
            if set(s) <= set(t) or set(t) <= set(s):
                related.add((a, simplex_name(t)))
    bad = []

    def scan(tag, rows, cols, m):
        for i, j in zip(*np.nonzero(m != 0)):
            if (rows[i], cols[j]) not in related:
                bad.append(f"{tag}: entry joins fragments {rows[i]} and {cols[j]}")
                return

    C = Q.C
    for r in C.degrees:
        if r - 1 in fragments and C.rank(r) and C.rank(r - 1):
            scan(f"d_{r}", fragments[r - 1], fragments[r], C.d(r))
    for s, e in enumerate(Q.psi):
        for (q, p), m in e.items():
            scan(f"psi_{s}({q},{p})", fragments[q], fragments[p], m)
    return bad


# ---------------------------------------------------------------- subdivision

def glue_halves(left: QuadraticPair, right: QuadraticPair, middle: QuadraticComplex,
                left_inc: Sequence[tuple[str, int]], right_inc: Sequence[tuple[str, int]],
                end_faces: Mapping[str, QuadraticComplex]) -> GluedFamily:
    """Glue two half pieces along the middle complex, keeping the end faces as boundary."""
    faces = dict(end_faces)
    if middle is not None:
        faces["mid"] = middle
    space = left.D.space
    return glue_family(space, left.n, [("L", left, left_inc), ("R", right, right_inc)], faces)


def _half_incidences(Z: PoincareCycle, edge: Simplex, middle: QuadraticComplex | None):
    """Incidences of the two halves (a, m) and (b, m); the new vertex m sorts after a and b."""
    a, b = edge
    o = Z.base.orientation.get(edge, 1)
    ends = {}
    for f in ((a,), (b,)):
        F = Z.face(f)
        if F is not None and not F.C.is_zero():
            ends[simplex_name(f)] = F
    has_mid = middle is not None and not middle.C.is_zero()
    left = [(simplex_name((a,)), -o)] if simplex_name((a,)) in ends else []
    right = [(simplex_name((b,)), o)] if simplex_name((b,)) in ends else []
    if has_mid:
        left.append(("mid", o))
        right.append(("mid", -o))
    return o, left, right, ends


def split_edge_piece(Z: PoincareCycle, edge: Simplex, left: QuadraticPair, right: QuadraticPair,
                     middle: QuadraticComplex) -> QuadraticPair:
    """The piece an edge must carry so the given halves are valid subdivision data for it."""
    _, li, ri, ends = _half_incidences(Z, edge, middle)
    return glue_halves(left, right, middle, li, ri, ends).pair


def _check_halves(Z: PoincareCycle, edge: Simplex, left, right, mid):
    P = Z.piece(edge)
    G = split_edge_piece(Z, edge, left, right, mid)
    why = _same_shape_complex(G.D, P.D)
    if why is None and not structures_equal(G.delta_psi, P.delta_psi):
        why = "glued structure differs from the piece"
    if why is None:
        why = _same_shape_complex(G.boundary.C, P.boundary.C)
    if why is None:
        for r in P.boundary.C.degrees:
            if not im.equal(G.f.at(r), P.f.at(r)):
                why = f"glued boundary map differs in degree {r}"
                break
    if why is not None:
        raise ValueError(f"halves of edge {simplex_name(edge)} do not glue to its piece: {why}")


def subdivide(Z: PoincareCycle) -> PoincareCycle:
    """Bisect every edge of a one-dimensional cycle using the caller's half pieces.

    The new vertex of an edge is the point of its image closest to the metric
    midpoint of the end points (ties by index); half images are the points of
    the edge image metrically between an end and the new vertex.
    """
    base = Z.base
    if base.dim != 1:
        raise ValueError("subdivision is implemented for one-dimensional bases")
    space = base.space
    S = space._scaled
    nxt = max(v for s in base.simplices for v in s) + 1
    simplices = [s for s in base.simplices if len(s) == 1]
    image = {s: base.image[s] for s in simplices}
    orient, pieces, faces, refines = {}, {}, dict(Z.faces), {}
    for edge in base.tops():
        P = Z.piece(edge)
        if edge in Z.halves:
            left, right, mid = Z.halves[edge]
        elif P is not None and P.D.is_zero() and P.boundary.C.is_zero():
            left = right = P
            mid = None
        else:
            raise ValueError(f"edge {simplex_name(edge)} has no subdivision data")
        a, b = edge
        pa, pb = min(base.image[(a,)].members), min(base.image[(b,)].members)
        reg = base.image[edge]
        m_pt = min(reg.members, key=lambda x: (abs(int(S[pa, x]) - int(S[x, pb])), x))
        m = nxt
        nxt += 1
        o, _, _, _ = _half_incidences(Z, edge, mid)
        ledge, redge = (a, m), (b, m)
        simplices += [(m,), ledge, redge]
        image[(m,)] = space.region([m_pt])
        image[ledge] = space.region(x for x in reg.members if S[pa, x] + S[x, m_pt] == S[pa, m_pt])
        image[redge] = space.region(x for x in reg.members if S[pb, x] + S[x, m_pt] == S[pb, m_pt])
        orient[ledge], orient[redge] = o, -o
        if mid is not None:
            _check_halves(Z, edge, left, right, mid)
            faces[(m,)] = mid
        pieces[ledge], pieces[redge] = left, right
        refines[edge] = (ledge, redge, (m,))
    nb = SimplicialBase(space, tuple(simplices), image, orient)
    return PoincareCycle(nb, Z.n, pieces, faces, refines=refines)


def subdivision_certificate(Z: PoincareCycle, Zs: PoincareCycle) -> EquivalenceCertificate:
    """Basis-permutation certificate assemble(Z) -> assemble(Zs).

    A coarse edge piece has basis [left half, right half, middle] in each
    degree; the halves and the middle become separate fragments after
    subdivision. The radius is the largest relocation distance.
    """
    A, fa = assemble_with_fragments(Z)
    B, fb = assemble_with_fragments(Zs)
    refines = {simplex_name(e): tuple(simplex_name(x) for x in v) for e, v in Zs.refines.items()}
    perm = {}
    for r in sorted(set(A.C.degrees) | set(B.C.degrees)):
        if A.C.rank(r) != B.C.rank(r):
            raise ValueError(f"assemblies differ in rank in degree {r}")
        if not A.C.rank(r):
            continue
        pos_b, count = {}, {}
        for j, name in enumerate(fb[r]):
            pos_b[(name, count.get(name, 0))] = j
            count[name] = count.get(name, 0) + 1
        P = im.zeros(B.C.rank(r), A.C.rank(r))
        count = {}
        for i, name in enumerate(fa[r]):
            local = count.get(name, 0)
            count[name] = local + 1
            if name in refines:
                L, R, M = refines[name]
                nl, nr = count_rank(Zs, L, r), count_rank(Zs, R, r)
                key = (L, local) if local < nl else (R, local - nl) if local < nl + nr else (M, local - nl - nr)
            else:
                key = (name, local)
            if key not in pos_b:
                raise ValueError(f"no counterpart for basis element {i} of degree {r}")
            P[pos_b[key], i] = 1
        perm[r] = P
    f = ChainMap(A.C, B.C, perm)
    g = ChainMap(B.C, A.C, {r: m.T.copy() for r, m in perm.items()})
    cert = EquivalenceCertificate(f, g, ChainHomotopy(compose_maps(f, g), identity_map(B.C), {}),
                                  ChainHomotopy(compose_maps(g, f), identity_map(A.C), {}), Fraction(0))
    return EquivalenceCertificate(f, g, cert.homotopy_fg, cert.homotopy_gf, cert.measured_radius())


def count_rank(Z: PoincareCycle, name: str, r: int) -> int:
    for t, P in Z.pieces.items():
        if simplex_name(t) == name:
            return P.D.rank(r)
    return 0
