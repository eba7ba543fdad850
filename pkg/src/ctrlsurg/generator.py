"""Deterministic random instances: Poincaré complexes, morphisms, isomorphism problems."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping


from . import intmat as im
from .chain_complexes import GeomChainComplex, make_complex
from .control_space import ControlSpace, Region, as_rational
from .geometric_algebra import GeomModule, GeomMorphism, matrix_radius
from .quadratic_structures import (
    E8_GRAM,
    QuadraticComplex,
    add_structures,
    elem_radius,
    form_from_gram,
    push,
    w_boundary,
)

FORM_MATRICES = {
    "H": ((0, 1), (0, 0)),
    "H1": ((1, 1), (0, 1)),  # nonzero Arf invariant in dimensions 2 mod 4
    "E8": form_from_gram(E8_GRAM).matrix,
}


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int
    n: int
    ranks: Mapping[int, int] = field(default_factory=dict)
    forms: tuple = ()
    target_radius: Fraction = Fraction(0)
    steps: int = -1  # elementary basis changes; -1 means 3 x total rank
    noise: int = -1  # structure perturbations by boundaries; -1 means total rank
    form_points: tuple = ()  # optional point index per form; random when empty

    def __post_init__(self):
        object.__setattr__(self, "ranks", {int(k): int(v) for k, v in dict(self.ranks).items()})
        object.__setattr__(self, "forms", tuple(self.forms))
        object.__setattr__(self, "target_radius", as_rational(self.target_radius))
        object.__setattr__(self, "form_points", tuple(int(x) for x in self.form_points))
        if self.form_points and len(self.form_points) != len(self.forms):
            raise ValueError("form_points must give one point per form")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if any(v < 0 for v in self.ranks.values()):
            raise ValueError("ranks must be nonnegative")
        for f in self.forms:
            if f not in FORM_MATRICES:
                raise ValueError(f"unknown form {f!r}")


def _trivial_counts(spec: GeneratorSpec) -> dict[int, int]:
    """Number of trivial pairs (r -> r-1) so that the ranks come out as requested."""
    k = spec.n // 2
    form_rank = sum(len(FORM_MATRICES[f]) for f in spec.forms)
    if form_rank and spec.n % 2:
        raise ValueError("middle-dimensional forms need even n")
    ranks = dict(spec.ranks)
    if form_rank:
        ranks[k] = ranks.get(k, 0)
        if ranks[k] < form_rank:
            raise ValueError(f"rank in degree {k} is smaller than the forms need ({form_rank})")
    if not ranks:
        return {}
    lo, hi = min(ranks), max(ranks)
    t = {}
    carry = 0  # pairs whose bottom is in degree r
    for r in range(lo, hi + 1):
        have = ranks.get(r, 0) - (form_rank if r == k else 0) - carry
        if have < 0:
            raise ValueError(f"infeasible ranks at degree {r}")
        t[r + 1] = have
        carry = have
    if carry:
        raise ValueError("infeasible ranks: Euler characteristic does not match the forms")
    return {r: c for r, c in t.items() if c}


def generate_poincare(spec: GeneratorSpec, space: ControlSpace) -> QuadraticComplex:
    rng = random.Random(int(spec.seed))
    n, k = spec.n, spec.n // 2
    trivial = _trivial_counts(spec)
    npts = len(space)
    lim = space.scaled(spec.target_radius)
    S = space._scaled
    basis: dict[int, list] = {}
    counter = [0]

    def new(r, loc):
        counter[0] += 1
        basis.setdefault(r, []).append((f"g{counter[0]}", loc))
        return len(basis[r]) - 1

    entries_d = []  # (r, row, col, val)
    psi0 = []
    for fi, f in enumerate(spec.forms):
        mat = FORM_MATRICES[f]
        loc = spec.form_points[fi] if spec.form_points else rng.randrange(npts)
        if not 0 <= loc < npts:
            raise ValueError(f"form point {loc} outside the control space")
        idx = [new(k, loc) for _ in mat]
        for i, row in enumerate(mat):
            for j, v in enumerate(row):
                if v:
                    psi0.append((idx[i], idx[j], v))
    for r in sorted(trivial):
        for _ in range(trivial[r]):
            x = rng.randrange(npts)
            near = [y for y in range(npts) if S[x, y] <= lim]
            y = rng.choice(near)
            top = new(r, x)
            bot = new(r - 1, y)
            entries_d.append((r, bot, top, rng.choice((1, -1))))
    if not basis:
        return QuadraticComplex(n, GeomChainComplex(space, 0, (), {}), ())
    lo, hi = min(basis), max(basis)
    mods = {r: GeomModule(space, tuple(basis.get(r, []))) for r in range(lo, hi + 1)}
    diffs = {r: im.zeros(mods[r - 1].rank, mods[r].rank) for r in range(lo + 1, hi + 1)}
    for r, i, j, v in entries_d:
        diffs[r][i, j] = v
    C = make_complex(space, mods, diffs)
    psi = []
    if psi0:
        m = im.zeros(C.rank(k), C.rank(k))
        for i, j, v in psi0:
            m[i, j] = v
        psi = [{(k, k): m}]
    target = spec.target_radius
    steps = spec.steps if spec.steps >= 0 else 3 * C.total_rank()
    noise = spec.noise if spec.noise >= 0 else C.total_rank()
    # random elementary automorphisms e_a -> e_a + c e_b among nearby basis
    for _ in range(steps * 4):
        if steps <= 0:
            break
        degs = [r for r in C.degrees if C.rank(r) >= 2]
        if not degs:
            break
        r = rng.choice(degs)
        a, b = rng.sample(range(C.rank(r)), 2)
        la, lb = C.locs(r)[a], C.locs(r)[b]
        if S[la, lb] > lim:
            continue
        c = rng.choice((1, -1, 2, -2))
        A = im.eye(C.rank(r))
        A[a, b] = c
        Ai = im.eye(C.rank(r))
        Ai[a, b] = -c
        newd = dict(C.diffs)
        if r in newd:
            newd[r] = im.mm(newd[r], Ai)
        if r + 1 in newd:
            newd[r + 1] = im.mm(A, newd[r + 1])
        C2 = GeomChainComplex(space, C.lo, C.modules, newd)
        f = {q: (A if q == r else im.eye(C.rank(q))) for q in C.degrees}
        psi2 = push(f, psi)
        if C2.radius() > target or any(elem_radius(C2, e) > target for e in psi2):
            continue
        C, psi = C2, psi2
        steps -= 1
    # perturb the structure by W-boundaries of small elements
    for _ in range(noise * 4):
        if noise <= 0:
            break
        s = rng.randrange(3)
        m = n + 1 - s
        qs = [q for q in C.degrees if C.rank(q) and C.rank(m - q)]
        if not qs:
            break
        q = rng.choice(qs)
        p = m - q
        i, j = rng.randrange(C.rank(q)), rng.randrange(C.rank(p))
        if S[C.locs(q)[i], C.locs(p)[j]] > lim:
            continue
        e = im.zeros(C.rank(q), C.rank(p))
        e[i, j] = rng.choice((1, -1))
        xi = [{} for _ in range(s)] + [{(q, p): e}]
        psi2 = add_structures(psi, w_boundary(C, xi))
        if any(elem_radius(C, x) > target for x in psi2):
            continue
        psi = psi2
        noise -= 1
    Q = QuadraticComplex(n, C, tuple(psi))
    if Q.radius > target:
        raise AssertionError("generator exceeded its target radius")
    return Q


def random_morphism(rng: random.Random, source: GeomModule, target: GeomModule, max_radius, density=0.5, lo=-3, hi=3) -> GeomMorphism:
    """Random integer matrix whose entries only join basis elements within max_radius."""
    space = source.space
    lim = space.scaled(max_radius)
    m = im.zeros(target.rank, source.rank)
    for i in range(target.rank):
        for j in range(source.rank):
            if space._scaled[target.locs[i], source.locs[j]] <= lim and rng.random() < density:
                m[i, j] = rng.randint(lo, hi)
    return GeomMorphism(source, target, m)


def random_module(rng: random.Random, space: ControlSpace, rank: int, prefix="b") -> GeomModule:
    return GeomModule(space, tuple((f"{prefix}{i}", rng.randrange(len(space))) for i in range(rank)))


def random_isomorphism_instance(seed: int, space: ControlSpace, V: Region, delta, per_point=(1, 2), moves=None):
    """(d, e): d is a delta isomorphism over B - V with inverse certificate e.

    d starts as the identity on a module with 1-2 basis elements per point,
    is multiplied by bounded transvections (half the radius each side), and
    is then scrambled in rows/columns located in V.
    """
    rng = random.Random(seed)
    delta = as_rational(delta)
    basis = []
    for x in range(len(space)):
        for t in range(rng.randint(*per_point)):
            basis.append((f"a{x}_{t}", x))
    A = GeomModule(space, tuple(basis))
    nb = A.rank
    half = space.scaled(delta / 2)
    S = space._scaled

    def transvections(count):
        U, Ui = im.eye(nb), im.eye(nb)
        for _ in range(count):
            a, b = rng.sample(range(nb), 2)
            if S[A.locs[a], A.locs[b]] > half:
                continue
            c = rng.choice((1, -1))
            E = im.eye(nb)
            E[a, b] = c
            Ei = im.eye(nb)
            Ei[a, b] = -c
            U2, Ui2 = im.mm(E, U), im.mm(Ui, Ei)
            if matrix_radius(space, A.locs, A.locs, U2) > delta / 2 or matrix_radius(space, A.locs, A.locs, Ui2) > delta / 2:
                continue
            U, Ui = U2, Ui2
        return U, Ui

    moves = moves if moves is not None else 2 * nb
    U1, U1i = transvections(moves)
    U2, U2i = transvections(moves)
    d = im.mm(U1, U2)
    e = im.mm(U2i, U1i)
    # scramble entries touching V
    vmask = V.mask()
    lim = space.scaled(delta)
    for i in range(nb):
        for j in range(nb):
            if (vmask[A.locs[i]] or vmask[A.locs[j]]) and S[A.locs[i], A.locs[j]] <= lim and rng.random() < 0.3:
                d[i, j] = rng.randint(-2, 2)
    return GeomMorphism(A, A, d), GeomMorphism(A, A, e)


def corpus_spec(seed: int, target_radius, max_rank: int = 6, dims=(0, 1, 2, 3, 4)) -> GeneratorSpec:
    """Random feasible spec: forms in the middle plus trivial pairs on either side (three degrees)."""
    rng = random.Random(seed)
    n = rng.choice(dims)
    k = n // 2
    forms = ("H",) * rng.randint(0, 2) if n % 2 == 0 else ()
    fr = 2 * len(forms)
    room = max_rank - fr
    a = rng.randint(0, min(2, room))
    b = rng.randint(0, min(2, room - a))
    return GeneratorSpec(seed, n, {k - 1: a, k: fr + a + b, k + 1: b}, forms, target_radius)
