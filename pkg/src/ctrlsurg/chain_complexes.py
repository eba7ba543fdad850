"""Chain complexes of located modules, chain maps, homotopies and equivalence certificates."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import intmat as im
from .control_space import ControlSpace, Region, inner_neighborhood
from .geometric_algebra import (
    GeomModule,
    GeomMorphism,
    direct_sum_modules,
    matrix_radius,
    zero_module,
)


class ControlFailure(Exception):
    """A search or pipeline stage did not succeed; carries where it stalled."""

    def __init__(self, message: str, degree: int | None = None, location=None, detail=None):
        super().__init__(message)
        self.degree = degree
        self.location = location
        self.detail = detail


@dataclass(frozen=True)
class Verdict:
    ok: bool
    problems: tuple = ()

    def __bool__(self):
        return self.ok

    @staticmethod
    def of(problems) -> "Verdict":
        return Verdict(not problems, tuple(problems))


@dataclass(frozen=True, eq=False)
class GeomChainComplex:
    """Modules in degrees lo..lo+len(modules)-1; diffs[r] is a matrix C_r -> C_{r-1}."""

    space: ControlSpace
    lo: int
    modules: tuple
    diffs: Mapping[int, np.ndarray]

    def __post_init__(self):
        mods = tuple(self.modules)
        object.__setattr__(self, "modules", mods)
        diffs = {}
        for r in range(self.lo + 1, self.lo + len(mods)):
            m = self.diffs.get(r)
            shape = (self.rank(r - 1), self.rank(r))
            if m is None:
                m = im.zeros(*shape)
            elif m.shape != shape:
                raise ValueError(f"differential in degree {r} has shape {m.shape}, expected {shape}")
            diffs[r] = m
        extra = set(self.diffs) - set(diffs)
        for r in extra:
            if not im.is_zero(self.diffs[r]):
                raise ValueError(f"differential given outside the degree range at {r}")
        object.__setattr__(self, "diffs", diffs)

    @property
    def hi(self) -> int:
        return self.lo + len(self.modules) - 1

    @property
    def degrees(self) -> range:
        return range(self.lo, self.lo + len(self.modules))

    def module(self, r: int) -> GeomModule:
        if self.lo <= r <= self.hi:
            return self.modules[r - self.lo]
        return zero_module(self.space)

    def rank(self, r: int) -> int:
        if self.lo <= r <= self.hi:
            return self.modules[r - self.lo].rank
        return 0

    def d(self, r: int) -> np.ndarray:
        m = self.diffs.get(r)
        if m is None:
            return im.zeros(self.rank(r - 1), self.rank(r))
        return m

    def differential_at(self, r: int) -> GeomMorphism:
        return GeomMorphism(self.module(r), self.module(r - 1), self.d(r))

    module_at = module

    def locs(self, r: int) -> np.ndarray:
        return self.module(r).locs

    def radius(self) -> Fraction:
        return max((matrix_radius(self.space, self.locs(r - 1), self.locs(r), m) for r, m in self.diffs.items()),
                   default=Fraction(0))

    def nonzero_degrees(self) -> list[int]:
        return [r for r in self.degrees if self.rank(r)]

    def total_rank(self) -> int:
        return sum(m.rank for m in self.modules)

    def support(self) -> Region:
        return Region(self.space, frozenset(int(x) for m in self.modules for x in m.locs))

    def is_zero(self) -> bool:
        return self.total_rank() == 0

    def trimmed(self) -> "GeomChainComplex":
        """Drop zero modules at both ends of the degree range."""
        nz = self.nonzero_degrees()
        if not nz:
            return GeomChainComplex(self.space, 0, (), {})
        lo, hi = nz[0], nz[-1]
        return GeomChainComplex(self.space, lo, tuple(self.module(r) for r in range(lo, hi + 1)),
                                {r: self.d(r) for r in range(lo + 1, hi + 1)})

    def extended(self, lo: int, hi: int) -> "GeomChainComplex":
        lo, hi = min(lo, self.lo if self.modules else lo), max(hi, self.hi if self.modules else hi)
        return GeomChainComplex(self.space, lo, tuple(self.module(r) for r in range(lo, hi + 1)),
                                {r: self.d(r) for r in range(lo + 1, hi + 1)})


def make_complex(space: ControlSpace, modules: Mapping[int, GeomModule], diffs: Mapping[int, np.ndarray]) -> GeomChainComplex:
    """Build from sparse degree maps; the range spans every degree mentioned."""
    degs = [r for r, m in modules.items() if m.rank] + [r for r, m in diffs.items() if not im.is_zero(m)]
    if not degs:
        return GeomChainComplex(space, 0, (), {})
    lo, hi = min(degs), max(degs)
    mods = tuple(modules.get(r, zero_module(space)) for r in range(lo, hi + 1))
    return GeomChainComplex(space, lo, mods, {r: diffs[r] for r in range(lo + 1, hi + 1) if r in diffs})


def zero_complex(space: ControlSpace) -> GeomChainComplex:
    return GeomChainComplex(space, 0, (), {})


def check_complex(C: GeomChainComplex) -> Verdict:
    problems = []
    for r in range(C.lo + 2, C.hi + 1):
        if not im.is_zero(C.d(r - 1).dot(C.d(r))):
            problems.append(f"d∘d != 0 in degree {r}")
    return Verdict.of(problems)


def same_modules(A: GeomChainComplex, B: GeomChainComplex) -> bool:
    degs = set(A.nonzero_degrees()) | set(B.nonzero_degrees())
    return all(A.module(r) == B.module(r) for r in degs)


def _radius_graded(src: GeomChainComplex, tgt: GeomChainComplex, comps: Mapping[int, np.ndarray], deg: int) -> Fraction:
    return max((matrix_radius(src.space, tgt.locs(r + deg), src.locs(r), m) for r, m in comps.items()),
               default=Fraction(0))


@dataclass(frozen=True, eq=False)
class ChainMap:
    source: GeomChainComplex
    target: GeomChainComplex
    comps: Mapping[int, np.ndarray]

    def __post_init__(self):
        clean = {}
        for r, m in self.comps.items():
            shape = (self.target.rank(r), self.source.rank(r))
            if m.shape != shape:
                raise ValueError(f"chain map component {r} has shape {m.shape}, expected {shape}")
            if shape[0] and shape[1] and not im.is_zero(m):
                clean[r] = m
        object.__setattr__(self, "comps", clean)

    def at(self, r: int) -> np.ndarray:
        m = self.comps.get(r)
        return m if m is not None else im.zeros(self.target.rank(r), self.source.rank(r))

    def component_at(self, r: int) -> GeomMorphism:
        return GeomMorphism(self.source.module(r), self.target.module(r), self.at(r))

    def radius(self) -> Fraction:
        return _radius_graded(self.source, self.target, self.comps, 0)

    def degrees(self) -> list[int]:
        return sorted(set(self.source.degrees) | set(self.target.degrees))


@dataclass(frozen=True, eq=False)
class ChainHomotopy:
    """Degree +1 maps s with d s + s d = f - g (exactly, or only over `exact_over`)."""

    f: ChainMap
    g: ChainMap
    comps: Mapping[int, np.ndarray]
    exact_over: Region | None = None

    def __post_init__(self):
        clean = {}
        for r, m in self.comps.items():
            shape = (self.target.rank(r + 1), self.source.rank(r))
            if m.shape != shape:
                raise ValueError(f"homotopy component {r} has shape {m.shape}, expected {shape}")
            if shape[0] and shape[1] and not im.is_zero(m):
                clean[r] = m
        object.__setattr__(self, "comps", clean)

    @property
    def source(self) -> GeomChainComplex:
        return self.f.source

    @property
    def target(self) -> GeomChainComplex:
        return self.f.target

    def at(self, r: int) -> np.ndarray:
        m = self.comps.get(r)
        return m if m is not None else im.zeros(self.target.rank(r + 1), self.source.rank(r))

    def component_at(self, r: int) -> GeomMorphism:
        return GeomMorphism(self.source.module(r), self.target.module(r + 1), self.at(r))

    def radius(self) -> Fraction:
        return _radius_graded(self.source, self.target, self.comps, 1)


@dataclass(frozen=True, eq=False)
class EquivalenceCertificate:
    forward: ChainMap
    backward: ChainMap
    homotopy_fg: ChainHomotopy  # on target: forward∘backward ≃ 1
    homotopy_gf: ChainHomotopy  # on source: backward∘forward ≃ 1
    bound: Fraction

    @property
    def source(self) -> GeomChainComplex:
        return self.forward.source

    @property
    def target(self) -> GeomChainComplex:
        return self.forward.target

    def measured_radius(self) -> Fraction:
        return max(self.forward.radius(), self.backward.radius(), self.homotopy_fg.radius(), self.homotopy_gf.radius())


# ---------------------------------------------------------------- verification
# These checks use plain numpy object products rather than the construction helpers.

def _dot(a, b):
    if a.shape[1] == 0 or a.shape[0] == 0 or b.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=object)
    return a.dot(b)


def check_chain_map(f: ChainMap) -> Verdict:
    S, T = f.source, f.target
    problems = []
    for r in sorted(set(S.degrees) | set(T.degrees) | {S.hi + 1, T.hi + 1}):
        lhs = _dot(T.d(r), f.at(r))
        rhs = _dot(f.at(r - 1), S.d(r))
        if lhs.shape != rhs.shape or not im.is_zero(lhs - rhs):
            problems.append(f"chain map does not commute with d in degree {r}")
    return Verdict.of(problems)


def check_homotopy(h: ChainHomotopy) -> Verdict:
    S, T = h.source, h.target
    problems = []
    if h.g.source is not S and not same_modules(h.g.source, S):
        problems.append("homotopy endpoints have different sources")
    if h.exact_over is not None:
        mask = h.exact_over.mask()
    for r in sorted(set(S.degrees) | set(T.degrees)):
        lhs = _dot(T.d(r + 1), h.at(r)) + _dot(h.at(r - 1), S.d(r))
        defect = lhs - (h.f.at(r) - h.g.at(r))
        if h.exact_over is None:
            if not im.is_zero(defect):
                problems.append(f"d s + s d != f - g in degree {r}")
        else:
            tl, sl = T.locs(r), S.locs(r)
            for i, j in zip(*np.nonzero(defect != 0)):
                if mask[tl[i]] and mask[sl[j]]:
                    problems.append(f"d s + s d != f - g at degree {r} entry ({i},{j}) inside the exact region")
                    break
    return Verdict.of(problems)


def verify_equivalence(cert: EquivalenceCertificate) -> Verdict:
    problems = []
    f, g = cert.forward, cert.backward
    C, D = f.source, f.target
    if not (same_modules(g.source, D) and same_modules(g.target, C)):
        problems.append("backward map does not go from target to source")
    for name, m in (("forward", f), ("backward", g)):
        v = check_chain_map(m)
        problems += [f"{name}: {p}" for p in v.problems]
    for name, h, comp, base in (("homotopy_fg", cert.homotopy_fg, (f, g), D), ("homotopy_gf", cert.homotopy_gf, (g, f), C)):
        outer, inner = comp
        if h.exact_over is not None:
            problems.append(f"{name}: partial homotopy in a certificate")
        v = check_homotopy(h)
        problems += [f"{name}: {p}" for p in v.problems]
        for r in base.degrees:
            expect = _dot(outer.at(r), inner.at(r))
            if not im.equal(h.f.at(r), expect):
                problems.append(f"{name}: first endpoint is not the composite in degree {r}")
                break
            if not im.equal(h.g.at(r), im.eye(base.rank(r))):
                problems.append(f"{name}: second endpoint is not the identity in degree {r}")
                break
    measured = cert.measured_radius()
    if measured > cert.bound:
        problems.append(f"radius {measured} exceeds recorded bound {cert.bound}")
    return Verdict.of(problems)


# ---------------------------------------------------------------- basic maps

def identity_map(C: GeomChainComplex) -> ChainMap:
    return ChainMap(C, C, {r: im.eye(C.rank(r)) for r in C.degrees})


def zero_map(S: GeomChainComplex, T: GeomChainComplex) -> ChainMap:
    return ChainMap(S, T, {})


def compose_maps(g: ChainMap, f: ChainMap) -> ChainMap:
    """g after f."""
    degs = set(f.comps) & set(g.comps)
    return ChainMap(f.source, g.target, {r: im.mm(g.at(r), f.at(r)) for r in degs})


def add_maps(f: ChainMap, g: ChainMap, c: int = 1) -> ChainMap:
    degs = set(f.comps) | set(g.comps)
    return ChainMap(f.source, f.target, {r: f.at(r) + c * g.at(r) for r in degs})


def zero_homotopy(f: ChainMap) -> ChainHomotopy:
    return ChainHomotopy(f, f, {})


def identity_certificate(C: GeomChainComplex) -> EquivalenceCertificate:
    one = identity_map(C)
    return EquivalenceCertificate(one, one, zero_homotopy(one), zero_homotopy(one), Fraction(0))


def relabel_certificate(C: GeomChainComplex, D: GeomChainComplex) -> EquivalenceCertificate:
    """Identity-matrix certificate between two complexes with equal ranks and differentials."""
    for r in set(C.degrees) | set(D.degrees):
        if C.rank(r) != D.rank(r) or not im.equal(C.d(r), D.d(r)):
            raise ValueError(f"complexes differ in degree {r}")
        if list(C.module(r).locs) != list(D.module(r).locs):
            raise ValueError(f"basis locations differ in degree {r}")
    f = ChainMap(C, D, {r: im.eye(C.rank(r)) for r in C.degrees if C.rank(r)})
    g = ChainMap(D, C, {r: im.eye(C.rank(r)) for r in C.degrees if C.rank(r)})
    return EquivalenceCertificate(f, g, ChainHomotopy(compose_maps(f, g), identity_map(D), {}),
                                  ChainHomotopy(compose_maps(g, f), identity_map(C), {}), Fraction(0))


def relocate(C: GeomChainComplex, move: Mapping[int, int]):
    """Move basis elements: every element located at point x goes to move.get(x, x).

    Matrices are unchanged; the identity certificate has radius equal to the longest move.
    """
    space = C.space
    if not C.modules:
        return C, identity_certificate(C)
    mods = {}
    for r in C.degrees:
        M = C.module(r)
        mods[r] = GeomModule(space, tuple((lab, move.get(int(x), int(x))) for lab, x in M.basis))
    D = _replace(C, mods, {r: C.d(r) for r in C.degrees if r - 1 in C.degrees})
    f = ChainMap(C, D, {r: im.eye(C.rank(r)) for r in C.degrees if C.rank(r)})
    g = ChainMap(D, C, {r: im.eye(C.rank(r)) for r in C.degrees if C.rank(r)})
    cert = EquivalenceCertificate(f, g, ChainHomotopy(compose_maps(f, g), identity_map(D), {}),
                                  ChainHomotopy(compose_maps(g, f), identity_map(C), {}), Fraction(0))
    return D, tighten(cert)


def _pre(h_comps, f: ChainMap, S: GeomChainComplex, deg=1):
    """Graded composite h∘f (f degree 0)."""
    return {r: im.mm(h_comps[r], f.at(r)) for r in h_comps}


def compose_certificates(c1: EquivalenceCertificate, c2: EquivalenceCertificate) -> EquivalenceCertificate:
    """A ≃ B then B ≃ C gives A ≃ C; bounds add."""
    f1, g1, f2, g2 = c1.forward, c1.backward, c2.forward, c2.backward
    A, C = f1.source, f2.target
    f = compose_maps(f2, f1)
    g = compose_maps(g1, g2)
    # g f - 1 = d(g1 k2 f1 + k1) + (...)d
    gf = {}
    for r in A.degrees:
        m = im.mm(im.mm(g1.at(r + 1), c2.homotopy_gf.at(r)), f1.at(r)) + c1.homotopy_gf.at(r)
        gf[r] = m
    fg = {}
    for r in C.degrees:
        m = im.mm(im.mm(f2.at(r + 1), c1.homotopy_fg.at(r)), g2.at(r)) + c2.homotopy_fg.at(r)
        fg[r] = m
    one_a, one_c = identity_map(A), identity_map(C)
    return EquivalenceCertificate(
        f, g,
        ChainHomotopy(compose_maps(f, g), one_c, fg),
        ChainHomotopy(compose_maps(g, f), one_a, gf),
        c1.bound + c2.bound,
    )


def invert_certificate(c: EquivalenceCertificate) -> EquivalenceCertificate:
    return EquivalenceCertificate(c.backward, c.forward, c.homotopy_gf, c.homotopy_fg, c.bound)


def tighten(cert: EquivalenceCertificate) -> EquivalenceCertificate:
    """Same certificate with the bound replaced by the measured radius."""
    return EquivalenceCertificate(cert.forward, cert.backward, cert.homotopy_fg, cert.homotopy_gf, cert.measured_radius())


# ---------------------------------------------------------------- constructions

def mapping_cone(f: ChainMap) -> GeomChainComplex:
    """cone_r = Y_r ⊕ X_{r-1}, d = [[d_Y, f], [0, -d_X]]."""
    X, Y = f.source, f.target
    space = X.space
    degs = set(Y.nonzero_degrees()) | {r + 1 for r in X.nonzero_degrees()}
    if not degs:
        return zero_complex(space)
    lo, hi = min(degs), max(degs)
    mods = {r: direct_sum_modules([Y.module(r), X.module(r - 1)]) for r in range(lo, hi + 1)}
    diffs = {}
    for r in range(lo + 1, hi + 1):
        diffs[r] = im.block([[Y.d(r), f.at(r - 1)], [im.zeros(X.rank(r - 2), Y.rank(r)), -X.d(r - 1)]])
    return GeomChainComplex(space, lo, tuple(mods[r] for r in range(lo, hi + 1)), diffs)


def dual_complex(C: GeomChainComplex, n: int) -> GeomChainComplex:
    """C^{n-*}: degree r holds the basis of C_{n-r}; differential (-1)^r d_{n-r+1}^T."""
    if C.is_zero():
        return zero_complex(C.space)
    lo, hi = n - C.hi, n - C.lo
    mods = tuple(C.module(n - r) for r in range(lo, hi + 1))
    diffs = {r: im.sign(r) * C.d(n - r + 1).T.copy() for r in range(lo + 1, hi + 1)}
    return GeomChainComplex(C.space, lo, mods, diffs)


def double_dual_identification(C: GeomChainComplex, n: int) -> EquivalenceCertificate:
    """Canonical basis isomorphism C -> (C^{n-*})^{n-*} (signs (-1)^r for even n)."""
    DD = dual_complex(dual_complex(C, n), n)
    signs = (lambda r: im.sign(r)) if n % 2 == 0 else (lambda r: 1)
    f = ChainMap(C, DD, {r: signs(r) * im.eye(C.rank(r)) for r in C.degrees})
    g = ChainMap(DD, C, {r: signs(r) * im.eye(C.rank(r)) for r in C.degrees})
    return EquivalenceCertificate(f, g, zero_homotopy(compose_maps(f, g)), zero_homotopy(compose_maps(g, f)), Fraction(0))


def dual_map(f: ChainMap, n: int, source_dual: GeomChainComplex | None = None, target_dual: GeomChainComplex | None = None) -> ChainMap:
    """f: X -> Y induces f^*: Y^{n-*} -> X^{n-*} with components f_{n-r}^T."""
    Yd = target_dual or dual_complex(f.target, n)
    Xd = source_dual or dual_complex(f.source, n)
    return ChainMap(Yd, Xd, {n - r: m.T.copy() for r, m in f.comps.items()})


def direct_sum_complexes(parts: Sequence[GeomChainComplex], tags=None) -> GeomChainComplex:
    space = parts[0].space
    degs = [r for P in parts for r in P.nonzero_degrees()]
    if not degs:
        return zero_complex(space)
    lo, hi = min(degs), max(degs)
    mods = tuple(direct_sum_modules([P.module(r) for P in parts], tags) for r in range(lo, hi + 1))
    diffs = {}
    for r in range(lo + 1, hi + 1):
        rows = []
        for i, P in enumerate(parts):
            row = []
            for j, Q in enumerate(parts):
                row.append(P.d(r) if i == j else im.zeros(P.rank(r - 1), Q.rank(r)))
            rows.append(row)
        diffs[r] = im.block(rows)
    return GeomChainComplex(space, lo, mods, diffs)


def sum_injection(parts: Sequence[GeomChainComplex], k: int, total: GeomChainComplex) -> ChainMap:
    comps = {}
    for r in total.degrees:
        off = sum(P.rank(r) for P in parts[:k])
        m = im.zeros(total.rank(r), parts[k].rank(r))
        for i in range(parts[k].rank(r)):
            m[off + i, i] = 1
        comps[r] = m
    return ChainMap(parts[k], total, comps)


def sum_projection(parts: Sequence[GeomChainComplex], k: int, total: GeomChainComplex) -> ChainMap:
    inj = sum_injection(parts, k, total)
    return ChainMap(total, parts[k], {r: m.T.copy() for r, m in inj.comps.items()})


def max_subcomplex_and_quotient(C: GeomChainComplex, R: Region):
    """Largest based subcomplex whose basis and d-closure lie over R, and the quotient."""
    mask = R.mask()
    good: dict[int, list[int]] = {}
    for r in C.degrees:
        below = set(good.get(r - 1, []))
        dr = C.d(r)
        keep = []
        for x in range(C.rank(r)):
            if not mask[C.locs(r)[x]]:
                continue
            rows = np.nonzero(dr[:, x] != 0)[0] if dr.shape[0] else []
            if all(int(i) in below for i in rows):
                keep.append(x)
        good[r] = keep
    return _sub_quot(C, good)


def _sub_quot(C: GeomChainComplex, keep: Mapping[int, list[int]]):
    sub_idx = {r: list(keep.get(r, [])) for r in C.degrees}
    quo_idx = {r: [x for x in range(C.rank(r)) if x not in set(sub_idx[r])] for r in C.degrees}
    space = C.space

    def piece(idx):
        mods = {r: C.module(r).sub(idx[r]) for r in C.degrees}
        diffs = {r: C.d(r)[np.ix_(idx[r - 1], idx[r])] if idx[r - 1] and idx[r] else im.zeros(len(idx[r - 1]), len(idx[r]))
                 for r in range(C.lo + 1, C.hi + 1)}
        if not C.modules:
            return zero_complex(space)
        return GeomChainComplex(space, C.lo, tuple(mods[r] for r in C.degrees), diffs)

    S, Q = piece(sub_idx), piece(quo_idx)
    for r in range(C.lo + 1, C.hi + 1):
        # entries from quotient into sub are allowed; from sub into quotient are not
        bad = C.d(r)[np.ix_(quo_idx[r - 1], sub_idx[r])] if quo_idx[r - 1] and sub_idx[r] else None
        if bad is not None and not im.is_zero(bad):
            raise ValueError(f"selected basis is not a subcomplex in degree {r}")
    inc, proj = {}, {}
    for r in C.degrees:
        a = im.zeros(C.rank(r), len(sub_idx[r]))
        for k, x in enumerate(sub_idx[r]):
            a[x, k] = 1
        inc[r] = a
        b = im.zeros(len(quo_idx[r]), C.rank(r))
        for k, x in enumerate(quo_idx[r]):
            b[k, x] = 1
        proj[r] = b
    return S, Q, ChainMap(S, C, inc), ChainMap(C, Q, proj)


# ---------------------------------------------------------------- contraction search

def _ball_levels(budget: Fraction, rho: Fraction) -> list[Fraction]:
    levels = []
    for x in (rho, 2 * rho, budget):
        if x <= budget and x not in levels:
            levels.append(x)
    return sorted(levels)


def solve_contraction(C: GeomChainComplex, budget, required: np.ndarray | None = None):
    """Column-by-column search for s with (d s + s d) e_x = e_x.

    Unknowns for column x are restricted to basis elements within `budget`
    of x, trying smaller balls first. Returns (s, failed) where failed maps
    degree -> indices of unsolved columns. A column located at a point where
    `required` is True that cannot be solved raises ControlFailure.
    """
    budget = Fraction(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    space = C.space
    if required is None:
        required = np.zeros(len(space), dtype=bool)
    S = space._scaled
    levels = [space.scaled(b) for b in _ball_levels(budget, C.radius())]
    s: dict[int, np.ndarray] = {}
    solved: dict[int, np.ndarray] = {}
    failed: dict[int, list[int]] = {}
    for r in C.degrees:
        n_r, n_up = C.rank(r), C.rank(r + 1)
        s_r = im.zeros(n_up, n_r)
        ok = np.zeros(n_r, dtype=bool)
        d_up = C.d(r + 1)
        d_r = C.d(r)
        s_prev = s.get(r - 1, im.zeros(n_r, C.rank(r - 1)))
        ok_prev = solved.get(r - 1, np.ones(C.rank(r - 1), dtype=bool))
        locs_r, locs_up = C.locs(r), C.locs(r + 1)
        cache = {}
        for x in range(n_r):
            col = d_r[:, x] if d_r.shape[0] else np.zeros(0, dtype=object)
            below = np.nonzero(col != 0)[0]
            if below.size and not ok_prev[below].all():
                if required[locs_r[x]]:
                    raise ControlFailure(
                        f"contraction stalled in degree {r} at basis element {C.module(r).labels[x]!r}: "
                        f"a lower column is unsolved", degree=r, location=space.points[locs_r[x]])
                failed.setdefault(r, []).append(x)
                continue
            rhs = np.zeros(n_r, dtype=object)
            if below.size:
                rhs = rhs - s_prev[:, below].dot(col[below])
            rhs[x] += 1
            if not np.any(rhs != 0):
                ok[x] = True
                continue
            sol = None
            if n_up:
                dists = S[locs_r[x], locs_up]
                for lim in levels:
                    cols = np.nonzero(dists <= lim)[0]
                    if cols.size == 0:
                        continue
                    sub = d_up[:, cols]
                    rows = np.nonzero(np.any(sub != 0, axis=1) | (rhs != 0))[0]
                    outside = np.ones(n_r, dtype=bool)
                    outside[rows] = False
                    if np.any(rhs[outside] != 0):
                        continue
                    key = (tuple(rows), tuple(cols))
                    solver = cache.get(key)
                    if solver is None:
                        solver = cache[key] = im.IntegerSolver(sub[rows, :])
                    y = solver.solve(rhs[rows].reshape(-1, 1))
                    if y is not None:
                        sol = (cols, y[:, 0])
                        break
            if sol is None:
                if required[locs_r[x]]:
                    raise ControlFailure(
                        f"no contraction within budget {budget} in degree {r} at basis element "
                        f"{C.module(r).labels[x]!r}", degree=r, location=space.points[locs_r[x]])
                failed.setdefault(r, []).append(x)
                continue
            cols, y = sol
            s_r[cols, x] = y
            ok[x] = True
        s[r] = s_r
        solved[r] = ok
    return s, failed


def failure_region(C: GeomChainComplex, failed: Mapping[int, list[int]]) -> Region:
    return Region(C.space, frozenset(int(C.locs(r)[x]) for r, xs in failed.items() for x in xs))


def find_contraction_over(C: GeomChainComplex, R: Region, budget) -> ChainHomotopy:
    """Degree +1 map s with d s + s d = 1 on every column located in inner(R, budget).

    The defect d s + s d - 1 then only has entries involving basis elements
    outside inner(R, budget). Raises ControlFailure naming the first column
    (degree and location) that could not be solved.
    """
    budget = Fraction(budget)
    exact = inner_neighborhood(R, budget)
    s, failed = solve_contraction(C, budget, exact.mask())
    one = identity_map(C)
    return ChainHomotopy(one, zero_map(C, C), s, exact_over=None if exact == C.space.whole else exact)


def contraction_where_possible(C: GeomChainComplex, budget, required: Region | None = None) -> ChainHomotopy:
    """Best-effort contraction; d s + s d - 1 vanishes on all columns away from failed ones."""
    budget = Fraction(budget)
    s, failed = solve_contraction(C, budget, required.mask() if required is not None else None)
    bad = failure_region(C, failed)
    exact = bad.complement()
    one = identity_map(C)
    return ChainHomotopy(one, zero_map(C, C), s, exact_over=None if exact == C.space.whole else exact)


def contraction_budget_used(h: ChainHomotopy) -> Fraction:
    return h.radius()


def certify_chain_map(f: ChainMap, budget) -> EquivalenceCertificate:
    """Turn a chain map into an equivalence certificate via a contraction of its cone.

    A contraction [[a, b], [g, c]] of cone(f) yields the inverse g, with
    f g - 1 = d(-a) + (-a)d and g f - 1 = d c + c d.
    """
    X, Y = f.source, f.target
    K = mapping_cone(f)
    cont = find_contraction_over(K, K.space.whole, budget)
    ga, gc, gg = {}, {}, {}
    for r in K.degrees:
        G = cont.at(r)  # K_r -> K_{r+1}; K_r = Y_r ⊕ X_{r-1}
        ny, nx = Y.rank(r), X.rank(r - 1)
        ny1 = Y.rank(r + 1)
        a = G[:ny1, :ny]
        g = G[ny1:, :ny]
        c = G[ny1:, ny:]
        if ny:
            ga[r] = -a
            gg[r] = g
        if nx:
            gc[r - 1] = c
    g = ChainMap(Y, X, {r: m for r, m in gg.items() if r in X.degrees and r in Y.degrees})
    one_x, one_y = identity_map(X), identity_map(Y)
    hfg = ChainHomotopy(compose_maps(f, g), one_y, {r: m for r, m in ga.items() if r in Y.degrees})
    hgf = ChainHomotopy(compose_maps(g, f), one_x, {r: m for r, m in gc.items() if r in X.degrees})
    cert = EquivalenceCertificate(f, g, hfg, hgf, Fraction(0))
    return tighten(cert)


# ---------------------------------------------------------------- elementary equivalences

def _replace(C: GeomChainComplex, modules: Mapping[int, GeomModule], diffs: Mapping[int, np.ndarray]) -> GeomChainComplex:
    lo = min([C.lo] + list(modules)) if C.modules else min(modules)
    hi = max([C.hi] + list(modules)) if C.modules else max(modules)
    mods = tuple(modules.get(r, C.module(r)) for r in range(lo, hi + 1))
    ds = {r: diffs.get(r, C.d(r)) for r in range(lo + 1, hi + 1)}
    return GeomChainComplex(C.space, lo, mods, ds)


def _cert(C, D, f, g, hfg, hgf) -> EquivalenceCertificate:
    fm, gm = ChainMap(C, D, f), ChainMap(D, C, g)
    cert = EquivalenceCertificate(
        fm, gm,
        ChainHomotopy(compose_maps(fm, gm), identity_map(D), hfg),
        ChainHomotopy(compose_maps(gm, fm), identity_map(C), hgf),
        Fraction(0),
    )
    return tighten(cert)


def _ids(C: GeomChainComplex, skip=()):
    return {r: im.eye(C.rank(r)) for r in C.degrees if r not in skip}


def stabilize(C: GeomChainComplex, k: int, module: GeomModule):
    """C ⊕ (module in degree k --1--> copy in degree k-1), with its certificate.

    `module` provides labels for degree k; the copy in degree k-1 reuses them
    with a trailing apostrophe. Both copies are appended after C's basis.
    """
    top = module
    bot = GeomModule(module.space, tuple((lab + "'", loc) for lab, loc in module.basis))
    p = module.rank
    mods = {k: GeomModule(C.space, C.module(k).basis + top.basis),
            k - 1: GeomModule(C.space, C.module(k - 1).basis + bot.basis)}
    diffs = {}
    nk, nk1 = C.rank(k), C.rank(k - 1)
    diffs[k] = im.block([[C.d(k), im.zeros(nk1, p)], [im.zeros(p, nk), im.eye(p)]])
    diffs[k + 1] = im.block([[C.d(k + 1)], [im.zeros(p, C.rank(k + 1))]])
    diffs[k - 1] = im.block([[C.d(k - 1), im.zeros(C.rank(k - 2), p)]])
    D = _replace(C, mods, diffs)
    f = {r: im.eye(C.rank(r)) for r in C.degrees}
    g = {}
    for r in D.degrees:
        extra = p if r in (k, k - 1) else 0
        f[r] = im.block([[im.eye(C.rank(r))], [im.zeros(extra, C.rank(r))]])
        g[r] = f[r].T.copy()
    # f g - 1 = -(projection onto the added piece) = d s + s d with s = -(copy -> original)
    s = im.zeros(D.rank(k), D.rank(k - 1))
    for i in range(p):
        s[nk + i, nk1 + i] = -1
    return D, _cert(C, D, f, g, {k - 1: s}, {})


def change_basis(C: GeomChainComplex, autos: Mapping[int, tuple[np.ndarray, np.ndarray]]):
    """Conjugate by automorphisms A_r (given with inverses): d'_r = A_{r-1} d_r A_r^{-1}."""
    A = {r: autos[r][0] if r in autos else im.eye(C.rank(r)) for r in C.degrees}
    Ai = {r: autos[r][1] if r in autos else im.eye(C.rank(r)) for r in C.degrees}
    for r, (a, b) in autos.items():
        if not im.equal(im.mm(a, b), im.eye(C.rank(r))):
            raise ValueError(f"change_basis: given inverse is wrong in degree {r}")
    diffs = {r: im.mm(im.mm(A[r - 1], C.d(r)), Ai[r]) for r in range(C.lo + 1, C.hi + 1)}
    D = GeomChainComplex(C.space, C.lo, C.modules, diffs)
    return D, _cert(C, D, A, Ai, {}, {})


def gaussian_eliminate(C: GeomChainComplex, m: int, b_idx: Sequence[int], c_idx: Sequence[int]):
    """Cancel an invertible block phi = d_m[c, b] between degrees m and m-1.

    Returns the reduced complex and the certificate C ≃ reduced.
    """
    b_idx, c_idx = list(b_idx), list(c_idx)
    if len(b_idx) != len(c_idx):
        raise ValueError("eliminated blocks must have equal size")
    dm = C.d(m)
    phi = dm[np.ix_(c_idx, b_idx)] if b_idx else im.zeros(0, 0)
    phi_inv = im.inverse_unimodular(phi) if b_idx else phi
    x_idx = [i for i in range(C.rank(m)) if i not in set(b_idx)]
    y_idx = [i for i in range(C.rank(m - 1)) if i not in set(c_idx)]

    def blk(M, rows, cols):
        if not rows or not cols:
            return im.zeros(len(rows), len(cols))
        return M[np.ix_(rows, cols)]

    delta = blk(dm, c_idx, x_idx)
    gamma = blk(dm, y_idx, b_idx)
    eps = blk(dm, y_idx, x_idx)
    new_dm = eps - im.mmm(gamma, phi_inv, delta)
    mods = {m: C.module(m).sub(x_idx), m - 1: C.module(m - 1).sub(y_idx)}
    dup = C.d(m + 1)
    ddown = C.d(m - 1)
    diffs = {m: new_dm, m + 1: dup[x_idx, :] if x_idx else im.zeros(0, C.rank(m + 1)),
             m - 1: ddown[:, y_idx] if y_idx else im.zeros(C.rank(m - 2), 0)}
    D = _replace(C, mods, diffs)
    nm, nm1 = C.rank(m), C.rank(m - 1)
    f, g = _ids(C, (m, m - 1)), _ids(C, (m, m - 1))
    fm = im.zeros(len(x_idx), nm)
    for k, i in enumerate(x_idx):
        fm[k, i] = 1
    fm1 = im.zeros(len(y_idx), nm1)
    for k, i in enumerate(y_idx):
        fm1[k, i] = 1
    if c_idx and y_idx:
        fm1[:, c_idx] = -im.mm(gamma, phi_inv)
    gm = im.zeros(nm, len(x_idx))
    for k, i in enumerate(x_idx):
        gm[i, k] = 1
    if b_idx and x_idx:
        gm[b_idx, :] = -im.mm(phi_inv, delta)
    gm1 = fm1.T.copy()
    gm1[c_idx, :] = 0
    f[m], f[m - 1], g[m], g[m - 1] = fm, fm1, gm, gm1
    h = im.zeros(nm, nm1)
    if b_idx:
        h[np.ix_(b_idx, c_idx)] = -phi_inv
    return D, _cert(C, D, f, g, {}, {m - 1: h})


def delete_pairs(C: GeomChainComplex, m: int, pairs: Sequence[tuple[int, int]]):
    """Delete basis pairs (b in degree m, c in degree m-1) joined by a clean ±1 entry."""
    dm = C.d(m)
    bs = [b for b, _ in pairs]
    cs = [c for _, c in pairs]
    for b, c in pairs:
        if abs(int(dm[c, b])) != 1:
            raise ValueError(f"entry at degree {m} ({C.module(m).labels[b]}, {C.module(m - 1).labels[c]}) is {dm[c, b]}, not a unit")
        if np.count_nonzero(dm[:, b] != 0) != 1 or np.count_nonzero(dm[c, :] != 0) != 1:
            raise ValueError(f"summand at {C.module(m).labels[b]!r} is not split from the rest")
        up = C.d(m + 1)
        down = C.d(m - 1)
        if up.shape[0] and np.any(up[b, :] != 0):
            raise ValueError(f"summand element {C.module(m).labels[b]!r} is hit by d")
        if down.shape[1] and np.any(down[:, c] != 0):
            raise ValueError(f"summand element {C.module(m - 1).labels[c]!r} has nonzero boundary")
    return gaussian_eliminate(C, m, bs, cs)


# ---------------------------------------------------------------- folding

def _foldable_down(C: GeomChainComplex, s: ChainHomotopy, m: int, cand: list[int]) -> list[int]:
    """Largest subset P of candidates with (s_{m-1} d_m)[P, P] = 1."""
    M = im.mm(s.at(m - 1), C.d(m))
    P = list(cand)
    while True:
        bad = [x for x in P if not (M[x, x] == 1 and all(M[y, x] == 0 for y in P if y != x)
                                     and all(M[x, y] == 0 for y in P if y != x))]
        if not bad:
            return P
        P = [x for x in P if x not in set(bad[:1])]


def _foldable_up(C: GeomChainComplex, s: ChainHomotopy, b: int, cand: list[int]) -> list[int]:
    M = im.mm(C.d(b + 1), s.at(b))
    P = list(cand)
    while True:
        bad = [x for x in P if not (M[x, x] == 1 and all(M[y, x] == 0 for y in P if y != x)
                                     and all(M[x, y] == 0 for y in P if y != x))]
        if not bad:
            return P
        P = [x for x in P if x not in set(bad[:1])]


def fold_down_step(C: GeomChainComplex, m: int, P: Sequence[int], sigma: np.ndarray, tag: str):
    """Move basis P of degree m to degree m-2 using sigma: C_{m-1} -> P with sigma d_m|P = 1."""
    P = list(P)
    mod = C.module(m).sub(P)
    copy = GeomModule(C.space, tuple((f"{lab}{tag}", loc) for lab, loc in mod.basis))
    D1, c1 = stabilize(C, m - 1, copy)
    n1 = C.rank(m - 1)
    p = len(P)
    psi = im.eye(n1 + p)
    psi[n1:, :n1] = sigma
    psi_inv = im.eye(n1 + p)
    psi_inv[n1:, :n1] = -sigma
    D2, c2 = change_basis(D1, {m - 1: (psi, psi_inv)})
    D3, c3 = gaussian_eliminate(D2, m, P, list(range(n1, n1 + p)))
    return D3, compose_certificates(compose_certificates(c1, c2), c3)


def fold_up_step(C: GeomChainComplex, b: int, P: Sequence[int], tau: np.ndarray, tag: str):
    """Move basis P of degree b to degree b+2 using tau: P -> C_{b+1} with (d tau)|P = 1."""
    P = list(P)
    mod = C.module(b).sub(P)
    top = GeomModule(C.space, tuple((f"{lab}{tag}", loc) for lab, loc in mod.basis))
    D1, c1 = stabilize(C, b + 2, top)  # copy in degree b+1 is appended after C_{b+1}
    n1 = C.rank(b + 1)
    p = len(P)
    psi = im.eye(n1 + p)
    psi[:n1, n1:] = -tau
    psi_inv = im.eye(n1 + p)
    psi_inv[:n1, n1:] = tau
    D2, c2 = change_basis(D1, {b + 1: (psi, psi_inv)})
    D3, c3 = gaussian_eliminate(D2, b + 1, list(range(n1, n1 + p)), P)
    return D3, compose_certificates(compose_certificates(c1, c2), c3)


def fold_over_region(C: GeomChainComplex, R: Region, s: ChainHomotopy, j: int, budget=None):
    """Equivalent complex whose basis over R sits in degrees j and j-1.

    Folds the top R-degree down two steps (or the bottom one up) at a time,
    re-solving the contraction over R after every step. Returns (folded, cert).
    """
    v = check_homotopy(s)
    if not v:
        raise ValueError(f"fold_over_region: contraction does not verify: {v.problems[0]}")
    budget = Fraction(budget) if budget is not None else max(s.radius(), C.radius())
    mask = R.mask()
    exact = s.exact_over.mask() if s.exact_over is not None else np.ones(len(C.space), dtype=bool)
    cert = identity_certificate(C)
    cur = C
    step = 0
    while True:
        over = {r: [x for x in range(cur.rank(r)) if mask[cur.locs(r)[x]]] for r in cur.degrees}
        high = [r for r in cur.degrees if over[r] and r > j]
        low = [r for r in cur.degrees if over[r] and r < j - 1]
        if not high and not low:
            break
        if step:
            s = contraction_where_possible(cur, budget)
            exact = s.exact_over.mask() if s.exact_over is not None else np.ones(len(C.space), dtype=bool)
        step += 1
        if high:
            m = max(high)
            cand = [x for x in over[m] if exact[cur.locs(m)[x]]]
            P = _foldable_down(cur, s, m, cand)
            if not P:
                x = over[m][0]
                raise ControlFailure(f"fold stalled in degree {m} at {cur.module(m).labels[x]!r}",
                                     degree=m, location=cur.space.points[cur.locs(m)[x]])
            sigma = s.at(m - 1)[P, :]
            cur, c = fold_down_step(cur, m, P, sigma, f"~{step}")
        else:
            b = min(low)
            cand = [x for x in over[b] if exact[cur.locs(b)[x]]]
            P = _foldable_up(cur, s, b, cand)
            if not P:
                x = over[b][0]
                raise ControlFailure(f"fold stalled in degree {b} at {cur.module(b).labels[x]!r}",
                                     degree=b, location=cur.space.points[cur.locs(b)[x]])
            tau = s.at(b)[:, P]
            cur, c = fold_up_step(cur, b, P, tau, f"^{step}")
        cert = compose_certificates(cert, c)
    return cur, tighten(cert)
