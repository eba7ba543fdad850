"""Acceptance corpus runner.

Each criterion is a function (size, seed) -> CriterionReport. Corpus sizes
and seeds come from a manifest so that two runs print the same bytes; the
report deliberately carries no timings, only whether time limits held.
"""
from __future__ import annotations

import json
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from . import intmat as im
from .assembly import assemble, bisectable_loop_cycle, check_cycle, loop_cycle, subdivide
from .chain_complexes import (
    ControlFailure,
    check_complex,
    contraction_where_possible,
    double_dual_identification,
    dual_complex,
    find_contraction_over,
    fold_over_region,
    identity_map,
    mapping_cone,
    verify_equivalence,
)
from .control_space import ControlSpace, circle_space, uniform_line
from .generator import corpus_spec, generate_poincare, random_isomorphism_instance, random_module, random_morphism
from .geometric_algebra import compose, radius
from .quadratic_structures import (
    QuadraticForm,
    QuadraticPair,
    algebraic_boundary,
    arf,
    check_quadratic,
    duality_map,
    e8_form,
    form_complex,
    glue_union,
    hyperbolic_form,
    scale_structure,
    signature,
    surger_below_middle,
    thickening_pair,
    verify_bordism,
)
from .splitting import check_split_iso, check_split_result, split_isomorphism, split_poincare_complex

BOUNDARY_K = 4  # budget multiple of radius(Q) for contracting the algebraic boundary
RATIO_PER_DEGREE = 12


@dataclass
class CriterionReport:
    number: int
    title: str
    passed: bool
    lines: list = field(default_factory=list)

    def text(self) -> str:
        head = f"criterion {self.number} [{'PASS' if self.passed else 'FAIL'}] {self.title}"
        return "\n".join([head] + ["  " + x for x in self.lines])


def small_space(rng: random.Random) -> ControlSpace:
    npts = rng.randint(2, 16)
    if rng.random() < 0.5:
        return circle_space(npts)
    return uniform_line(npts, Fraction(1, npts))


# ---------------------------------------------------------------- 1

def radius_calculus(size: int, seed: int) -> CriterionReport:
    rng = random.Random(seed)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(size):
        space = small_space(rng)
        A, B, C = (random_module(rng, space, rng.randint(0, 6), p) for p in "abc")
        f = random_morphism(rng, A, B, Fraction(rng.randint(0, 4), 8))
        g = random_morphism(rng, B, C, Fraction(rng.randint(0, 4), 8))
        if radius(compose(g, f)) > radius(g) + radius(f):
            bad += 1
    fast = time.perf_counter() - t0 < 10
    return CriterionReport(1, "radius of a composite is at most the sum of radii", bad == 0 and fast,
                           [f"pairs {size}", f"violations {bad}", f"under 10 s: {'yes' if fast else 'no'}"])


# ---------------------------------------------------------------- 2

CONSTRUCTORS = ("cone", "dual", "fold", "boundary", "glue", "assemble", "surgery")


def _construct(kind: str, case_seed: int) -> list[str]:
    """Build one output of the given constructor and return its verification problems."""
    rng = random.Random(case_seed)
    space = small_space(rng)
    spec = corpus_spec(case_seed, Fraction(rng.randint(0, 2), len(space)))
    Q = generate_poincare(spec, space)
    C = Q.C
    if kind == "cone":
        f = duality_map(Q) if rng.random() < 0.5 else identity_map(C)
        return list(check_complex(mapping_cone(f)).problems)
    if kind == "dual":
        Cd = dual_complex(C, Q.n)
        return list(check_complex(Cd).problems) + list(verify_equivalence(double_dual_identification(C, Q.n)).problems)
    if kind == "fold":
        K = mapping_cone(identity_map(C))
        if not K.total_rank():
            return []
        budget = 2 * K.radius()
        s = contraction_where_possible(K, budget)
        j = rng.choice(K.degrees[1:] or K.degrees)
        F, cert = fold_over_region(K, space.whole, s, j, budget)
        return list(check_complex(F).problems) + list(verify_equivalence(cert).problems)
    if kind == "boundary":
        return list(check_quadratic(algebraic_boundary(Q)).problems)
    if kind == "glue":
        P = thickening_pair(Q)
        mirror = QuadraticPair(P.f, tuple(scale_structure(P.delta_psi, -1)), P.boundary.negated())
        return list(check_quadratic(glue_union(P, mirror)).problems)
    if kind == "assemble":
        k = rng.randint(3, min(6, len(space))) if len(space) >= 3 else 0
        if not k:
            return []
        pts = sorted(rng.sample(range(len(space)), k))
        E = generate_poincare(corpus_spec(case_seed + 1, Fraction(0)), space)
        return check_cycle(loop_cycle(space, pts, E)) + list(check_quadratic(assemble(loop_cycle(space, pts, E))).problems)
    if kind == "surgery":
        Qp, bord = surger_below_middle(Q, Fraction(1))
        return list(check_quadratic(Qp).problems) + list(verify_bordism(bord, bord.radius).problems)
    raise ValueError(kind)


def structural_exactness(size: int, seed: int) -> CriterionReport:
    fails = {k: 0 for k in CONSTRUCTORS}
    first = []
    for i in range(size):
        kind = CONSTRUCTORS[i % len(CONSTRUCTORS)]
        case = seed * 100003 + i
        try:
            probs = _construct(kind, case)
        except (ControlFailure, ValueError) as exc:
            probs = [f"raised {type(exc).__name__}: {exc}"]
        if probs:
            fails[kind] += 1
            if not first:
                first.append(f"first failure: {kind} case {case}: {probs[0]}")
    total = sum(fails.values())
    lines = [f"cases {size}"] + [f"{k} failures {v}" for k, v in fails.items()] + first
    return CriterionReport(2, "constructor outputs satisfy d^2 = 0 and the quadratic relation", total == 0, lines)


# ---------------------------------------------------------------- 3

def boundary_contractibility(size: int, seed: int) -> CriterionReport:
    space = circle_space(16)
    bad = 0
    need = 0
    for i in range(size):
        case = seed * 100003 + i
        rng = random.Random(case)
        Q = generate_poincare(corpus_spec(case, Fraction(rng.randint(0, 2), 16)), space)
        dQ = algebraic_boundary(Q)
        try:
            s = find_contraction_over(dQ.C, space.whole, BOUNDARY_K * Q.radius)
            if Q.radius:
                need = max(need, s.radius() / Q.radius)
        except ControlFailure:
            bad += 1
    return CriterionReport(3, "the algebraic boundary contracts within k * radius", bad == 0,
                           [f"complexes {size}", f"k = {BOUNDARY_K}", f"largest contraction radius / radius {need}",
                            f"failures {bad}"])


# ---------------------------------------------------------------- 4

def split_iso_suite(size: int, seed: int) -> CriterionReport:
    spaces = (("line", uniform_line(48, Fraction(1, 32))), ("circle", circle_space(96, 3)))
    eps = Fraction(1, 2)
    delta = Fraction(1, 16)
    bad = {name: 0 for name, _ in spaces}
    first = []
    for i in range(size):
        name, B = spaces[i % 2]
        case = seed * 100003 + i
        rng = random.Random(case)
        x = rng.randrange(len(B))
        V = B.region([x, (x + 1) % len(B)])
        d, e = random_isomorphism_instance(case, B, V, delta)
        try:
            probs = check_split_iso(split_isomorphism(d, e, V, eps))
        except ControlFailure as exc:
            probs = [str(exc)]
        if probs:
            bad[name] += 1
            if not first:
                first.append(f"first failure: {name} case {case}: {probs[0]}")
    lines = [f"instances {size}", f"eps {eps}, delta {delta}"] + [f"{k} failures {v}" for k, v in bad.items()] + first
    return CriterionReport(4, "controlled isomorphisms split by elementary moves", sum(bad.values()) == 0, lines)


# ---------------------------------------------------------------- 5

def split_suite(size: int, seed: int) -> CriterionReport:
    B = circle_space(16)
    W = B.region(range(8))
    eps = Fraction(3, 4)
    bad = 0
    worst = Fraction(0)
    over = 0
    first = []
    degenerate = 0
    for i in range(size):
        case = seed * 100003 + i
        Q = generate_poincare(corpus_spec(case, Fraction(1, 16)), B)
        try:
            res = split_poincare_complex(Q, W, eps)
            probs = check_split_result(Q, W, eps, res)
        except (ControlFailure, ValueError) as exc:
            probs, res = [str(exc)], None
        if probs:
            bad += 1
            if not first:
                first.append(f"first failure: case {case}: {probs[0]}")
            continue
        degenerate += "degenerate" in res.ledger.notes
        nz = max(1, len(Q.C.nonzero_degrees()))
        r = res.ledger.ratio
        if r is not None:
            worst = max(worst, r / nz)
            over += r > RATIO_PER_DEGREE * nz
    lines = [f"complexes {size} ({degenerate} with everything on one side)", f"failures {bad}",
             f"largest eps/delta per nonzero degree {worst}", f"ratios above {RATIO_PER_DEGREE} per degree {over}"] + first
    return CriterionReport(5, "Poincaré complexes split along a half circle", bad == 0 and over == 0, lines)


# ---------------------------------------------------------------- 6 and 7

def sample_cycles():
    """Named loop cycles on the 16-point circle (image diameters 1/16) and subdivisions of coarser loops."""
    B = circle_space(16)
    out = []
    fibres = [("H", form_complex(hyperbolic_form(), B)), ("E8", form_complex(e8_form(), B)),
              ("H-dim2", form_complex(hyperbolic_form(2), B))]
    for s in (3, 8):
        fibres.append((f"generated{s}", generate_poincare(corpus_spec(s, Fraction(0)), B)))
    for name, E in fibres:
        out.append((f"loop16/{name}", loop_cycle(B, list(range(16)), E)))
    coarse = bisectable_loop_cycle(B, list(range(0, 16, 2)), fibres[0][1])
    out.append(("loop8/H subdivided", subdivide(coarse)))
    return out


def assembly_radius(size: int, seed: int) -> CriterionReport:
    lines, ok = [], True
    for name, Z in sample_cycles():
        diam = Z.base.max_diameter()
        Q = assemble(Z)
        good = diam < Fraction(1, 8) and Q.radius < Fraction(1, 8) and not check_quadratic(Q).problems
        ok &= good
        lines.append(f"{name}: diameter {diam}, radius {Q.radius} {'ok' if good else 'FAIL'}")
    return CriterionReport(6, "assembled complexes have radius below 1/8", ok, lines)


def assembly_round_trip(size: int, seed: int) -> CriterionReport:
    B = circle_space(16)
    W = B.region(range(8))
    eps = Fraction(3, 4)
    lines, ok = [], True
    for name, Z in sample_cycles()[:size]:
        Q = assemble(Z)
        try:
            res = split_poincare_complex(Q, W, eps)
            probs = check_split_result(Q, W, eps, res)
        except (ControlFailure, ValueError) as exc:
            probs = [str(exc)]
        ok &= not probs
        lines.append(f"{name}: {'ok' if not probs else probs[0]}")
    return CriterionReport(7, "assemble then split over a two-region cover", ok, lines)


# ---------------------------------------------------------------- 8

def _majority_arf(m) -> int:
    k = len(m)
    vals = [0, 0]
    for bits in range(1 << k):
        x = [(bits >> i) & 1 for i in range(k)]
        vals[sum(x[i] * m[i][j] * x[j] for i in range(k) for j in range(k)) % 2] += 1
    return 0 if vals[0] > vals[1] else 1


def _random_unimodular(rng: random.Random, k: int, steps: int = 12):
    A = im.eye(k)
    for _ in range(steps if k > 1 else 0):
        a, b = rng.sample(range(k), 2)
        E = im.eye(k)
        E[a, b] = rng.choice((1, -1))
        A = im.mm(E, A)
    return A


def _conjugate(F: QuadraticForm, A) -> QuadraticForm:
    m = im.mmm(A.T.copy(), F.array(), A) if F.rank else F.array()
    return QuadraticForm(tuple(tuple(int(v) for v in row) for row in m.tolist()), F.n, F.location)


def random_symmetric_form(rng: random.Random) -> QuadraticForm:
    """Sum of H, E8 and -E8 blocks (dimension 0), in a scrambled basis."""
    F = QuadraticForm((), 0)
    for _ in range(rng.randint(1, 2)):
        blk = rng.choice(("H", "E8", "-E8"))
        G = hyperbolic_form() if blk == "H" else e8_form()
        if blk == "-E8":
            G = QuadraticForm(tuple(tuple(-v for v in r) for r in G.matrix), 0)
        F = F.direct_sum(G)
    return _conjugate(F, _random_unimodular(rng, F.rank))


def random_skew_form(rng: random.Random) -> QuadraticForm:
    """Sum of H and twisted H blocks (dimension 2), in a scrambled basis."""
    F = QuadraticForm((), 2)
    for _ in range(rng.randint(1, 3)):
        F = F.direct_sum(hyperbolic_form(2) if rng.random() < 0.5 else QuadraticForm(((1, 1), (0, 1)), 2))
    return _conjugate(F, _random_unimodular(rng, F.rank))


def coefficient_invariants(size: int, seed: int) -> CriterionReport:
    lines, ok = [], True
    s8 = signature(e8_form())
    ok &= s8 == 8
    lines.append(f"signature(E8) = {s8}")
    agree = raised = 0
    for bits in range(16):
        m = ((bits & 1, (bits >> 1) & 1), ((bits >> 2) & 1, (bits >> 3) & 1))
        F = QuadraticForm(m, 2)
        if (m[0][1] + m[1][0]) % 2:
            agree += arf(F) == _majority_arf(m)
        else:
            try:
                arf(F)
            except ValueError:
                raised += 1
    ok &= agree == 8 and raised == 8
    lines.append(f"rank-2 refinements: {agree}/8 nonsingular agree with majority count, {raised}/8 singular refused")
    rng = random.Random(seed)
    bad_sig = bad_arf = bad_h = 0
    H0, H2 = hyperbolic_form(), hyperbolic_form(2)
    for _ in range(size):
        F, G = random_symmetric_form(rng), random_symmetric_form(rng)
        bad_sig += signature(F.direct_sum(G)) != signature(F) + signature(G)
        bad_h += signature(H0.direct_sum(F)) != signature(F)
        F2, G2 = random_skew_form(rng), random_skew_form(rng)
        bad_arf += arf(F2.direct_sum(G2)) != (arf(F2) + arf(G2)) % 2
        bad_h += arf(H2.direct_sum(F2)) != arf(F2)
    ok &= bad_sig == 0 and bad_arf == 0 and bad_h == 0
    lines += [f"random pairs {size}", f"signature additivity failures {bad_sig}",
              f"arf additivity failures {bad_arf}", f"hyperbolic summand failures {bad_h}"]
    return CriterionReport(8, "signature and Arf invariants", ok, lines)


# ---------------------------------------------------------------- 9

def format_determinism(size: int, seed: int) -> CriterionReport:
    from .fixtures import fixture_names, fixture_text
    from .workbench import WorkbenchDocument
    lines, ok = [], True
    for name in fixture_names():
        raw = fixture_text(name)
        same = WorkbenchDocument.parse(raw).text() == raw
        ok &= same
        lines.append(f"{name}: {'round trip identical' if same else 'round trip differs'}")
    space = circle_space(16)
    texts = []
    for _ in range(2):
        doc = WorkbenchDocument.new(space)
        for i in range(size):
            doc.add(f"q{i}", generate_poincare(corpus_spec(seed + i, Fraction(1, 16)), space))
        texts.append(doc.text())
    same = texts[0] == texts[1] and WorkbenchDocument.parse(texts[0]).text() == texts[0]
    ok &= same
    lines.append(f"{size} generated complexes: {'identical on regeneration' if same else 'regeneration differs'}")
    return CriterionReport(9, "deterministic output and canonical files", ok, lines)


CRITERIA = {
    1: radius_calculus,
    2: structural_exactness,
    3: boundary_contractibility,
    4: split_iso_suite,
    5: split_suite,
    6: assembly_radius,
    7: assembly_round_trip,
    8: coefficient_invariants,
    9: format_determinism,
}


def load_manifest(path=None, quick: bool = False) -> dict:
    """Criterion -> {size, seed}; the shipped full manifest by default, or the reduced one."""
    if path is None:
        name = "manifest_quick.json" if quick else "manifest.json"
        text = resources.files("ctrlsurg.data").joinpath(name).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    return {int(k): {"size": int(v["size"]), "seed": int(v["seed"])} for k, v in raw["criteria"].items()}


def _run_one(args) -> str:
    number, size, seed = args
    return CRITERIA[number](size, seed).text()


def run_selftest(manifest: dict, only=None, threads: int | None = None) -> tuple[bool, str]:
    """Run the manifest's criteria; the report lists them in criterion order whatever the thread count."""
    jobs = [(k, v["size"], v["seed"]) for k, v in sorted(manifest.items()) if only is None or k in only]
    if threads is None:
        threads = int(os.environ.get("CTRLSURG_THREADS", "1") or 1)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            texts = list(pool.map(_run_one, jobs))
    else:
        texts = [_run_one(j) for j in jobs]
    passed = all("[PASS]" in t.splitlines()[0] for t in texts)
    summary = f"selftest: {sum('[PASS]' in t.splitlines()[0] for t in texts)}/{len(texts)} criteria passed"
    return passed, "\n".join(texts + [summary]) + "\n"
