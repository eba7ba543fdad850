"""ctrlsurg: command-line workbench over canonical JSON documents.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 a pipeline stage failed (its ledger is still printed).
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .assembly import PoincareCycle, assemble, check_cycle, subdivide, subdivision_certificate
from .chain_complexes import (
    ControlFailure,
    EquivalenceCertificate,
    GeomChainComplex,
    check_complex,
    contraction_where_possible,
    fold_over_region,
    verify_equivalence,
)
from .control_space import Region, circle_space, uniform_line
from .generator import GeneratorSpec, generate_poincare
from .geometric_algebra import GeomMorphism, radius
from .quadratic_structures import (
    BordismCertificate,
    QuadraticComplex,
    QuadraticForm,
    QuadraticPair,
    algebraic_boundary,
    arf,
    check_quadratic,
    is_poincare,
    middle_form,
    signature,
)
from .splitting import StageFailure, check_split_iso, check_split_result, split_isomorphism, split_poincare_complex
from .workbench import DocumentError, WorkbenchDocument, describe, verify_document

OK, VERIFY_FAILED, USAGE, STAGE_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def rational(text: str) -> Fraction:
    """Exact rational flag value: '3/4', '2' or '-1/8'; decimals and exponents are refused."""
    if any(c in text for c in ".eE"):
        raise argparse.ArgumentTypeError(f"{text!r}: give an exact rational such as 3/4, not a decimal")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a rational number") from None


def _fail(msg: str) -> None:
    print(msg, file=sys.stderr)


def _index_list(text: str) -> list[int]:
    """'0-3,7' -> [0, 1, 2, 3, 7], order and repeats kept."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _region(doc: WorkbenchDocument, text: str | None) -> Region:
    """A region object's name, or point indices such as '0-7,9'."""
    space = doc.space
    if text is None:
        return space.whole
    if text in doc.raw["objects"]:
        reg = doc.get(text)
        if not isinstance(reg, Region):
            raise UsageError(f"object {text!r} is not a region")
        return reg
    try:
        members = set(_index_list(text))
    except ValueError:
        raise UsageError(f"region {text!r} is neither an object name nor a list of point indices") from None
    if any(not 0 <= m < len(space) for m in members):
        raise UsageError(f"region {text!r} names points outside the control space")
    return space.region(members)


def _obj(doc: WorkbenchDocument, name: str | None, kinds: tuple, cls):
    name = name or doc.first_of(*kinds)
    obj = doc.get(name)
    if not isinstance(obj, cls):
        raise UsageError(f"object {name!r} is a {type(obj).__name__}, expected {' or '.join(k for k in kinds)}")
    return name, obj


def _emit(args, doc: WorkbenchDocument | None):
    if doc is not None and getattr(args, "out", None):
        doc.save(args.out)
        print(f"wrote {args.out}")


def _result_doc(src: WorkbenchDocument, note: str) -> WorkbenchDocument:
    return WorkbenchDocument.new(src.space, [note])


def _report_verdicts(pairs, stream=None) -> int:
    bad = False
    for label, problems in pairs:
        if problems:
            bad = True
            _fail(f"{label}: FAILED")
            for p in problems[:10]:
                _fail(f"  {p}")
        else:
            print(f"{label}: verified", file=stream or sys.stdout)
    return VERIFY_FAILED if bad else OK


# ---------------------------------------------------------------- subcommands

def cmd_check(args) -> int:
    raw = open(args.file, "rb").read()
    doc = WorkbenchDocument.parse(raw)
    code = OK
    if args.canonical and doc.text().encode("utf-8") != raw:
        _fail("file is not in canonical form")
        code = VERIFY_FAILED
    verdicts = verify_document(doc)
    rc = _report_verdicts((f"{name} ({doc.kind(name) if name in doc.raw['objects'] else 'space'})", list(v.problems))
                          for name, v in verdicts.items())
    return max(code, rc)


def _radius_of(obj):
    if isinstance(obj, GeomMorphism):
        return radius(obj)
    if isinstance(obj, GeomChainComplex):
        return obj.radius()
    if isinstance(obj, (QuadraticComplex, QuadraticPair, BordismCertificate)):
        return obj.radius
    if isinstance(obj, EquivalenceCertificate):
        return obj.measured_radius()
    if isinstance(obj, PoincareCycle):
        return assemble(obj).radius
    if isinstance(obj, Region):
        return obj.space.diameter(obj.members)
    return None


def cmd_radius(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    names = [args.object] if args.object else doc.names
    for name in names:
        r = _radius_of(doc.get(name))
        if r is not None:
            print(f"{name}: {r}")
    return OK


def cmd_boundary(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    name, Q = _obj(doc, args.object, ("quadratic",), QuadraticComplex)
    dQ = algebraic_boundary(Q)
    print(f"boundary of {name}: {describe(dQ)}")
    problems = list(check_quadratic(dQ).problems)
    out = _result_doc(doc, f"algebraic boundary of {name}")
    out.add("boundary", dQ)
    if args.budget is not None:
        try:
            cert = is_poincare(dQ, args.budget)
        except ControlFailure as exc:
            _fail(f"boundary is not certified Poincaré within {args.budget}: {exc}")
            return STAGE_FAILED
        problems += list(verify_equivalence(cert).problems)
        out.add("boundary_duality", cert)
        print(f"duality certificate radius {cert.bound}")
    rc = _report_verdicts([("boundary", problems)])
    _emit(args, out if rc == OK else None)
    return rc


def cmd_fold(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    name = args.object or doc.first_of("complex", "quadratic")
    obj = doc.get(name)
    C = obj.C if isinstance(obj, QuadraticComplex) else obj
    if not isinstance(C, GeomChainComplex):
        raise UsageError(f"object {name!r} is not a complex")
    R = _region(doc, args.region)
    budget = args.budget if args.budget is not None else 2 * C.radius()
    s = contraction_where_possible(C, budget)
    try:
        F, cert = fold_over_region(C, R, s, args.degree, budget)
    except ControlFailure as exc:
        _fail(f"fold failed: {exc}")
        return STAGE_FAILED
    print(f"folded {name}: {describe(F)}")
    print(f"certificate radius {cert.bound}")
    rc = _report_verdicts([("folded complex", list(check_complex(F).problems)),
                           ("certificate", list(verify_equivalence(cert).problems))])
    out = _result_doc(doc, f"{name} folded to degrees {args.degree - 1}, {args.degree}")
    out.add("folded", F)
    out.add("fold_certificate", cert)
    _emit(args, out if rc == OK else None)
    return rc


def cmd_split_iso(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    _, d = _obj(doc, args.object, ("morphism",), GeomMorphism)
    _, e = _obj(doc, args.inverse, ("morphism",), GeomMorphism)
    V = _region(doc, args.region)
    try:
        res = split_isomorphism(d, e, V, args.eps)
    except ControlFailure as exc:
        _fail(f"split failed: {exc}")
        return STAGE_FAILED
    print(f"elementary moves {len(res.ops)}, split pairs {len(res.pairs)}")
    print(res.ledger.table())
    rc = _report_verdicts([("split isomorphism", check_split_iso(res))])
    out = _result_doc(doc, f"split of a controlled isomorphism at eps {args.eps}")
    for key in ("H", "H_inv", "Hp", "Hp_inv", "conjugated"):
        out.add(key, getattr(res, key))
    _emit(args, out if rc == OK else None)
    return rc


def _run_split(args):
    doc = WorkbenchDocument.load(args.file)
    name, Q = _obj(doc, args.object, ("quadratic",), QuadraticComplex)
    W = _region(doc, args.region)
    pcert = None
    if args.poincare_budget is not None:
        # duality certified separately, so a too-small eps surfaces as a stage failure
        pcert = is_poincare(Q, args.poincare_budget)
    return doc, name, Q, W, split_poincare_complex(Q, W, args.eps, budget=args.budget, poincare_cert=pcert)


def cmd_split_complex(args) -> int:
    try:
        doc, name, Q, W, res = _run_split(args)
    except StageFailure as exc:
        print(exc.ledger.table())
        _fail(str(exc))
        return STAGE_FAILED
    print(res.ledger.table())
    print(f"stages {len(res.ledger.entries)}")
    rc = _report_verdicts([("split", check_split_result(Q, W, args.eps, res))])
    out = _result_doc(doc, f"{name} split along a region at eps {args.eps}")
    out.add("D_prime", res.D_prime)
    out.add("D_doubleprime", res.D_doubleprime)
    out.add("C", res.C)
    out.add("union", res.union)
    out.add("equivalence", res.cert)
    _emit(args, out if rc == OK else None)
    return rc


def cmd_ledger(args) -> int:
    try:
        _, _, _, _, res = _run_split(args)
    except StageFailure as exc:
        print(exc.ledger.table())
        _fail(str(exc))
        return STAGE_FAILED
    print(res.ledger.table())
    return OK


def cmd_assemble(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    name, Z = _obj(doc, args.object, ("cycle",), PoincareCycle)
    problems = check_cycle(Z)
    if problems:
        return _report_verdicts([("cycle", problems)])
    Q = assemble(Z)
    print(f"assembled {name}: {describe(Q)}")
    print(f"largest simplex image diameter {Z.base.max_diameter()}")
    rc = _report_verdicts([("assembled complex", list(check_quadratic(Q).problems))])
    out = _result_doc(doc, f"assembly of {name}")
    out.add("assembled", Q)
    _emit(args, out if rc == OK else None)
    return rc


def cmd_subdivide(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    name, Z = _obj(doc, args.object, ("cycle",), PoincareCycle)
    Zs = subdivide(Z)
    cert = subdivision_certificate(Z, Zs)
    print(f"subdivided {name}: {len(Zs.base.tops())} top simplices, largest image diameter {Zs.base.max_diameter()}")
    print(f"certificate radius {cert.bound}")
    rc = _report_verdicts([("subdivided cycle", check_cycle(Zs)),
                           ("subdivision certificate", list(verify_equivalence(cert).problems))])
    out = _result_doc(doc, f"subdivision of {name}")
    out.add("subdivided", Zs)
    out.add("subdivision_certificate", cert)
    _emit(args, out if rc == OK else None)
    return rc


def cmd_invariants(args) -> int:
    doc = WorkbenchDocument.load(args.file)
    names = [args.object] if args.object else [n for n in doc.names if doc.kind(n) in ("form", "quadratic")]
    if not names:
        raise UsageError("no forms or quadratic complexes in the document")
    for name in names:
        obj = doc.get(name)
        if isinstance(obj, QuadraticComplex):
            try:
                obj = middle_form(obj)
            except ValueError as exc:
                print(f"{name}: no middle form ({exc})")
                continue
        if not isinstance(obj, QuadraticForm):
            raise UsageError(f"object {name!r} is neither a form nor a quadratic complex")
        parts = [f"rank {obj.rank}"]
        for label, fn in (("signature", signature), ("arf", arf)):
            try:
                parts.append(f"{label} {fn(obj)}")
            except ValueError as exc:
                parts.append(f"{label} undefined ({exc})")
        print(f"{name}: " + ", ".join(parts))
    return OK


def _space_from(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "circle":
            return circle_space(int(arg))
        if kind == "line":
            return uniform_line(int(arg), Fraction(1, int(arg)))
    except ValueError:
        pass
    raise UsageError(f"space {text!r} should be circle:N or line:N")


def _pairs(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            k, v = part.split(":")
            out[int(k)] = int(v)
        except ValueError:
            raise UsageError(f"ranks {text!r} should look like 0:2,1:4") from None
    return out


def cmd_generate(args) -> int:
    if args.file:
        doc = WorkbenchDocument.load(args.file)
        _, spec = _obj(doc, args.object, ("generator",), GeneratorSpec)
        space = doc.space
    else:
        if args.seed is None or args.n is None:
            raise UsageError("generate needs either a document with a generator object or --seed and --n")
        space = _space_from(args.space)
        forms = tuple(f for f in (args.forms or "").split(",") if f)
        points = tuple(_index_list(args.form_points)) if args.form_points else ()
        spec = GeneratorSpec(args.seed, args.n, _pairs(args.ranks or ""), forms, args.radius, form_points=points)
    Q = generate_poincare(spec, space)
    # the document itself may be going to stdout
    status = sys.stdout if args.out else sys.stderr
    print(f"generated: {describe(Q)}", file=status)
    problems = list(check_quadratic(Q).problems)
    try:
        cert = is_poincare(Q, 4 * Q.radius)
        problems += list(verify_equivalence(cert).problems)
    except ControlFailure as exc:
        problems.append(f"not certified Poincaré: {exc}")
    rc = _report_verdicts([("generated complex", problems)], status)
    out = WorkbenchDocument.new(space, [f"generated from seed {spec.seed}"])
    out.add("spec", spec)
    out.add("Q", Q)
    if rc == OK:
        out.add("Q_duality", cert)
    if args.out:
        _emit(args, out if rc == OK else None)
    elif rc == OK:
        sys.stdout.write(out.text())
    return rc


def cmd_selftest(args) -> int:
    from .selftest import load_manifest, run_selftest
    manifest = load_manifest(args.manifest, quick=args.quick)
    only = {int(x) for x in args.only.split(",")} if args.only else None
    passed, report = run_selftest(manifest, only)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report)
    sys.stdout.write(report)
    return OK if passed else VERIFY_FAILED


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctrlsurg", description="Controlled quadratic complexes: verify, split, assemble.")
    sub = p.add_subparsers(dest="command", required=True)

    def doc_cmd(name, fn, help_, obj=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file", help="workbench document")
        if obj:
            sp.add_argument("--object", help="object name (default: first suitable object)")
        sp.set_defaults(fn=fn)
        return sp

    sp = doc_cmd("check", cmd_check, "re-verify every object in a document", obj=False)
    sp.add_argument("--canonical", action="store_true", help="also require the file to be in canonical form")
    doc_cmd("radius", cmd_radius, "print radii of objects")
    sp = doc_cmd("boundary", cmd_boundary, "algebraic boundary of a quadratic complex")
    sp.add_argument("--budget", type=rational, help="also certify the boundary as Poincaré within this radius")
    sp.add_argument("--out")
    sp = doc_cmd("fold", cmd_fold, "fold a complex to two adjacent degrees over a region")
    sp.add_argument("--degree", type=int, required=True, help="upper degree j of the pair (j-1, j)")
    sp.add_argument("--region", help="region object name or point indices (default: everything)")
    sp.add_argument("--budget", type=rational)
    sp.add_argument("--out")
    sp = doc_cmd("split-iso", cmd_split_iso, "split a controlled isomorphism by elementary moves")
    sp.add_argument("--inverse", required=True, help="name of the inverse certificate morphism")
    sp.add_argument("--region", required=True)
    sp.add_argument("--eps", type=rational, required=True)
    sp.add_argument("--out")
    for name, fn, help_ in (("split-complex", cmd_split_complex, "split a Poincaré complex along a region"),
                            ("ledger", cmd_ledger, "print the control ledger of a split")):
        sp = doc_cmd(name, fn, help_)
        sp.add_argument("--region", required=True)
        sp.add_argument("--eps", type=rational, required=True)
        sp.add_argument("--budget", type=rational)
        sp.add_argument("--poincare-budget", type=rational,
                        help="certify duality within this radius instead of eps")
        if name == "split-complex":
            sp.add_argument("--out")
    sp = doc_cmd("assemble", cmd_assemble, "assemble a simplicial Poincaré cycle")
    sp.add_argument("--out")
    sp = doc_cmd("subdivide", cmd_subdivide, "bisect every edge of a one-dimensional cycle")
    sp.add_argument("--out")
    doc_cmd("invariants", cmd_invariants, "signature and Arf invariant of forms")
    sp = sub.add_parser("generate", help="deterministic random Poincaré complex")
    sp.add_argument("file", nargs="?", help="document holding a generator object")
    sp.add_argument("--object")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--ranks", help="degree:rank list, e.g. 0:2,1:4,2:2")
    sp.add_argument("--forms", help="comma separated form names (H, H1, E8)")
    sp.add_argument("--form-points", help="point index per form, e.g. 0-7 or 0,3,3")
    sp.add_argument("--radius", type=rational, default=Fraction(0))
    sp.add_argument("--space", default="circle:16", help="circle:N or line:N")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_generate)
    sp = sub.add_parser("selftest", help="run the acceptance corpus from a manifest")
    sp.add_argument("--manifest", help="manifest file (default: the shipped one)")
    sp.add_argument("--quick", action="store_true", help="use the shipped reduced manifest")
    sp.add_argument("--only", help="comma separated criterion numbers")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.fn(args)
    except (UsageError, DocumentError) as exc:
        _fail(f"error: {exc}")
        return USAGE
    except OSError as exc:
        _fail(f"error: {exc}")
        return USAGE
    except ControlFailure as exc:
        _fail(f"stage failure: {exc}")
        return STAGE_FAILED
    except ValueError as exc:
        _fail(f"error: {exc}")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
