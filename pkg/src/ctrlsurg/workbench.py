"""Workbench documents: canonical JSON text holding a control space and named objects.

Rationals are written as "p/q" strings and every integer (degrees, locations,
matrix entries) as a decimal string, so files stay exact in any language.
A document keeps its parsed JSON tree; objects are decoded on demand, and
`{"ref": name}` anywhere an object is expected points at another entry.
Printing is `json.dumps(sort_keys=True, indent=1)` plus a newline, hence
parse followed by print reproduces a canonical file byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from . import intmat as im
from .assembly import PoincareCycle, SimplicialBase, check_cycle
from .chain_complexes import (
    ChainHomotopy,
    ChainMap,
    EquivalenceCertificate,
    GeomChainComplex,
    Verdict,
    check_chain_map,
    check_complex,
    compose_maps,
    identity_map,
    verify_equivalence,
)
from .control_space import ControlSpace, Region, as_rational, circle_space, line_space, verify_metric
from .generator import GeneratorSpec
from .geometric_algebra import GeomModule, GeomMorphism, radius
from .quadratic_structures import (
    BordismCertificate,
    QuadraticComplex,
    QuadraticForm,
    QuadraticPair,
    check_pair,
    check_quadratic,
    verify_bordism,
)

FORMAT = "ctrlsurg-workbench"
VERSION = "1"


class DocumentError(ValueError):
    """Malformed document: bad JSON, unknown kind, dangling reference or inconsistent data."""


def canonical_text(raw: Any) -> str:
    return json.dumps(raw, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------- scalars

def _int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, str):
        raise DocumentError(f"integers are stored as decimal strings, got {x!r}")
    try:
        return int(x, 10)
    except ValueError:
        raise DocumentError(f"not a decimal integer: {x!r}") from None


def _rat(x) -> Fraction:
    if not isinstance(x, str):
        raise DocumentError(f"rationals are stored as 'p/q' strings, got {x!r}")
    try:
        return as_rational(x)
    except (ValueError, ZeroDivisionError):
        raise DocumentError(f"not a rational: {x!r}") from None


def _entries(m: np.ndarray) -> list:
    rows, cols = np.nonzero(m != 0) if m.size else ((), ())
    return [[str(int(i)), str(int(j)), str(int(m[i, j]))] for i, j in zip(rows, cols)]


def _matrix(raw, shape) -> np.ndarray:
    m = im.zeros(*shape)
    seen = set()
    for e in raw:
        if not (isinstance(e, list) and len(e) == 3):
            raise DocumentError(f"matrix entry must be [row, column, value], got {e!r}")
        i, j, v = (_int(x) for x in e)
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise DocumentError(f"entry ({i},{j}) outside a {shape[0]}x{shape[1]} matrix")
        if (i, j) in seen:
            raise DocumentError(f"entry ({i},{j}) given twice")
        seen.add((i, j))
        m[i, j] = v
    return m


def _graded(comps: Mapping[int, np.ndarray]) -> dict:
    return {str(r): _entries(m) for r, m in sorted(comps.items()) if m.size and not im.is_zero(m)}


def _elem_key(q: int, p: int) -> str:
    return f"{q},{p}"


def _simplex_key(s) -> str:
    return ",".join(str(v) for v in s)


def _parse_simplex(key: str) -> tuple:
    try:
        return tuple(sorted(int(v) for v in key.split(",")))
    except ValueError:
        raise DocumentError(f"bad simplex key {key!r}") from None


# ---------------------------------------------------------------- encoding

def encode_space(space: ControlSpace) -> dict:
    return {"points": list(space.points), "dist": [[str(v) for v in row] for row in space.dist]}


def encode(obj) -> dict:
    """Inline JSON tree for a library object."""
    if isinstance(obj, Region):
        return {"kind": "region", "members": [str(m) for m in sorted(obj.members)]}
    if isinstance(obj, GeomModule):
        return {"kind": "module", "basis": [[lab, str(loc)] for lab, loc in obj.basis]}
    if isinstance(obj, GeomMorphism):
        return {"kind": "morphism", "source": encode(obj.source), "target": encode(obj.target),
                "entries": _entries(obj.matrix)}
    if isinstance(obj, GeomChainComplex):
        return {"kind": "complex", "lo": str(obj.lo), "modules": [encode(m)["basis"] for m in obj.modules],
                "diffs": _graded(obj.diffs)}
    if isinstance(obj, ChainMap):
        return {"kind": "chain_map", "source": encode(obj.source), "target": encode(obj.target),
                "comps": _graded(obj.comps)}
    if isinstance(obj, EquivalenceCertificate):
        return {"kind": "certificate", "source": encode(obj.source), "target": encode(obj.target),
                "forward": _graded(obj.forward.comps), "backward": _graded(obj.backward.comps),
                "homotopy_fg": _graded(obj.homotopy_fg.comps), "homotopy_gf": _graded(obj.homotopy_gf.comps),
                "bound": str(obj.bound)}
    if isinstance(obj, QuadraticComplex):
        return {"kind": "quadratic", "n": str(obj.n), "complex": encode(obj.C), "psi": _structure(obj.psi)}
    if isinstance(obj, QuadraticPair):
        return {"kind": "pair", "boundary": encode(obj.boundary), "target": encode(obj.D),
                "map": _graded(obj.f.comps), "delta_psi": _structure(obj.delta_psi)}
    if isinstance(obj, QuadraticForm):
        return {"kind": "form", "n": str(obj.n), "location": str(obj.location),
                "matrix": [[str(v) for v in row] for row in obj.matrix]}
    if isinstance(obj, BordismCertificate):
        return {"kind": "bordism", "left": encode(obj.left), "right": encode(obj.right),
                "pair": encode(obj.pair), "radius": str(obj.radius)}
    if isinstance(obj, PoincareCycle):
        b = obj.base
        raw = {"kind": "cycle", "n": str(obj.n),
               "simplices": [[str(v) for v in s] for s in b.simplices],
               "image": {_simplex_key(s): [str(x) for x in sorted(r.members)] for s, r in b.image.items()},
               "orientation": {_simplex_key(s): str(v) for s, v in sorted(b.orientation.items())},
               "pieces": {_simplex_key(s): encode(P) for s, P in obj.pieces.items()},
               "faces": {_simplex_key(s): encode(Q) for s, Q in obj.faces.items()}}
        if obj.halves:
            raw["halves"] = {_simplex_key(s): {"left": encode(l), "right": encode(r), "middle": encode(m)}
                             for s, (l, r, m) in obj.halves.items()}
        if obj.refines:
            raw["refines"] = {_simplex_key(s): {"left": _simplex_key(l), "right": _simplex_key(r), "vertex": _simplex_key(v)}
                              for s, (l, r, v) in obj.refines.items()}
        return raw
    if isinstance(obj, GeneratorSpec):
        return {"kind": "generator", "seed": str(obj.seed), "n": str(obj.n),
                "ranks": {str(r): str(v) for r, v in sorted(obj.ranks.items())},
                "forms": list(obj.forms), "target_radius": str(obj.target_radius),
                "steps": str(obj.steps), "noise": str(obj.noise),
                "form_points": [str(x) for x in obj.form_points]}
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _structure(psi) -> list:
    return [{_elem_key(q, p): _entries(m) for (q, p), m in sorted(e.items()) if not im.is_zero(m)} for e in psi]


# ---------------------------------------------------------------- the document

@dataclass(eq=False)
class WorkbenchDocument:
    raw: dict
    _space: ControlSpace | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    # construction -------------------------------------------------------
    @classmethod
    def new(cls, space: ControlSpace, notes=()) -> "WorkbenchDocument":
        raw = {"format": FORMAT, "version": VERSION, "space": encode_space(space), "objects": {},
               "notes": list(notes)}
        return cls(raw, space)

    @classmethod
    def parse(cls, text: str | bytes) -> "WorkbenchDocument":
        if isinstance(text, bytes):
            try:
                text = text.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DocumentError(f"document is not UTF-8: {exc}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict) or raw.get("format") != FORMAT:
            raise DocumentError(f"not a {FORMAT} document")
        if raw.get("version") != VERSION:
            raise DocumentError(f"unsupported version {raw.get('version')!r}")
        for key, typ in (("space", dict), ("objects", dict), ("notes", list)):
            if not isinstance(raw.get(key), typ):
                raise DocumentError(f"document field {key!r} is missing or has the wrong type")
        extra = set(raw) - {"format", "version", "space", "objects", "notes"}
        if extra:
            raise DocumentError(f"unknown document fields {sorted(extra)}")
        return cls(raw)

    @classmethod
    def load(cls, path) -> "WorkbenchDocument":
        with open(path, "rb") as fh:
            return cls.parse(fh.read())

    def text(self) -> str:
        return canonical_text(self.raw)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())

    def add(self, name: str, obj) -> None:
        self.raw["objects"][name] = obj if isinstance(obj, dict) else encode(obj)
        self._cache.pop(name, None)

    def note(self, line: str) -> None:
        self.raw["notes"].append(line)

    @property
    def names(self) -> list[str]:
        return sorted(self.raw["objects"])

    def kind(self, name: str) -> str:
        return self._lookup(name).get("kind", "?")

    # decoding -----------------------------------------------------------
    @property
    def space(self) -> ControlSpace:
        if self._space is None:
            self._space = _decode_space(self.raw["space"])
        return self._space

    def get(self, name: str):
        if name not in self._cache:
            self._cache[name] = _Decoder(self).obj(self._lookup(name), (name,))
        return self._cache[name]

    def _lookup(self, name: str) -> dict:
        objs = self.raw["objects"]
        if name not in objs:
            raise DocumentError(f"no object named {name!r}")
        raw = objs[name]
        if not isinstance(raw, dict):
            raise DocumentError(f"object {name!r} is not a JSON object")
        return raw

    def first_of(self, *kinds: str) -> str:
        for name in self.names:
            if self.kind(name) in kinds:
                return name
        raise DocumentError(f"document holds no object of kind {' or '.join(kinds)}")


def _decode_space(raw: dict) -> ControlSpace:
    if "circle" in raw:
        return circle_space(_int(raw["circle"]), _rat(raw.get("circumference", "1")))
    if "line" in raw:
        return line_space([_rat(x) for x in raw["line"]])
    try:
        space = ControlSpace(tuple(raw["points"]), tuple(tuple(_rat(v) for v in row) for row in raw["dist"]))
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"bad control space: {exc}") from None
    except ValueError as exc:
        raise DocumentError(f"bad control space: {exc}") from None
    return space


class _Decoder:
    def __init__(self, doc: WorkbenchDocument):
        self.doc = doc
        self.space = doc.space

    def obj(self, raw, trail: tuple):
        if isinstance(raw, dict) and set(raw) == {"ref"}:
            name = raw["ref"]
            if name in trail:
                raise DocumentError(f"reference cycle through {name!r}")
            if name in self.doc._cache:
                return self.doc._cache[name]
            val = self.obj(self.doc._lookup(name), trail + (name,))
            self.doc._cache[name] = val
            return val
        if not isinstance(raw, dict) or "kind" not in raw:
            raise DocumentError(f"expected an object with a kind at {'/'.join(trail)}")
        kind = raw["kind"]
        fn = getattr(self, "_" + kind, None)
        if fn is None:
            raise DocumentError(f"unknown kind {kind!r} at {'/'.join(trail)}")
        try:
            return fn(raw, trail)
        except DocumentError:
            raise
        except (KeyError, TypeError) as exc:
            raise DocumentError(f"{kind} at {'/'.join(trail)} is missing or mistypes {exc}") from None
        except ValueError as exc:
            raise DocumentError(f"{kind} at {'/'.join(trail)}: {exc}") from None

    def typed(self, raw, trail, cls):
        val = self.obj(raw, trail)
        if not isinstance(val, cls):
            raise DocumentError(f"{'/'.join(trail)} should be a {cls.__name__}, got {type(val).__name__}")
        return val

    def _region(self, raw, trail):
        return self.space.region(_int(x) for x in raw["members"])

    def _basis(self, raw):
        return GeomModule(self.space, tuple((lab, _int(loc)) for lab, loc in raw))

    def _module(self, raw, trail):
        return self._basis(raw["basis"])

    def _morphism(self, raw, trail):
        src = self.typed(raw["source"], trail + ("source",), GeomModule)
        tgt = self.typed(raw["target"], trail + ("target",), GeomModule)
        return GeomMorphism(src, tgt, _matrix(raw["entries"], (tgt.rank, src.rank)))

    def _complex(self, raw, trail):
        lo = _int(raw["lo"])
        mods = tuple(self._basis(b) for b in raw["modules"])
        ranks = {lo + i: m.rank for i, m in enumerate(mods)}
        diffs = {}
        for key, ents in raw["diffs"].items():
            r = _int(key)
            if r not in ranks or r - 1 not in ranks:
                raise DocumentError(f"differential in degree {r} outside the module range")
            diffs[r] = _matrix(ents, (ranks[r - 1], ranks[r]))
        return GeomChainComplex(self.space, lo, mods, diffs)

    def _comps(self, raw, src: GeomChainComplex, tgt: GeomChainComplex, deg: int):
        out = {}
        for key, ents in raw.items():
            r = _int(key)
            out[r] = _matrix(ents, (tgt.rank(r + deg), src.rank(r)))
        return out

    def _chain_map(self, raw, trail):
        src = self.typed(raw["source"], trail + ("source",), GeomChainComplex)
        tgt = self.typed(raw["target"], trail + ("target",), GeomChainComplex)
        return ChainMap(src, tgt, self._comps(raw["comps"], src, tgt, 0))

    def _certificate(self, raw, trail):
        C = self.typed(raw["source"], trail + ("source",), GeomChainComplex)
        D = self.typed(raw["target"], trail + ("target",), GeomChainComplex)
        f = ChainMap(C, D, self._comps(raw["forward"], C, D, 0))
        g = ChainMap(D, C, self._comps(raw["backward"], D, C, 0))
        hfg = ChainHomotopy(compose_maps(f, g), identity_map(D), self._comps(raw["homotopy_fg"], D, D, 1))
        hgf = ChainHomotopy(compose_maps(g, f), identity_map(C), self._comps(raw["homotopy_gf"], C, C, 1))
        return EquivalenceCertificate(f, g, hfg, hgf, _rat(raw["bound"]))

    def _structure(self, raw, C: GeomChainComplex, top: int):
        psi = []
        for s, e in enumerate(raw):
            elem = {}
            for key, ents in e.items():
                try:
                    q, p = (int(x) for x in key.split(","))
                except ValueError:
                    raise DocumentError(f"bad structure component key {key!r}") from None
                elem[(q, p)] = _matrix(ents, (C.rank(q), C.rank(p)))
            psi.append(elem)
        return tuple(psi)

    def _quadratic(self, raw, trail):
        C = self.typed(raw["complex"], trail + ("complex",), GeomChainComplex)
        n = _int(raw["n"])
        return QuadraticComplex(n, C, self._structure(raw["psi"], C, n))

    def _pair(self, raw, trail):
        bd = self.typed(raw["boundary"], trail + ("boundary",), QuadraticComplex)
        D = self.typed(raw["target"], trail + ("target",), GeomChainComplex)
        f = ChainMap(bd.C, D, self._comps(raw["map"], bd.C, D, 0))
        return QuadraticPair(f, self._structure(raw["delta_psi"], D, bd.n + 1), bd)

    def _form(self, raw, trail):
        return QuadraticForm(tuple(tuple(_int(v) for v in row) for row in raw["matrix"]),
                             _int(raw["n"]), _int(raw["location"]))

    def _bordism(self, raw, trail):
        return BordismCertificate(self.typed(raw["left"], trail + ("left",), QuadraticComplex),
                                  self.typed(raw["right"], trail + ("right",), QuadraticComplex),
                                  self.typed(raw["pair"], trail + ("pair",), QuadraticPair),
                                  _rat(raw["radius"]))

    def _cycle(self, raw, trail):
        simplices = [tuple(_int(v) for v in s) for s in raw["simplices"]]
        image = {_parse_simplex(k): self.space.region(_int(x) for x in v) for k, v in raw["image"].items()}
        orient = {_parse_simplex(k): _int(v) for k, v in raw.get("orientation", {}).items()}
        base = SimplicialBase(self.space, tuple(simplices), image, orient)
        pieces = {_parse_simplex(k): self.typed(v, trail + ("pieces", k), QuadraticPair) for k, v in raw["pieces"].items()}
        faces = {_parse_simplex(k): self.typed(v, trail + ("faces", k), QuadraticComplex) for k, v in raw["faces"].items()}
        halves = {}
        for k, v in raw.get("halves", {}).items():
            halves[_parse_simplex(k)] = (self.typed(v["left"], trail + ("halves", k), QuadraticPair),
                                         self.typed(v["right"], trail + ("halves", k), QuadraticPair),
                                         self.typed(v["middle"], trail + ("halves", k), QuadraticComplex))
        refines = {_parse_simplex(k): (_parse_simplex(v["left"]), _parse_simplex(v["right"]), _parse_simplex(v["vertex"]))
                   for k, v in raw.get("refines", {}).items()}
        return PoincareCycle(base, _int(raw["n"]), pieces, faces, halves, refines)

    def _generator(self, raw, trail):
        return GeneratorSpec(_int(raw["seed"]), _int(raw["n"]),
                             {_int(r): _int(v) for r, v in raw.get("ranks", {}).items()},
                             tuple(raw.get("forms", ())), _rat(raw.get("target_radius", "0")),
                             _int(raw.get("steps", "-1")), _int(raw.get("noise", "-1")),
                             tuple(_int(x) for x in raw.get("form_points", ())))


# ---------------------------------------------------------------- verification

def verify_object(obj) -> Verdict:
    """Independent re-verification of one decoded object."""
    if isinstance(obj, (Region, GeomModule, GeneratorSpec)):
        return Verdict.of([])
    if isinstance(obj, GeomMorphism):
        return Verdict.of([])
    if isinstance(obj, GeomChainComplex):
        return check_complex(obj)
    if isinstance(obj, ChainMap):
        return check_chain_map(obj)
    if isinstance(obj, EquivalenceCertificate):
        return verify_equivalence(obj)
    if isinstance(obj, QuadraticComplex):
        return check_quadratic(obj)
    if isinstance(obj, QuadraticPair):
        return check_pair(obj)
    if isinstance(obj, QuadraticForm):
        return Verdict.of([])
    if isinstance(obj, BordismCertificate):
        return verify_bordism(obj, obj.radius)
    if isinstance(obj, PoincareCycle):
        return Verdict.of(check_cycle(obj))
    raise TypeError(f"no verifier for {type(obj).__name__}")


def verify_document(doc: WorkbenchDocument) -> dict[str, Verdict]:
    """Verdict per object name (sorted), after checking the metric and every reference."""
    out = {}
    metric = verify_metric(doc.space)
    if metric:
        out["<space>"] = Verdict.of(metric)
    for name in doc.names:
        try:
            out[name] = verify_object(doc.get(name))
        except DocumentError as exc:
            out[name] = Verdict.of([str(exc)])
    return out


def describe(obj) -> str:
    """One-line summary used by the CLI."""
    if isinstance(obj, GeomMorphism):
        return f"morphism {obj.source.rank} -> {obj.target.rank}, radius {radius(obj)}"
    if isinstance(obj, GeomChainComplex):
        return f"complex degrees {obj.lo}..{obj.hi}, ranks {[obj.rank(r) for r in obj.degrees]}, radius {obj.radius()}"
    if isinstance(obj, QuadraticComplex):
        return f"quadratic complex n={obj.n}, ranks {[obj.C.rank(r) for r in obj.C.degrees]}, radius {obj.radius}"
    if isinstance(obj, QuadraticPair):
        return f"quadratic pair n={obj.n}, radius {obj.radius}"
    return type(obj).__name__
