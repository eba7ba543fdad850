"""Shipped example documents and the code that regenerates them byte for byte."""
from __future__ import annotations

from fractions import Fraction
from importlib import resources

from .assembly import bisectable_loop_cycle
from .control_space import circle_space
from .generator import GeneratorSpec, generate_poincare
from .quadratic_structures import e8_form, form_complex, hyperbolic_form, is_poincare, surger_below_middle
from .workbench import WorkbenchDocument, canonical_text

CIRCLE_SPLIT_SPEC = GeneratorSpec(0, 0, {0: 16}, ("H",) * 8, Fraction(1, 8), form_points=tuple(range(8)))


def build_fixtures() -> dict[str, str]:
    """name -> canonical text of every shipped document."""
    out = {}

    B16 = circle_space(16)
    doc = WorkbenchDocument.new(B16, ["generated complex with its duality certificate and a surgery bordism"])
    spec = GeneratorSpec(7, 2, {0: 1, 1: 4, 2: 1}, ("H",), Fraction(1, 16))
    Q = generate_poincare(spec, B16)
    doc.add("spec", spec)
    doc.add("Q", Q)
    doc.add("Q_duality", is_poincare(Q, Fraction(1, 4)))
    Qs, bord = surger_below_middle(Q, Fraction(1, 2))
    doc.add("Q_surgered", Qs)
    doc.add("Q_bordism", bord)
    doc.add("W", B16.region(range(8)))
    out["valid_document"] = canonical_text(doc.raw)

    doc = WorkbenchDocument.new(circle_space(1), ["the E8 form and a hyperbolic plane"])
    doc.add("E8", e8_form())
    doc.add("H", hyperbolic_form())
    out["e8_form"] = canonical_text(doc.raw)

    B8 = circle_space(8)
    doc = WorkbenchDocument.new(B8, ["eight hyperbolic planes, one per point, spread to radius 1/8"])
    doc.add("spec", CIRCLE_SPLIT_SPEC)
    doc.add("Q", generate_poincare(CIRCLE_SPLIT_SPEC, B8))
    doc.add("W", B8.region(range(5)))
    out["circle_split"] = canonical_text(doc.raw)

    doc = WorkbenchDocument.new(B16, ["loop of eight edges carrying a hyperbolic plane, with halves for bisection"])
    doc.add("Z", bisectable_loop_cycle(B16, list(range(0, 16, 2)), form_complex(hyperbolic_form(), B16)))
    doc.add("W", B16.region(range(8)))
    out["circle_cycle"] = canonical_text(doc.raw)
    return out


def fixture_names() -> list[str]:
    files = resources.files("ctrlsurg.data")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json") and not p.name.startswith("manifest"))


def fixture_text(name: str) -> str:
    return resources.files("ctrlsurg.data").joinpath(name + ".json").read_text(encoding="utf-8")


def fixture_path(name: str) -> str:
    return str(resources.files("ctrlsurg.data").joinpath(name + ".json"))


def fixture(name: str) -> WorkbenchDocument:
    return WorkbenchDocument.parse(fixture_text(name))


def write_fixtures(directory) -> list[str]:
    import os
    written = []
    for name, text in build_fixtures().items():
        path = os.path.join(directory, name + ".json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)
    return written
