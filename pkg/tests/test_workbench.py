from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ctrlsurg.chain_complexes import identity_certificate
from ctrlsurg.control_space import circle_space, uniform_line
from ctrlsurg.fixtures import build_fixtures, fixture, fixture_names, fixture_text
from ctrlsurg.generator import GeneratorSpec, corpus_spec, generate_poincare, random_isomorphism_instance
from ctrlsurg.quadratic_structures import is_poincare, product_bordism, thickening_pair
from ctrlsurg.workbench import (
    DocumentError,
    WorkbenchDocument,
    canonical_text,
    encode,
    verify_document,
)


def test_shipped_fixtures_are_reproducible():
    built = build_fixtures()
    assert sorted(built) == fixture_names()
    for name, text in built.items():
        assert fixture_text(name) == text, name


@pytest.mark.parametrize("name", fixture_names())
def test_fixture_round_trip_is_byte_identical(name):
    text = fixture_text(name)
    doc = WorkbenchDocument.parse(text)
    assert doc.text() == text
    assert WorkbenchDocument.parse(text.encode("utf-8")).text() == text
    # decoding and re-encoding every object reproduces the stored tree
    for obj in doc.names:
        assert encode(doc.get(obj)) == doc.raw["objects"][obj], obj


@pytest.mark.parametrize("name", fixture_names())
def test_fixtures_verify(name):
    verdicts = verify_document(fixture(name))
    assert verdicts and all(verdicts.values()), {k: v.problems for k, v in verdicts.items() if not v}


def test_canonical_text_shape():
    text = canonical_text({"b": "1", "a": ["é"]})
    assert text == '{\n "a": [\n  "é"\n ],\n "b": "1"\n}\n'


@given(st.integers(0, 10**6))
def test_generated_objects_survive_a_round_trip(seed):
    rng = random.Random(seed)
    B = circle_space(rng.randint(4, 10))
    Q = generate_poincare(corpus_spec(seed, Fraction(1, len(B)), max_rank=4), B)
    doc = WorkbenchDocument.new(B, [f"seed {seed}"])
    doc.add("Q", Q)
    doc.add("cert", identity_certificate(Q.C))
    doc.add("pair", thickening_pair(Q))
    doc.add("bordism", product_bordism(Q))
    V = B.region([0])
    d, _ = random_isomorphism_instance(seed, B, V, Fraction(1, len(B)))
    doc.add("d", d)
    doc.add("V", V)
    text = doc.text()
    again = WorkbenchDocument.parse(text)
    assert again.text() == text
    for name in doc.names:
        assert encode(again.get(name)) == doc.raw["objects"][name]


def test_certificates_round_trip():
    doc = fixture("valid_document")
    cert = is_poincare(doc.get("Q"), Fraction(1, 4))
    fresh = WorkbenchDocument.new(doc.space)
    fresh.add("c", cert)
    assert encode(WorkbenchDocument.parse(fresh.text()).get("c")) == encode(cert)


def test_references_resolve_and_cycles_are_caught():
    doc = fixture("circle_split")
    doc.add("alias", {"ref": "W"})
    assert doc.get("alias").members == doc.get("W").members
    doc.add("loop_a", {"ref": "loop_b"})
    doc.add("loop_b", {"ref": "loop_a"})
    with pytest.raises(DocumentError, match="cycle"):
        doc.get("loop_a")
    doc.add("dangling", {"ref": "nothing"})
    with pytest.raises(DocumentError, match="no object"):
        doc.get("dangling")


def broken(mutate):
    raw = json.loads(fixture_text("circle_split"))
    mutate(raw)
    return json.dumps(raw)


@pytest.mark.parametrize("text, match", [
    ("{", "invalid JSON"),
    ('{"format": "other"}', "not a ctrlsurg-workbench"),
    (broken(lambda r: r.update(version="2")), "version"),
    (broken(lambda r: r.update(extra=1)), "unknown document fields"),
    (broken(lambda r: r.pop("objects")), "objects"),
], ids=["truncated", "foreign-format", "version", "extra-field", "no-objects"])
def test_malformed_documents_are_rejected(text, match):
    with pytest.raises(DocumentError, match=match):
        WorkbenchDocument.parse(text)


def test_non_utf8_bytes_are_rejected():
    with pytest.raises(DocumentError, match="UTF-8"):
        WorkbenchDocument.parse(b"\xff\xfe")


def test_object_level_errors_name_the_problem():
    raw = json.loads(fixture_text("circle_split"))
    raw["objects"]["W"]["members"][0] = 0
    doc = WorkbenchDocument(raw)
    with pytest.raises(DocumentError, match="decimal strings"):
        doc.get("W")
    raw["objects"]["odd"] = {"kind": "teapot"}
    with pytest.raises(DocumentError, match="unknown kind"):
        doc.get("odd")
    raw["objects"]["frac"] = {"kind": "region", "members": ["1.5"]}
    with pytest.raises(DocumentError, match="decimal integer"):
        doc.get("frac")
    verdicts = verify_document(doc)
    assert not verdicts["odd"]


def test_bad_metric_is_reported():
    doc = WorkbenchDocument.new(uniform_line(2))
    doc.raw["space"] = {"points": ["a", "b"], "dist": [["0", "1"], ["2", "0"]]}
    doc._space = None
    assert not verify_document(doc)["<space>"]


def test_compact_space_descriptions():
    doc = WorkbenchDocument.new(uniform_line(1))
    doc.raw["space"] = {"circle": "8"}
    doc._space = None
    assert doc.space == circle_space(8)
    doc.raw["space"] = {"line": ["0", "1/2"]}
    doc._space = None
    assert doc.space.d(0, 1) == Fraction(1, 2)


def test_generator_spec_round_trip():
    spec = GeneratorSpec(7, 2, {0: 1, 1: 4, 2: 1}, ("H",), Fraction(1, 16), form_points=(3,))
    doc = WorkbenchDocument.new(circle_space(16))
    doc.add("spec", spec)
    back = WorkbenchDocument.parse(doc.text()).get("spec")
    assert back == spec
