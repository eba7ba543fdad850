from __future__ import annotations

import json
from fractions import Fraction

import pytest

from ctrlsurg.cli import main
from ctrlsurg.control_space import uniform_line
from ctrlsurg.fixtures import fixture_text
from ctrlsurg.generator import random_isomorphism_instance
from ctrlsurg.workbench import WorkbenchDocument


@pytest.fixture
def shipped(tmp_path):
    """Copy a shipped fixture into tmp_path and return its path."""
    def put(name):
        path = tmp_path / f"{name}.json"
        path.write_text(fixture_text(name), encoding="utf-8")
        return str(path)
    return put


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_invariants_of_e8(capsys, shipped):
    code, out, _ = run(capsys, "invariants", shipped("e8_form"))
    assert code == 0
    assert "E8: rank 8, signature 8, arf 0" in out


def test_check_fixtures_and_canonical_form(capsys, shipped, tmp_path):
    for name in ("valid_document", "circle_split", "circle_cycle"):
        assert run(capsys, "check", "--canonical", shipped(name))[0] == 0
    # same content, different layout
    p = tmp_path / "loose.json"
    p.write_text(json.dumps(json.loads(fixture_text("e8_form"))), encoding="utf-8")
    assert run(capsys, "check", str(p))[0] == 0
    assert run(capsys, "check", "--canonical", str(p))[0] == 1


def test_corrupted_differential_fails_verification(capsys, tmp_path):
    raw = json.loads(fixture_text("valid_document"))
    # d_1 picks up the generator that d_2 hits, so d_1 d_2 != 0
    raw["objects"]["Q"]["complex"]["diffs"]["1"].append(["0", "3", "1"])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw), encoding="utf-8")
    code, out, _ = run(capsys, "check", str(p))
    assert code == 1


def test_split_complex_on_the_circle(capsys, shipped):
    code, out, _ = run(capsys, "split-complex", shipped("circle_split"), "--region", "W", "--eps", "3/4")
    assert code == 0
    assert "stages 6" in out
    for stage in ("subquotient", "boundary", "contraction", "fold", "split", "delete"):
        assert stage in out


def test_ledger_stage_failure_exits_three(capsys, shipped):
    code, out, err = run(capsys, "ledger", shipped("circle_split"), "--region", "W", "--eps", "1/8",
                         "--poincare-budget", "3/8")
    assert code == 3
    assert "failed" in err


@pytest.mark.parametrize("argv", [
    [],
    ["split-complex", "{f}", "--region", "W", "--eps", "0.75"],
    ["check", "/nonexistent/file.json"],
    ["radius", "{f}", "--object", "missing"],
    ["frobnicate"],
])
def test_usage_errors_exit_two(capsys, shipped, argv):
    f = shipped("circle_split")
    assert run(capsys, *[a.format(f=f) for a in argv])[0] == 2


def test_invalid_json_exits_two(capsys, tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{", encoding="utf-8")
    code, _, err = run(capsys, "check", str(p))
    assert code == 2 and "invalid JSON" in err


def test_generate_to_stdout_is_a_document(capsys):
    code, out, err = run(capsys, "generate", "--seed", "0", "--n", "0", "--ranks", "0:16", "--forms",
                         ",".join(["H"] * 8), "--form-points", "0-7", "--radius", "1/8", "--space", "circle:8")
    assert code == 0
    doc = WorkbenchDocument.parse(out)
    ref = WorkbenchDocument.parse(fixture_text("circle_split"))
    name = next(n for n in doc.names if doc.kind(n) == "quadratic")
    assert doc.raw["objects"][name] == ref.raw["objects"]["Q"]


def test_generate_is_deterministic(capsys, tmp_path):
    argv = ["generate", "--seed", "11", "--n", "2", "--ranks", "0:1,1:4,2:1", "--forms", "H", "--radius", "1/16"]
    outs = []
    for k in range(2):
        p = tmp_path / f"g{k}.json"
        assert run(capsys, *argv, "--out", str(p))[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_split_iso_document(capsys, tmp_path):
    B = uniform_line(24, Fraction(1, 32))
    V = B.region([3, 4])
    d, e = random_isomorphism_instance(2, B, V, Fraction(1, 16))
    doc = WorkbenchDocument.new(B)
    doc.add("d", d)
    doc.add("e", e)
    doc.add("V", V)
    src, dst = tmp_path / "iso.json", tmp_path / "iso_out.json"
    doc.save(src)
    code, out, _ = run(capsys, "split-iso", str(src), "--object", "d", "--inverse", "e", "--region", "V",
                       "--eps", "1/2", "--out", str(dst))
    assert code == 0 and "elementary moves" in out
    assert run(capsys, "check", str(dst))[0] == 0


def test_subdivide_then_assemble(capsys, shipped, tmp_path):
    out = tmp_path / "sub.json"
    assert run(capsys, "subdivide", shipped("circle_cycle"), "--out", str(out))[0] == 0
    assert run(capsys, "check", str(out))[0] == 0
    code, text, _ = run(capsys, "assemble", str(out), "--object", "subdivided")
    assert code == 0


def test_boundary_and_radius(capsys, shipped, tmp_path):
    f = shipped("valid_document")
    code, out, _ = run(capsys, "radius", f)
    assert code == 0 and "Q: 1/16" in out
    b = tmp_path / "b.json"
    assert run(capsys, "boundary", f, "--object", "Q", "--budget", "1/2", "--out", str(b))[0] == 0
    assert run(capsys, "check", str(b))[0] == 0


def test_selftest_subset(capsys):
    code, out, _ = run(capsys, "selftest", "--quick", "--only", "1,9")
    assert code == 0
    assert out.rstrip().endswith("2/2 criteria passed")
