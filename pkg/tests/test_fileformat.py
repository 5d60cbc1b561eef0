import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optdiscrim import fileformat, scenarios
from optdiscrim.discrimination import solve
from optdiscrim.errors import ParseError, ValidationError

from conftest import DATA

ALL = ["helstrom", "trine", "symmetric-pure(5)", "gbit-square", "classical-random(3,4,7)",
       "classical-cyclic(4)", "bell-measurement", "product-zz"]


@pytest.mark.parametrize("name", ALL)
def test_round_trip_exact(name):
    inst = scenarios.generate_scenario(name)
    text = fileformat.emit(inst)
    back = fileformat.parse_text(text)
    assert fileformat.same_instance(inst, back)
    assert np.array_equal(back.preparation.states, inst.preparation.states)
    assert fileformat.emit(back) == text
    assert fileformat.instance_hash(back) == fileformat.instance_hash(inst)


@settings(max_examples=25, deadline=None)
@given(M=st.integers(1, 4), d=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_round_trip_classical_random(M, d, seed):
    inst = scenarios.classical_random(M, d, seed)
    back = fileformat.parse_text(fileformat.emit(inst))
    assert np.array_equal(back.preparation.states, inst.preparation.states)


def test_trine_fixture_matches_generator():
    inst = fileformat.parse_instance(DATA / "trine.json")
    assert inst.preparation.M == 3 and inst.system.dim == 4
    ref = scenarios.trine()
    assert np.allclose(inst.preparation.states, ref.preparation.states, atol=1e-15)
    assert inst.symmetry.group.order == 3
    assert solve(inst.preparation, setup=inst.symmetry).value == pytest.approx(2 / 3, abs=1e-6)


def test_complex_fixture():
    inst = fileformat.parse_instance(DATA / "symmetric_pure3_complex.json")
    ref = scenarios.symmetric_pure(3)
    assert np.allclose(inst.preparation.states, ref.preparation.states, atol=1e-15)
    assert inst.symmetry.report.valid


def test_generators_fixture_closes_group():
    inst = fileformat.parse_instance(DATA / "helstrom_generators.json")
    assert inst.symmetry.group.order == 2
    assert solve(inst.preparation).value == pytest.approx(0.5 + np.sqrt(2) / 4, abs=1e-9)


def test_bell_fixture():
    inst = fileformat.parse_instance(DATA / "bell.json")
    assert inst.class_tag == "pt"
    assert inst.measurement.effects.shape == (4, 16)
    A, B = fileformat.parties(inst.system)
    assert A.dim == B.dim == 4


def test_empty_file():
    with pytest.raises(ParseError, match="empty"):
        fileformat.parse_instance(DATA / "empty.json")


def test_bad_json_reports_line():
    with pytest.raises(ParseError) as info:
        fileformat.parse_instance(DATA / "bad_json.json")
    assert info.value.line == 4


def test_not_normalized():
    with pytest.raises(ValidationError, match="not normalized") as info:
        fileformat.parse_instance(DATA / "not_normalized.json")
    assert "0.9" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        fileformat.parse_instance(tmp_path / "nope.json")


def _doc(name="trine"):
    return json.loads(fileformat.emit(scenarios.generate_scenario(name)))


@pytest.mark.parametrize(
    "mutate, exc",
    [
        (lambda d: d.update(version=2), ParseError),
        (lambda d: d.pop("model"), ParseError),
        (lambda d: d["model"].update(kind="spin"), ParseError),
        (lambda d: d.update(solver={"colour": 1}), ParseError),
        (lambda d: d["preparation"]["states"].pop(), ValidationError),
        (lambda d: d["symmetry"].update(tau=[[0, 1, 2], [2, 0, 1], [2, 0, 1]]), ValidationError),
        (lambda d: d["preparation"]["states"][0].__setitem__(0, "x"), ParseError),
    ],
)
def test_invalid_documents(mutate, exc):
    d = _doc()
    mutate(d)
    with pytest.raises(exc):
        fileformat.parse_text(json.dumps(d))


def test_bad_class_reconstruction():
    d = _doc("product-zz")
    eff = np.array(d["measurement"]["effects"])
    d["measurement"]["effects"] = eff[[1, 0, 2, 3]].tolist()
    with pytest.raises(ValidationError, match="reproduce"):
        fileformat.parse_text(json.dumps(d))


def test_hash_changes_with_content():
    a = scenarios.classical_random(3, 4, 1)
    b = scenarios.classical_random(3, 4, 2)
    assert fileformat.instance_hash(a) != fileformat.instance_hash(b)
    assert fileformat.instance_hash(a) == fileformat.instance_hash(scenarios.classical_random(3, 4, 1))
