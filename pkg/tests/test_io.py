# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""
Test spec and solution files and the output writers.
"""
import copy
import io
import json

import numpy as np
import pytest

from smgi import SpecFormatError, dump_spec, load_solution, load_spec, save_solution, spec_from_dict
from smgi.io import (
    format_field,
    load_valid_spec,
    read_records,
    spec_digest,
    spec_to_dict,
    write_csv,
    write_json,
    write_records,
)


def test_round_trip(spec_dicts, tmp_path):
    for name, obj in spec_dicts.items():
        spec = spec_from_dict(obj)
        path = str(tmp_path / f"{name}.json")
        dump_spec(spec, path)
        again = load_spec(path)
        assert spec_digest(again) == spec_digest(spec)
        assert np.array_equal(again.cost, spec.cost)
        assert again.transitions == spec.transitions


def test_load_valid_spec(spec_dicts, tmp_path):
    """Probabilities off by less than the tolerance are renormalized on load."""
    obj = copy.deepcopy(spec_dicts["desk"])
    obj["transitions"][0]["branches"][0]["prob"] += 5e-13
    obj["initial_belief"] = [0.5 + 4e-13, 0.5]
    path = tmp_path / "desk.json"
    path.write_text(json.dumps(obj))
    raw = load_spec(str(path))
    assert abs(sum(raw.initial_belief) - 1.0) > 3e-13
    spec = load_valid_spec(str(path))
    assert abs(spec.initial_belief.sum() - 1.0) <= 1e-15
    for branches in spec.transitions.values():
        assert abs(sum(br.prob for br in branches) - 1.0) <= 1e-15
    assert np.array_equal(spec.cost, raw.cost)

    obj["initial_belief"] = [0.7, 0.7]
    path.write_text(json.dumps(obj))
    with pytest.raises(SpecFormatError, match="violations"):
        load_valid_spec(str(path))


def test_digest_sensitive(spec_dicts):
    obj = copy.deepcopy(spec_dicts["desk"])
    base = spec_digest(spec_from_dict(obj))
    obj["cost"][0][0][0][0] = 0.9
    assert spec_digest(spec_from_dict(obj)) != base
    # Record order in the file does not matter.
    obj = copy.deepcopy(spec_dicts["desk"])
    obj["transitions"].reverse()
    assert spec_digest(spec_from_dict(obj)) == base


def test_initial_state(spec_dicts):
    obj = copy.deepcopy(spec_dicts["desk"])
    obj["initial_state"] = "s1"
    spec = spec_from_dict(obj)
    assert spec.initial_state == 1
    assert spec_to_dict(spec)["initial_state"] == "s1"


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda o: o.update(extra=1), "unknown keys"),
        (lambda o: o.pop("alpha"), "missing keys"),
        (lambda o: o.update(alpha="fast"), "alpha"),
        (lambda o: o["transitions"][0].update({"a1": "zz"}), "unknown label 'zz'"),
        (lambda o: o["transitions"].append(copy.deepcopy(o["transitions"][0])), "duplicate"),
        (lambda o: o["transitions"][0]["branches"][0].update(sojourn={"kind": "gamma"}), "not registered"),
        (lambda o: o["transitions"][0]["branches"][0].update(sojourn={"kind": "uniform", "lo": 0.0}), "missing"),
        (lambda o: o["transitions"][0]["branches"][0].update(sojourn=3), "kind"),
        (lambda o: o.update(states="s0"), "labels"),
    ],
)
def test_format_errors(spec_dicts, mutate, match):
    obj = copy.deepcopy(spec_dicts["desk_s1"])
    mutate(obj)
    with pytest.raises(SpecFormatError, match=match):
        spec_from_dict(obj)


def test_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SpecFormatError):
        load_spec(str(path))


def test_solution_file(solved_s1, spec_dicts, tmp_path):
    s = solved_s1
    path = str(tmp_path / "solution.json")
    save_solution(path, s.report, s.spec)
    report = load_solution(path, s.spec)
    assert report.iterations == s.report.iterations
    assert report.stop_tol == s.report.stop_tol
    for p in ([0.5, 0.5], [0.1, 0.9]):
        assert report.envelope.evaluate(p, 0) == s.envelope.evaluate(p, 0)

    # Without a spec the state labels come from the file.
    assert load_solution(path).envelope.n_cuts() == s.envelope.n_cuts()

    with pytest.raises(SpecFormatError, match="solved for spec"):
        load_solution(path, spec_from_dict({**spec_dicts["desk_s1"], "alpha": 2.0}))


def test_format_field():
    assert format_field(0.1) == "0.1"
    assert format_field(np.float64(1.0) / 3.0) == repr(1.0 / 3.0)
    assert format_field(np.array([0.25, 0.75])) == "0.25;0.75"
    assert format_field(3) == "3"
    assert format_field("s0") == "s0"


def test_writers(tmp_path):
    out = io.StringIO()
    write_csv(out, ["state", "value"], [["s0", 0.5], ["s1", np.float64(0.25)]])
    assert out.getvalue() == "state,value\ns0,0.5\ns1,0.25\n"

    out = io.StringIO()
    write_json(out, {"b": np.arange(2), "a": np.float64(0.5)})
    assert json.loads(out.getvalue()) == {"a": 0.5, "b": [0, 1]}
    assert out.getvalue().index('"a"') < out.getvalue().index('"b"')

    path = str(tmp_path / "records.jsonl")
    assert write_records(path, [{"n": 0}, {"n": np.int64(1)}]) == 2
    assert read_records(path) == [{"n": 0}, {"n": 1}]


if __name__ == "__main__":
    pytest.main([__file__])
