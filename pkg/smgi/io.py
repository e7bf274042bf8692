# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Spec and solution files, and machine-readable output."""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .belief import Belief
from .errors import SpecFormatError
from .logger import get_logger
from .model import Branch, GameSpec, validate_spec
from .sojourn import make_law
from .value import ConcaveEnvelope, SolveReport

logger = get_logger()

REQUIRED_KEYS = (
    "types",
    "states",
    "actions_p1",
    "actions_p2",
    "alpha",
    "initial_belief",
    "cost",
    "transitions",
)
OPTIONAL_KEYS = ("initial_state",)
TRANSITION_KEYS = ("from", "a1", "a2", "branches")
BRANCH_KEYS = ("to", "prob", "sojourn")
SOLUTION_KEYS = (
    "spec_digest",
    "states",
    "cuts",
    "mesh",
    "iterations",
    "beta",
    "tail_bound",
    "sup_change",
    "stop_tol",
)


def _check_keys(obj, required, optional, path):
    if not isinstance(obj, dict):
        raise SpecFormatError(f"{path}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise SpecFormatError(f"{path}: unknown keys {unknown}")
    missing = [key for key in required if key not in obj]
    if missing:
        raise SpecFormatError(f"{path}: missing keys {missing}")


def _labels(obj, name):
    labels = obj[name]
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise SpecFormatError(f"{name}: expected a list of string labels")
    return labels


def _resolve(index, label, path):
    if label not in index:
        raise SpecFormatError(f"{path}: unknown label {label!r}")
    return index[label]


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecFormatError(f"{path}: expected a number, got {value!r}")
    return float(value)


def spec_from_dict(obj: Dict[str, Any]) -> GameSpec:
    """Parse a decoded spec file. Structural problems raise SpecFormatError;
    value-level problems are left to ``validate_spec``."""
    _check_keys(obj, REQUIRED_KEYS, OPTIONAL_KEYS, "spec")
    types = _labels(obj, "types")
    states = _labels(obj, "states")
    actions_p1 = _labels(obj, "actions_p1")
    actions_p2 = _labels(obj, "actions_p2")
    index_s = {label: idx for idx, label in enumerate(states)}
    index_a = {label: idx for idx, label in enumerate(actions_p1)}
    index_b = {label: idx for idx, label in enumerate(actions_p2)}

    alpha = _number(obj["alpha"], "alpha")
    try:
        belief = np.asarray(obj["initial_belief"], dtype=float)
        cost = np.asarray(obj["cost"], dtype=float)
    except (TypeError, ValueError) as err:
        raise SpecFormatError(f"initial_belief/cost: not a numeric array ({err})") from err

    if not isinstance(obj["transitions"], list):
        raise SpecFormatError("transitions: expected a list of records")
    transitions = {}
    for idx, rec in enumerate(obj["transitions"]):
        path = f"transitions[{idx}]"
        _check_keys(rec, TRANSITION_KEYS, (), path)
        key = (
            _resolve(index_s, rec["from"], f"{path}.from"),
            _resolve(index_a, rec["a1"], f"{path}.a1"),
            _resolve(index_b, rec["a2"], f"{path}.a2"),
        )
        if key in transitions:
            raise SpecFormatError(f"{path}: duplicate record for {rec['from'], rec['a1'], rec['a2']}")
        if not isinstance(rec["branches"], list):
            raise SpecFormatError(f"{path}.branches: expected a list")
        branches = []
        for b_idx, br in enumerate(rec["branches"]):
            bpath = f"{path}.branches[{b_idx}]"
            _check_keys(br, BRANCH_KEYS, (), bpath)
            sojourn = br["sojourn"]
            if not isinstance(sojourn, dict) or "kind" not in sojourn:
                raise SpecFormatError(f"{bpath}.sojourn: expected an object with a kind")
            params = {k: v for k, v in sojourn.items() if k != "kind"}
            try:
                law = make_law(sojourn["kind"], **params)
            except (TypeError, ValueError) as err:
                raise SpecFormatError(f"{bpath}.sojourn: {err}") from err
            branches.append(
                Branch(
                    _resolve(index_s, br["to"], f"{bpath}.to"),
                    _number(br["prob"], f"{bpath}.prob"),
                    law,
                )
            )
        transitions[key] = tuple(branches)

    initial_state = 0
    if "initial_state" in obj:
        initial_state = _resolve(index_s, obj["initial_state"], "initial_state")

    return GameSpec(
        types=types,
        states=states,
        actions_p1=actions_p1,
        actions_p2=actions_p2,
        alpha=alpha,
        initial_belief=belief,
        cost=cost,
        transitions=transitions,
        initial_state=initial_state,
    )


def load_spec(path: str) -> GameSpec:
    try:
        with open(path, "r") as filep:
            obj = json.load(filep)
    except json.JSONDecodeError as err:
        raise SpecFormatError(f"{path}: not valid JSON ({err})") from err
    return spec_from_dict(obj)


def load_valid_spec(path: str) -> GameSpec:
    """Load a spec, reject it on any violation, and renormalize the
    probabilities that passed within tolerance."""
    spec = load_spec(path)
    violations = validate_spec(spec)
    if violations:
        raise SpecFormatError(f"{path} has {len(violations)} violations: {violations[0]}")
    return spec.normalized()


def spec_to_dict(spec: GameSpec) -> Dict[str, Any]:
    transitions = []
    for (i, a, b), branches in sorted(spec.transitions.items()):
        transitions.append(
            {
                "from": spec.states[i],
                "a1": spec.actions_p1[a],
                "a2": spec.actions_p2[b],
                "branches": [
                    {"to": spec.states[br.to], "prob": br.prob, "sojourn": br.law.to_dict()}
                    for br in branches
                ],
            }
        )
    return {
        "types": list(spec.types),
        "states": list(spec.states),
        "actions_p1": list(spec.actions_p1),
        "actions_p2": list(spec.actions_p2),
        "alpha": spec.alpha,
        "initial_belief": spec.initial_belief.tolist(),
        "cost": spec.cost.tolist(),
        "transitions": transitions,
        "initial_state": spec.states[spec.initial_state],
    }


def dump_spec(spec: GameSpec, path: str):
    with open(path, "w") as filep:
        json.dump(spec_to_dict(spec), filep, indent=2)


def spec_digest(spec: GameSpec) -> str:
    """sha256 of the canonical JSON encoding."""
    text = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_solution(path: str, report: SolveReport, spec: GameSpec):
    obj = {
        "spec_digest": spec_digest(spec),
        "states": list(spec.states),
        "cuts": {label: report.envelope.cuts[j].tolist() for j, label in enumerate(spec.states)},
        "mesh": report.mesh,
        "iterations": report.iterations,
        "beta": report.beta,
        "tail_bound": report.tail_bound,
        "sup_change": report.sup_change,
        "stop_tol": report.stop_tol,
    }
    with open(path, "w") as filep:
        json.dump(obj, filep, indent=2)
    logger.info(f"Solution with {report.n_cuts} cuts saved to {path}")


def load_solution(path: str, spec: Optional[GameSpec] = None) -> SolveReport:
    """Read a solution file; with a spec, its digest must match the file's."""
    try:
        with open(path, "r") as filep:
            obj = json.load(filep)
    except json.JSONDecodeError as err:
        raise SpecFormatError(f"{path}: not valid JSON ({err})") from err
    _check_keys(obj, SOLUTION_KEYS, (), "solution")
    if spec is not None and obj["spec_digest"] != spec_digest(spec):
        raise SpecFormatError(
            f"{path} was solved for spec {obj['spec_digest'][:12]}, "
            f"not {spec_digest(spec)[:12]}"
        )
    labels = list(spec.states) if spec is not None else obj["states"]
    try:
        envelope = ConcaveEnvelope(tuple(np.asarray(obj["cuts"][label], dtype=float) for label in labels))
    except (KeyError, TypeError, ValueError) as err:
        raise SpecFormatError(f"{path}: malformed cuts ({err})") from err
    return SolveReport(
        envelope=envelope,
        mesh=int(obj["mesh"]),
        iterations=int(obj["iterations"]),
        beta=float(obj["beta"]),
        tail_bound=float(obj["tail_bound"]),
        sup_change=float(obj["sup_change"]),
        stop_tol=float(obj["stop_tol"]),
        n_cuts=envelope.n_cuts(),
    )


@contextlib.contextmanager
def open_output(path_or_stream=None):
    """Yield a text stream: stdout for None, the stream itself, or a file."""
    if path_or_stream is None:
        yield sys.stdout
    elif isinstance(path_or_stream, str):
        with open(path_or_stream, "w", newline="") as filep:
            yield filep
    else:
        yield path_or_stream


def format_field(value) -> str:
    if isinstance(value, Belief):
        value = value.p
    if isinstance(value, np.ndarray):
        return ";".join(format_field(float(x)) for x in value.ravel())
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path_or_stream, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    with open_output(path_or_stream) as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_field(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, Belief):
        return obj.p.tolist()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(path_or_stream, obj):
    with open_output(path_or_stream) as out:
        json.dump(obj, out, indent=2, sort_keys=True, default=_jsonable)
        out.write("\n")


def write_records(path_or_stream, records: Iterable[Dict[str, Any]]) -> int:
    """JSON lines, one record per line. Returns the number of records."""
    count = 0
    with open_output(path_or_stream) as out:
        for rec in records:
            out.write(json.dumps(rec, sort_keys=True, default=_jsonable))
            out.write("\n")
            count += 1
    return count


def read_records(path: str) -> List[Dict[str, Any]]:
    with open(path, "r") as filep:
        return [json.loads(line) for line in filep if line.strip()]
