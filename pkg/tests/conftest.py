# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Shared game instances and solved fixtures."""
import itertools

import numpy as np
import pytest

from smgi import (
    SolveConfig,
    certify_assumption1,
    discounted_aggregates,
    spec_from_dict,
    value_iterate,
)


def exponential(rate=1.0):
    return {"kind": "exponential", "rate": rate}


def build_spec_dict(cost, branches=None, law=None, alpha=1.0, belief=None, initial_state=None):
    """Spec file contents for a cost array (K, S, A, B).

    ``branches(i, a, b)`` lists (j, prob) pairs (default: stay in i) and
    ``law(i, a, b, j)`` gives the sojourn record (default: Exponential(1)).
    """
    cost = np.asarray(cost, dtype=float)
    n_k, n_s, n_a, n_b = cost.shape
    branches = branches or (lambda i, a, b: [(i, 1.0)])
    law = law or (lambda i, a, b, j: exponential())
    types = [f"t{k}" for k in range(n_k)]
    states = [f"s{i}" for i in range(n_s)]
    acts1 = [f"a{a}" for a in range(n_a)]
    acts2 = [f"b{b}" for b in range(n_b)]
    transitions = []
    for i, a, b in itertools.product(range(n_s), range(n_a), range(n_b)):
        transitions.append(
            {
                "from": states[i],
                "a1": acts1[a],
                "a2": acts2[b],
                "branches": [
                    {"to": states[j], "prob": prob, "sojourn": law(i, a, b, j)}
                    for j, prob in branches(i, a, b)
                ],
            }
        )
    ret = {
        "types": types,
        "states": states,
        "actions_p1": acts1,
        "actions_p2": acts2,
        "alpha": alpha,
        "initial_belief": list(belief) if belief is not None else [1.0 / n_k] * n_k,
        "cost": cost.tolist(),
        "transitions": transitions,
    }
    if initial_state is not None:
        ret["initial_state"] = states[initial_state]
    return ret


def constant_dict(c0=0.6, n_states=2, law=None):
    cost = np.full((2, n_states, 2, 2), c0)
    return build_spec_dict(
        cost, branches=lambda i, a, b: [(j, 1.0 / n_states) for j in range(n_states)], law=law
    )


def desk_s1_dict():
    """Each type rewards one matching action pair."""
    cost = np.zeros((2, 1, 2, 2))
    cost[0, 0, 0, 0] = 1.0
    cost[1, 0, 1, 1] = 1.0
    return build_spec_dict(cost)


def desk_dict():
    cost = np.zeros((2, 2, 2, 2))
    cost[0, 0] = [[1.0, 0.0], [0.0, 0.0]]
    cost[1, 0] = [[0.0, 0.0], [0.0, 1.0]]
    cost[0, 1] = [[0.5, 0.0], [0.2, 0.3]]
    cost[1, 1] = [[0.3, 0.2], [0.0, 0.5]]

    def branches(i, a, b):
        stay = 0.7 if a == b else 0.3
        return [(i, stay), (1 - i, 1.0 - stay)]

    return build_spec_dict(cost, branches=branches)


def single_type_dict():
    cost = np.array(desk_dict()["cost"])[:1]
    ret = build_spec_dict(cost, branches=lambda i, a, b: [(i, 0.6), (1 - i, 0.4)])
    return ret


@pytest.fixture
def make_spec():
    """Factory: spec object from build_spec_dict arguments."""

    def _make(cost, **kwargs):
        return spec_from_dict(build_spec_dict(cost, **kwargs))

    return _make


@pytest.fixture
def constant_spec():
    return spec_from_dict(constant_dict())


@pytest.fixture
def desk_s1_spec():
    return spec_from_dict(desk_s1_dict())


@pytest.fixture
def desk_spec():
    return spec_from_dict(desk_dict())


@pytest.fixture
def spec_dicts():
    return {
        "constant": constant_dict(),
        "desk_s1": desk_s1_dict(),
        "desk": desk_dict(),
        "single": single_type_dict(),
    }


class Solved:
    def __init__(self, spec_obj, mesh, stop_tol=1e-4):
        self.spec = spec_obj
        self.agg = discounted_aggregates(spec_obj)
        self.cert = certify_assumption1(spec_obj)
        self.report = value_iterate(
            spec_obj, self.agg, self.cert, config=SolveConfig(mesh=mesh, stop_tol=stop_tol)
        )
        self.envelope = self.report.envelope


@pytest.fixture(scope="session")
def solved_constant():
    return Solved(spec_from_dict(constant_dict()), mesh=4)


@pytest.fixture(scope="session")
def solved_s1():
    return Solved(spec_from_dict(desk_s1_dict()), mesh=10)


@pytest.fixture(scope="session")
def solved_desk():
    return Solved(spec_from_dict(desk_dict()), mesh=8)


@pytest.fixture(scope="session")
def solved_single():
    return Solved(spec_from_dict(single_type_dict()), mesh=1)
