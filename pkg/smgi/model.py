# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Game specification, validation, discounted aggregates and certification
of the uniform sojourn condition.

A spec holds the finite game (types K, states S, action sets A and B), the
discount rate alpha, the prior over types, the cost rates c[k, i, a, b] and
the semi-Markov kernel factored as P(j | i, a, b) * F_{i,a,b,j}(t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CertificationFailed
from .logger import get_logger
from .sojourn import SojournLaw

logger = get_logger()

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Branch:
    to: int
    prob: float
    law: SojournLaw


@dataclass(frozen=True, eq=False)
class GameSpec:
    types: Tuple[str, ...]
    states: Tuple[str, ...]
    actions_p1: Tuple[str, ...]
    actions_p2: Tuple[str, ...]
    alpha: float
    initial_belief: np.ndarray
    cost: np.ndarray
    transitions: Dict[Tuple[int, int, int], Tuple[Branch, ...]]
    initial_state: int = 0

    def __post_init__(self):
        for name in ("types", "states", "actions_p1", "actions_p2"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "initial_belief", np.asarray(self.initial_belief, dtype=float)
        )
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=float))
        object.__setattr__(
            self,
            "transitions",
            {key: tuple(branches) for key, branches in self.transitions.items()},
        )

    @property
    def n_types(self):
        return len(self.types)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions_p1(self):
        return len(self.actions_p1)

    @property
    def n_actions_p2(self):
        return len(self.actions_p2)

    @property
    def cstar(self):
        """The maximal cost rate c*."""
        return float(self.cost.max()) if self.cost.size else 0.0

    def triples(self):
        """All (i, a, b) in index order."""
        for i in range(self.n_states):
            for a in range(self.n_actions_p1):
                for b in range(self.n_actions_p2):
                    yield i, a, b

    def triple_name(self, i, a, b):
        return f"({self.states[i]}, {self.actions_p1[a]}, {self.actions_p2[b]})"

    def normalized(self):
        """Copy with branch probabilities and the prior renormalized to sum to 1."""
        transitions = {}
        for key, branches in self.transitions.items():
            total = sum(br.prob for br in branches)
            transitions[key] = tuple(
                Branch(br.to, br.prob / total, br.law) for br in branches
            )
        belief = self.initial_belief / self.initial_belief.sum()
        return GameSpec(
            self.types,
            self.states,
            self.actions_p1,
            self.actions_p2,
            self.alpha,
            belief,
            self.cost,
            transitions,
            self.initial_state,
        )


def _labels_violations(name, labels):
    ret = []
    if len(labels) == 0:
        ret.append(f"{name}: at least one label is required")
    if len(set(labels)) != len(labels):
        ret.append(f"{name}: labels must be unique")
    return ret


def validate_spec(spec: GameSpec) -> List[str]:
    """Every invariant violation of the spec, each with a path to the field."""
    ret = []
    for name in ("types", "states", "actions_p1", "actions_p2"):
        ret += _labels_violations(name, getattr(spec, name))
    if ret:
        return ret

    if not (isinstance(spec.alpha, (int, float)) and math.isfinite(spec.alpha) and spec.alpha > 0):
        ret.append(f"alpha: must be positive and finite, got {spec.alpha}")

    n_k, n_s, n_a, n_b = spec.n_types, spec.n_states, spec.n_actions_p1, spec.n_actions_p2
    p = spec.initial_belief
    if p.shape != (n_k,):
        ret.append(f"initial_belief: expected {n_k} entries, got shape {p.shape}")
    elif not np.all(np.isfinite(p)) or np.any(p < 0):
        ret.append("initial_belief: entries must be nonnegative and finite")
    elif abs(p.sum() - 1.0) > PROB_TOL:
        ret.append(f"initial_belief: sums to {p.sum()}, expected 1")

    if not 0 <= spec.initial_state < n_s:
        ret.append(f"initial_state: index {spec.initial_state} out of range")

    c = spec.cost
    if c.shape != (n_k, n_s, n_a, n_b):
        ret.append(f"cost: expected shape {(n_k, n_s, n_a, n_b)}, got {c.shape}")
    else:
        for k, i, a, b in zip(*np.nonzero(~np.isfinite(c) | (c < 0))):
            ret.append(
                f"cost[{spec.types[k]}][{spec.states[i]}][{spec.actions_p1[a]}]"
                f"[{spec.actions_p2[b]}]: must be nonnegative and finite, got {c[k, i, a, b]}"
            )

    for i, a, b in spec.triples():
        path = f"transitions{spec.triple_name(i, a, b)}"
        branches = spec.transitions.get((i, a, b))
        if not branches:
            ret.append(f"{path}: missing or empty")
            continue
        total = 0.0
        for idx, br in enumerate(branches):
            bpath = f"{path}.branches[{idx}]"
            if not 0 <= br.to < n_s:
                ret.append(f"{bpath}.to: state index {br.to} out of range")
            if not (math.isfinite(br.prob) and br.prob >= 0):
                ret.append(f"{bpath}.prob: must be nonnegative, got {br.prob}")
            else:
                total += br.prob
            ret += br.law.violations(f"{bpath}.sojourn")
        if abs(total - 1.0) > PROB_TOL:
            ret.append(f"{path}: branch probabilities sum to {total}, expected 1")
    for key in spec.transitions:
        if len(key) != 3 or not all(
            0 <= idx < n for idx, n in zip(key, (n_s, n_a, n_b))
        ):
            ret.append(f"transitions{key}: triple out of range")
    return ret


@dataclass(frozen=True, eq=False)
class DiscountedAggregates:
    """qhat[i, a, b, j] and m[i, a, b]."""

    qhat: np.ndarray
    m: np.ndarray
    beta_bound: float

    def continuation_mass(self):
        """Sum over j of qhat, per (i, a, b)."""
        return self.qhat.sum(axis=-1)


def discounted_aggregates(spec: GameSpec) -> DiscountedAggregates:
    n_s, n_a, n_b = spec.n_states, spec.n_actions_p1, spec.n_actions_p2
    qhat = np.zeros((n_s, n_a, n_b, n_s))
    for i, a, b in spec.triples():
        for br in spec.transitions[(i, a, b)]:
            qhat[i, a, b, br.to] += br.prob * br.law.laplace(spec.alpha)
    mass = qhat.sum(axis=-1)
    m = (1.0 - mass) / spec.alpha
    return DiscountedAggregates(qhat=qhat, m=m, beta_bound=float(mass.max()))


def holding_cdf(spec: GameSpec, delta: float, i: int, a: int, b: int) -> float:
    """D(delta | i, a, b): probability the sojourn ends by delta."""
    return sum(br.prob * br.law.cdf(delta) for br in spec.transitions[(i, a, b)])


@dataclass(frozen=True)
class Assumption1Certificate:
    """delta, epsilon with D(delta | .) <= 1 - epsilon everywhere, and the
    resulting per-stage discount bound beta."""

    delta: float
    epsilon: float
    beta: float
    worst_pair: Tuple[int, int, int]

    def to_dict(self):
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "beta": self.beta,
            "worst_pair": list(self.worst_pair),
        }


def default_delta_candidates(spec: GameSpec) -> List[float]:
    """Log grid over [1e-3, 10] plus half of every finite change point."""
    cands = set(np.geomspace(1e-3, 10.0, 60).tolist())
    for branches in spec.transitions.values():
        for br in branches:
            for t in br.law.change_points():
                if t > 0 and math.isfinite(t):
                    cands.add(0.5 * t)
    return sorted(cands)


def certify_assumption1(
    spec: GameSpec, delta_candidates: Optional[Sequence[float]] = None
) -> Assumption1Certificate:
    if delta_candidates is None:
        delta_candidates = default_delta_candidates(spec)
    if len(delta_candidates) == 0:
        raise ValueError("At least one delta candidate is required")

    best = None
    for delta in sorted(delta_candidates):
        if not delta > 0:
            raise ValueError(f"delta candidates must be positive, but got {delta}")
        worst, worst_pair = -1.0, None
        for i, a, b in spec.triples():
            d = holding_cdf(spec, delta, i, a, b)
            if d > worst:
                worst, worst_pair = d, (i, a, b)
        eps = min(1.0, 1.0 - worst)
        if eps <= 0:
            continue
        beta = 1.0 - eps * (-math.expm1(-spec.alpha * delta))
        # Ties keep the smaller delta.
        if best is None or beta < best.beta:
            best = Assumption1Certificate(delta, eps, beta, worst_pair)

    if best is None:
        raise CertificationFailed(
            f"No delta among {len(delta_candidates)} candidates gives epsilon > 0: "
            f"some sojourn ends instantly with probability 1"
        )
    logger.debug(
        f"Certified delta={best.delta:.6g}, epsilon={best.epsilon:.6g}, "
        f"beta={best.beta:.6g}, worst pair {spec.triple_name(*best.worst_pair)}"
    )
    return best


def epoch_time_bound(cert: Assumption1Certificate, alpha: float, horizon_time: float, n: int) -> float:
    """Upper bound on P(T_n <= M) from E[exp(-alpha T_n)] <= beta^n."""
    return min(1.0, math.exp(alpha * horizon_time) * cert.beta**n)
