# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Exact finite-horizon verification.

Histories are tuples (i0, a0, b0, i1, ..., in); a decision at epoch m is
taken at a history of length 3m + 1. Evaluations carry unnormalized type
weights p_k * prod mu_k(a_m | h_m) instead of normalized posteriors, so no
division ever happens inside the recursions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .belief import BeliefLike, as_vector
from .config import DEFAULT_TOLERANCES, OracleLimits, Tolerances
from .errors import BudgetExceeded, DepthExceeded, EnumerationTooLarge
from .logger import get_logger
from .lp import solve_matrix_game
from .model import DiscountedAggregates, GameSpec
from .value import error_budget

logger = get_logger()

History = Tuple[int, ...]


def history_depth(h: History) -> int:
    return (len(h) - 1) // 3


def enumerate_histories(spec: GameSpec, i0: int, n: int) -> List[List[History]]:
    """Decision histories of depth 0..n starting at i0, grouped by depth."""
    if n < 0:
        raise ValueError(f"Depth must be >= 0, but got {n}")
    ret = [[(i0,)]]
    steps = list(
        itertools.product(
            range(spec.n_actions_p1), range(spec.n_actions_p2), range(spec.n_states)
        )
    )
    for _ in range(n):
        ret.append([h + step for h in ret[-1] for step in steps])
    return ret


class _HistoryPolicy:
    def __init__(self, player, depth, n_actions):
        if player not in (1, 2):
            raise ValueError(f"Player must be 1 or 2, but got {player}")
        self.player = player
        self.depth = depth
        self.n_actions = n_actions

    def _key(self, h, k):
        return (k, h) if self.player == 1 else h

    def covers(self, n):
        return self.depth >= n


class BehavioralPolicyTable(_HistoryPolicy):
    """Mixes per decision history; Player 1 rows are keyed (type, history)."""

    def __init__(self, player, depth, n_actions, rows: Dict, tol=DEFAULT_TOLERANCES.mix):
        super().__init__(player, depth, n_actions)
        self.rows = {}
        for key, row in rows.items():
            row = np.asarray(row, dtype=float)
            if row.shape != (n_actions,) or np.any(row < -tol) or abs(row.sum() - 1.0) > tol:
                raise ValueError(f"Row {key} is not a probability vector over {n_actions} actions")
            self.rows[key] = row

    @classmethod
    def from_deterministic(cls, policy: "DeterministicPolicy"):
        rows = {key: np.eye(policy.n_actions)[a] for key, a in policy.choices.items()}
        return cls(policy.player, policy.depth, policy.n_actions, rows)

    @classmethod
    def stationary(cls, player, spec: GameSpec, n, mix, i0=None):
        """The table that plays ``mix`` ((K, A) for Player 1, (B,) for Player 2)
        at every history from i0 up to depth n."""
        mix = np.asarray(mix, dtype=float)
        i0 = spec.initial_state if i0 is None else i0
        rows = {}
        for level in enumerate_histories(spec, i0, n):
            for h in level:
                if player == 1:
                    rows.update({(k, h): mix[k] for k in range(spec.n_types)})
                else:
                    rows[h] = mix
        n_actions = spec.n_actions_p1 if player == 1 else spec.n_actions_p2
        return cls(player, n, n_actions, rows)

    def mix(self, h: History, k: Optional[int] = None) -> np.ndarray:
        key = self._key(h, k)
        if key not in self.rows:
            raise KeyError(f"Policy table has no row for {key}")
        return self.rows[key]


class DeterministicPolicy(_HistoryPolicy):
    def __init__(self, player, depth, n_actions, choices: Dict):
        super().__init__(player, depth, n_actions)
        self.choices = dict(choices)

    def mix(self, h: History, k: Optional[int] = None) -> np.ndarray:
        ret = np.zeros(self.n_actions)
        ret[self.choices[self._key(h, k)]] = 1.0
        return ret


def _eval_tree(h, weights, remaining, pi, sigma, agg, spec):
    i = h[-1]
    live = np.flatnonzero(weights > 0.0)
    mu = np.zeros((spec.n_types, spec.n_actions_p1))
    for k in live:
        mu[k] = pi.mix(h, int(k))
    nu = sigma.mix(h)
    total = 0.0
    for a in range(spec.n_actions_p1):
        wa = weights * mu[:, a]
        if not wa.sum() > 0.0:
            continue
        for b in range(spec.n_actions_p2):
            if nu[b] == 0.0:
                continue
            val = float(wa @ spec.cost[:, i, a, b]) * agg.m[i, a, b]
            if remaining > 0:
                for j in range(spec.n_states):
                    q = agg.qhat[i, a, b, j]
                    if q != 0.0:
                        val += q * _eval_tree(h + (a, b, j), wa, remaining - 1, pi, sigma, agg, spec)
            total += nu[b] * val
    return total


def eval_finite_horizon(
    p: BeliefLike,
    i: int,
    pi_table,
    sigma_table,
    n: int,
    agg: DiscountedAggregates,
    spec: GameSpec,
) -> float:
    """Expected discounted reward of epochs 0..n under fixed history policies."""
    for table in (pi_table, sigma_table):
        if not table.covers(n):
            raise DepthExceeded(
                f"Player {table.player} policy covers depth {table.depth}, need {n}"
            )
    return _eval_tree((i,), as_vector(p).copy(), n, pi_table, sigma_table, agg, spec)


def _deterministic_policies(player, histories, n_actions, n, type_k=None):
    for choice in itertools.product(range(n_actions), repeat=len(histories)):
        if player == 1:
            choices = {(type_k, h): a for h, a in zip(histories, choice)}
        else:
            choices = dict(zip(histories, choice))
        yield DeterministicPolicy(player, n, n_actions, choices)


def enumeration_size(spec: GameSpec, n: int) -> Tuple[int, int]:
    """(rows, columns) of the deterministic-policy matrix game at depth n."""
    n_hist = sum((spec.n_actions_p1 * spec.n_actions_p2 * spec.n_states) ** m for m in range(n + 1))
    return spec.n_actions_p1 ** (n_hist * spec.n_types), spec.n_actions_p2**n_hist


def brute_value(
    p: BeliefLike,
    i: int,
    n: int,
    spec: GameSpec,
    agg: DiscountedAggregates,
    limits: OracleLimits = OracleLimits(),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """V*_n(p, i) as the value of the matrix game over deterministic policies.

    A Player 1 policy is one deterministic policy per type, so the payoff of
    (phi, psi) is sum_k p_k R_k[phi_k, psi].
    """
    n_rows, n_cols = enumeration_size(spec, n)
    if n_rows * n_cols > limits.enumeration:
        raise EnumerationTooLarge(n_rows, n_cols, limits.enumeration)

    pv = as_vector(p)
    histories = [h for level in enumerate_histories(spec, i, n) for h in level]
    sigmas = list(_deterministic_policies(2, histories, spec.n_actions_p2, n))
    R = None
    for k in range(spec.n_types):
        vertex = np.eye(spec.n_types)[k]
        pis = list(_deterministic_policies(1, histories, spec.n_actions_p1, n, type_k=k))
        Rk = np.array(
            [[eval_finite_horizon(vertex, i, pi, sigma, n, agg, spec) for sigma in sigmas] for pi in pis]
        )
        R = pv[k] * Rk if R is None else (R[:, None, :] + pv[k] * Rk[None, :, :]).reshape(-1, len(sigmas))
    value, _, _ = solve_matrix_game(R, tol)
    logger.debug(f"Brute value at n={n}: {value:.10g} from a {R.shape[0]} x {R.shape[1]} game")
    return value


def _check_budget(spec, N, limits):
    if N < 0:
        raise ValueError(f"Horizon must be >= 0, but got {N}")
    size = (spec.n_actions_p1 * spec.n_actions_p2 * spec.n_states) ** N
    if size > limits.best_response:
        raise BudgetExceeded(
            f"Best response over {size} histories exceeds the budget {limits.best_response}"
        )


def best_response_p1(
    sigma_engine,
    p: BeliefLike,
    i: int,
    N: int,
    spec: GameSpec,
    agg: DiscountedAggregates,
    limits: OracleLimits = OracleLimits(),
    beta: Optional[float] = None,
    traces: Optional[List[List[Dict[str, Any]]]] = None,
) -> Tuple[float, float]:
    """Bracket on sup over Player 1 policies of the reward against a Player 2
    engine. The engine's mixes do not depend on the type, so one walk of its
    decision tree serves every type. With ``traces``, the trace of the
    engine at every leaf of the walk is appended to it."""
    _check_budget(spec, N, limits)
    n_nodes = 0

    def walk(engine, state, remaining):
        nonlocal n_nodes
        n_nodes += 1
        nu = engine.decide(state)
        if remaining == 0 and traces is not None:
            traces.append(list(engine.trace))
        cont = np.zeros((spec.n_actions_p1, spec.n_states, spec.n_types))
        if remaining > 0:
            for a in range(spec.n_actions_p1):
                reach = nu @ agg.qhat[state, a]
                for j in range(spec.n_states):
                    if reach[j] == 0.0:
                        continue
                    child = engine.clone()
                    child.observe(j, a)
                    cont[a, j] = walk(child, j, remaining - 1)
        # Q[k, a]
        Q = np.einsum("b,kab,ab->ka", nu, spec.cost[:, state], agg.m[state])
        Q += np.einsum("b,abj,ajk->ka", nu, agg.qhat[state], cont)
        return Q.max(axis=1)

    per_type = walk(sigma_engine, i, N)
    lo = float(as_vector(p) @ per_type)
    beta = agg.beta_bound if beta is None else beta
    hi = lo + error_budget(N, beta, spec.cstar, spec.alpha)
    logger.debug(f"Player 1 best response over {n_nodes} engine nodes: [{lo:.10g}, {hi:.10g}]")
    return lo, hi


def best_response_p2(
    pi_engine,
    p: BeliefLike,
    i: int,
    N: int,
    spec: GameSpec,
    agg: DiscountedAggregates,
    limits: OracleLimits = OracleLimits(),
    beta: Optional[float] = None,
    traces: Optional[List[List[Dict[str, Any]]]] = None,
) -> Tuple[float, float]:
    """Bracket on inf over Player 2 policies of the reward against a Player 1
    engine, by a DP on unnormalized type weights. ``traces`` collects the
    engine trace at every leaf."""
    _check_budget(spec, N, limits)
    n_nodes = 0

    def walk(engine, state, weights, remaining):
        nonlocal n_nodes
        n_nodes += 1
        mu = engine.decide(state)
        if remaining == 0 and traces is not None:
            traces.append(list(engine.trace))
        joint = weights[:, None] * mu
        cont = np.zeros((spec.n_actions_p1, spec.n_states))
        if remaining > 0:
            for a in range(spec.n_actions_p1):
                if not joint[:, a].sum() > 0.0:
                    continue
                child = engine.clone()
                child.observe(state, a)
                for j in range(spec.n_states):
                    if not np.any(agg.qhat[state, a, :, j]):
                        continue
                    grand = child.clone()
                    cont[a, j] = walk(grand, j, joint[:, a], remaining - 1)
        per_b = np.einsum("ka,kab,ab->b", joint, spec.cost[:, state], agg.m[state])
        per_b += np.einsum("abj,aj->b", agg.qhat[state], cont)
        return float(per_b.min())

    lo = walk(pi_engine, i, as_vector(p).copy(), N)
    beta = agg.beta_bound if beta is None else beta
    hi = lo + error_budget(N, beta, spec.cstar, spec.alpha)
    logger.debug(f"Player 2 best response over {n_nodes} engine nodes: [{lo:.10g}, {hi:.10g}]")
    return lo, hi


@dataclass
class OracleReport:
    kind: str
    value_lo: float
    value_hi: float
    horizon: int
    budget: int
    counts: Dict[str, int] = field(default_factory=dict)
    reference: Optional[float] = None

    @property
    def value(self):
        return self.value_lo

    @property
    def width(self):
        return self.value_hi - self.value_lo

    def to_dict(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "value_lo": self.value_lo,
            "value_hi": self.value_hi,
            "horizon": self.horizon,
            "budget": self.budget,
            "counts": dict(self.counts),
            "reference": self.reference,
        }


def lipschitz_audit(values: Sequence[float], beliefs: Sequence[BeliefLike], constant: float) -> float:
    """Worst ratio |v_x - v_y| / (constant * |x - y|_1) over all pairs; at most
    1 when the values are constant-Lipschitz."""
    pts = np.array([as_vector(b) for b in beliefs])
    vals = np.asarray(values, dtype=float)
    worst = 0.0
    for x, y in itertools.combinations(range(len(vals)), 2):
        dist = np.abs(pts[x] - pts[y]).sum()
        if dist == 0.0:
            continue
        if constant <= 0.0:
            if abs(vals[x] - vals[y]) > 0.0:
                return float("inf")
            continue
        worst = max(worst, abs(vals[x] - vals[y]) / (constant * dist))
    return worst
