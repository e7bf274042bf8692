# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""The informed player's policy engine.

Each epoch the engine solves the stage saddle at its current public belief
against the solved value function and returns the per-type mix; after the
action is observed the belief moves by Bayes' rule.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .belief import Belief, BeliefLike, as_vector, posterior_update
from .config import DEFAULT_TOLERANCES, Tolerances
from .engine import Engine, protocol_step
from .errors import ProtocolError
from .logger import get_logger
from .model import DiscountedAggregates, GameSpec
from .value import ConcaveEnvelope, StageSaddle, stage_backup

logger = get_logger()


class P1Engine(Engine):
    player = 1

    def __init__(
        self,
        envelope: ConcaveEnvelope,
        spec: GameSpec,
        agg: DiscountedAggregates,
        belief: Optional[BeliefLike] = None,
        tol: Tolerances = DEFAULT_TOLERANCES,
        canonical: bool = True,
        cache: Optional[dict] = None,
    ):
        super().__init__()
        self.envelope = envelope
        self.spec = spec
        self.agg = agg
        self.tol = tol
        self.canonical = canonical
        if belief is None:
            belief = spec.initial_belief
        self.belief = belief if isinstance(belief, Belief) else Belief(as_vector(belief))
        self.saddle: Optional[StageSaddle] = None
        self._state = None
        # Decisions keyed by (state, exact belief bytes); shared by clones.
        self.cache = {} if cache is None else cache

    @property
    def mu(self):
        return None if self.saddle is None else self.saddle.mu_star

    def solve_at(self, q: Belief, i: int) -> StageSaddle:
        key = (i, q.p.tobytes())
        saddle = self.cache.get(key)
        if saddle is None:
            saddle = stage_backup(
                q, i, self.envelope, self.agg, self.spec, self.tol, canonical=self.canonical
            )
            self.cache[key] = saddle
        return saddle

    @protocol_step()
    def decide(self, i: int) -> np.ndarray:
        self.saddle = self.solve_at(self.belief, i)
        self._state = i
        return self.saddle.mu_star.copy()

    @protocol_step(observe=True)
    def observe(self, i: int, a: int) -> Belief:
        if i != self._state:
            self.error = True
            raise ProtocolError(f"Observed state {i} but decided for state {self._state}")
        q = posterior_update(self.belief, self.saddle.mu_star, a)
        if q.off_support:
            logger.warning(
                f"Action {self.spec.actions_p1[a]} has zero probability at epoch {self.epoch}; "
                f"belief kept at {q}"
            )
        self.trace.append(
            {
                "n": self.epoch,
                "state": self.spec.states[i],
                "belief": self.belief.p.tolist(),
                "mu": self.saddle.mu_star.tolist(),
                "value": self.saddle.value,
                "action": self.spec.actions_p1[a],
            }
        )
        self.belief = q
        self.epoch += 1
        return q


def p1_decide(engine: P1Engine, i: int) -> np.ndarray:
    return engine.decide(i)


def p1_observe(engine: P1Engine, i: int, a: int) -> Belief:
    return engine.observe(i, a)
