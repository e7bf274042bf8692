# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Seeded trajectory simulation and Monte Carlo evaluation of engine pairs.

Every episode draws from its own PCG64DXSM stream seeded by (seed, episode),
so a trajectory does not depend on how episodes are spread over workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .belief import BeliefLike, as_vector
from .config import SimulationConfig
from .env import parallel_map
from .logger import get_logger
from .model import DiscountedAggregates, GameSpec
from .sojourn import sample_sojourn

logger = get_logger()


def make_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64DXSM(np.random.SeedSequence([seed, episode])))


def _draw(rng, probs) -> int:
    cum = np.cumsum(np.clip(np.asarray(probs, dtype=float), 0.0, None))
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, len(cum) - 1)


@dataclass
class TrajectoryRecord:
    """One episode. ``times[n]`` is the start of epoch n; the last entry is
    the time the episode was cut."""

    kappa: int
    times: List[float] = field(default_factory=list)
    states: List[int] = field(default_factory=list)
    actions_p1: List[int] = field(default_factory=list)
    actions_p2: List[int] = field(default_factory=list)
    payoff: float = 0.0
    epochs: int = 0
    residual: float = 0.0
    engine_traces: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)

    def to_dict(self, spec: Optional[GameSpec] = None):
        """JSON-ready record; with a spec, indices are replaced by labels."""

        def labels(names, idx):
            return list(idx) if spec is None else [names[x] for x in idx]

        return {
            "kappa": self.kappa if spec is None else spec.types[self.kappa],
            "times": list(self.times),
            "states": labels(spec and spec.states, self.states),
            "actions_p1": labels(spec and spec.actions_p1, self.actions_p1),
            "actions_p2": labels(spec and spec.actions_p2, self.actions_p2),
            "payoff": self.payoff,
            "epochs": self.epochs,
            "residual": self.residual,
            "engine_traces": self.engine_traces,
        }


def simulate_episode(
    spec: GameSpec,
    agg: DiscountedAggregates,
    p1_engine,
    p2_engine,
    rng: np.random.Generator,
    cfg: SimulationConfig = SimulationConfig(),
    i0: Optional[int] = None,
    p: Optional[BeliefLike] = None,
    forced_type: Optional[int] = None,
) -> TrajectoryRecord:
    """Play one episode until the discounted residual c* e^{-alpha T}/alpha
    drops below the configured threshold or the epoch cap is hit."""
    alpha, cstar = spec.alpha, spec.cstar
    i = spec.initial_state if i0 is None else i0
    prior = spec.initial_belief if p is None else as_vector(p)
    kappa = _draw(rng, prior) if forced_type is None else forced_type
    rec = TrajectoryRecord(kappa=kappa)
    t = 0.0
    rec.times.append(t)
    for _ in range(cfg.cap):
        if math.exp(-alpha * t) * cstar / alpha < cfg.residual:
            break
        mu = p1_engine.decide(i)
        nu = p2_engine.decide(i)
        a = _draw(rng, mu[kappa])
        b = _draw(rng, nu)
        p1_engine.observe(i, a)
        branches = spec.transitions[(i, a, b)]
        br = branches[_draw(rng, [x.prob for x in branches])]
        tau = sample_sojourn(br.law, rng)
        rec.payoff += spec.cost[kappa, i, a, b] * (
            math.exp(-alpha * t) - math.exp(-alpha * (t + tau))
        ) / alpha
        p2_engine.observe(br.to, a=a)
        rec.states.append(i)
        rec.actions_p1.append(a)
        rec.actions_p2.append(b)
        t += tau
        rec.times.append(t)
        i = br.to
    rec.epochs = len(rec.states)
    rec.residual = math.exp(-alpha * t) * cstar / alpha
    rec.engine_traces = {"p1": list(p1_engine.trace), "p2": list(p2_engine.trace)}
    return rec


class EnginePair:
    """Picklable factory of fresh (Player 1, Player 2) engines for an episode.

    The prototypes must not have decided yet; clones share their caches.
    """

    def __init__(self, p1_engine, p2_engine):
        self.p1_engine = p1_engine
        self.p2_engine = p2_engine

    def __call__(self):
        return self.p1_engine.clone(), self.p2_engine.clone()


class _Episode:
    def __init__(self, spec, agg, engines, seed, cfg, i0, p, forced_type):
        self.spec = spec
        self.agg = agg
        self.engines = engines
        self.seed = seed
        self.cfg = cfg
        self.i0 = i0
        self.p = p
        self.forced_type = forced_type

    def __call__(self, episode):
        p1, p2 = self.engines()
        return simulate_episode(
            self.spec,
            self.agg,
            p1,
            p2,
            make_rng(self.seed, episode),
            self.cfg,
            self.i0,
            self.p,
            self.forced_type,
        )


@dataclass
class MonteCarloSummary:
    mean: float
    stderr: float
    residual_max: float
    episodes: int
    records: List[TrajectoryRecord] = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "residual_max": self.residual_max,
            "episodes": self.episodes,
        }


def monte_carlo_value(
    spec: GameSpec,
    agg: DiscountedAggregates,
    engines: EnginePair,
    episodes: int,
    seed: int,
    cfg: SimulationConfig = SimulationConfig(),
    i0: Optional[int] = None,
    p: Optional[BeliefLike] = None,
    forced_type: Optional[int] = None,
    workers: Optional[int] = None,
    keep_records: bool = False,
) -> MonteCarloSummary:
    if episodes < 2:
        raise ValueError(f"Need at least 2 episodes, but got {episodes}")
    task = _Episode(spec, agg, engines, seed, cfg, i0, p, forced_type)
    records = parallel_map(task, range(episodes), workers)
    payoffs = np.array([r.payoff for r in records])
    summary = MonteCarloSummary(
        mean=float(payoffs.mean()),
        stderr=float(payoffs.std(ddof=1) / math.sqrt(episodes)),
        residual_max=float(max(r.residual for r in records)),
        episodes=episodes,
        records=records if keep_records else [],
    )
    logger.info(
        f"Monte Carlo over {episodes} episodes: {summary.mean:.6g} +- {summary.stderr:.3g}, "
        f"residual <= {summary.residual_max:.3g}",
        main_only=True,
    )
    return summary
