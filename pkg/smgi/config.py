# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Configuration records. Every tolerance used downstream is defined here."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional


class _Record:
    def replace(self, **kwargs):
        """Return a copy with the given fields changed."""
        return dataclasses.replace(self, **kwargs)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Tolerances(_Record):
    """LP tolerances. Acceptance tolerances elsewhere compose from these."""

    feasibility: float = 1e-8
    dual_feasibility: float = 1e-8
    slackness: float = 1e-7
    duality_gap: float = 1e-7
    optimality: float = 1e-10
    pivot: float = 1e-11
    mix: float = 1e-9
    merge: float = 1e-12
    # Degenerate pivots in a row before switching to Bland's rule.
    degenerate_streak: int = 50
    # Pivot cap is this factor times (rows + columns).
    iteration_factor: int = 50


@dataclass(frozen=True)
class SolveConfig(_Record):
    mesh: int = 50
    stop_tol: float = 1e-4
    max_iterations: int = 10_000
    prune: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if self.mesh < 1:
            raise ValueError(f"mesh must be >= 1, but got {self.mesh}")
        if not self.stop_tol > 0:
            raise ValueError(f"stop_tol must be positive, but got {self.stop_tol}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, but got {self.max_iterations}")


@dataclass(frozen=True)
class DualSearchConfig(_Record):
    """Resolution and budgets of the dual-vector searches."""

    recover_grid: int = 33
    recover_min_step: float = 1e-4
    w_grid: int = 9
    w_min_step_frac: float = 1e-3
    max_grid_candidates: int = 10_000
    max_evaluations: int = 200_000
    memo_quantum: float = 1e-9
    improvement_tol: float = 1e-12

    def __post_init__(self):
        if self.recover_grid < 0 or self.w_grid < 0:
            raise ValueError("Grid sizes must be nonnegative")
        if not (self.recover_min_step > 0 and self.w_min_step_frac > 0):
            raise ValueError("Search steps must be positive")


@dataclass(frozen=True)
class SimulationConfig(_Record):
    cap: int = 10_000
    residual: float = 1e-6

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError(f"Epoch cap must be >= 1, but got {self.cap}")


@dataclass(frozen=True)
class OracleLimits(_Record):
    enumeration: int = 100_000
    best_response: int = 1_000_000


DEFAULT_TOLERANCES = Tolerances()
