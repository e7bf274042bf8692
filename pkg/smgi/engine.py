# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Policy engines: the decide/observe protocol shared by both players, and
stationary engines used as baselines."""
from __future__ import annotations

import copy
import functools
from typing import Any, Dict, List, Optional

import numpy as np

from .belief import Belief, as_vector, posterior_update
from .errors import ProtocolError


def protocol_step(observe=False):
    """
    Wrap an engine method to enforce the decide/observe alternation:
        observe: Whether the method consumes a pending decision.

    Out-of-order calls flag the engine as broken and raise ProtocolError;
    a broken engine rejects every further call.
    """

    def decorator(func):
        @functools.wraps(func)
        def wrapper(self, *args, **kwargs):
            if self.error:
                raise ProtocolError(
                    f"{type(self).__name__} is in an error state and cannot {func.__name__}"
                )
            if self.pending != observe:
                self.error = True
                expected = "decide" if observe else "observe"
                raise ProtocolError(
                    f"{type(self).__name__}.{func.__name__} called at epoch {self.epoch} "
                    f"before {expected}"
                )
            ret = func(self, *args, **kwargs)
            self.pending = not observe
            return ret

        return wrapper

    return decorator


class Engine:
    """Base of all policy engines."""

    player: Optional[int] = None

    def __init__(self):
        self.epoch = 0
        self.pending = False
        self.error = False
        self.trace: List[Dict[str, Any]] = []

    def clone(self):
        """Copy the engine state; caches stay shared with the original."""
        ret = copy.copy(self)
        ret.trace = list(self.trace)
        return ret


class FixedP1Engine(Engine):
    """Plays the same per-type mix every epoch. ``mu`` is (K, A) or (S, K, A)."""

    player = 1

    def __init__(self, mu, belief=None):
        super().__init__()
        self.mu = np.asarray(mu, dtype=float)
        if self.mu.ndim not in (2, 3):
            raise ValueError(f"mu must be (K, A) or (S, K, A), but got shape {self.mu.shape}")
        n_types = self.mu.shape[-2]
        self.belief = Belief.uniform(n_types) if belief is None else Belief(as_vector(belief))
        self._current = None

    @classmethod
    def uniform(cls, n_types, n_actions, belief=None):
        return cls(np.full((n_types, n_actions), 1.0 / n_actions), belief)

    def mix_at(self, i):
        return self.mu if self.mu.ndim == 2 else self.mu[i]

    @protocol_step()
    def decide(self, i):
        self._current = self.mix_at(i)
        return self._current.copy()

    @protocol_step(observe=True)
    def observe(self, i, a):
        self.belief = posterior_update(self.belief, self._current, a)
        self.epoch += 1
        return self.belief


class FixedP2Engine(Engine):
    """Plays the same mix every epoch. ``nu`` is (B,) or (S, B)."""

    player = 2

    def __init__(self, nu):
        super().__init__()
        self.nu = np.asarray(nu, dtype=float)
        if self.nu.ndim not in (1, 2):
            raise ValueError(f"nu must be (B,) or (S, B), but got shape {self.nu.shape}")

    @classmethod
    def uniform(cls, n_actions):
        return cls(np.full(n_actions, 1.0 / n_actions))

    @protocol_step()
    def decide(self, i):
        return (self.nu if self.nu.ndim == 1 else self.nu[i]).copy()

    @protocol_step(observe=True)
    def observe(self, j, a=None):
        self.epoch += 1
        return None
