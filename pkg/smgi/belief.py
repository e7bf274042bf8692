# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Belief-simplex arithmetic.

Stage mixes are plain numpy arrays:

* ``StageMixP1``: shape (K, A), row k is the mix of type k.
* ``StageMixP2``: shape (B,).
* ``JointMix``: shape (K, A), phi[k, a] = p_k * mu[k, a].
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

BELIEF_TOL = 1e-10

StageMixP1 = np.ndarray
StageMixP2 = np.ndarray
JointMix = np.ndarray


@dataclass(frozen=True, eq=False)
class Belief:
    """A probability vector over types. ``off_support`` marks a belief frozen
    because the conditioning event had zero probability."""

    p: np.ndarray
    off_support: bool = False

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1:
            raise ValueError(f"Belief must be a vector, but got shape {p.shape}")
        if np.any(p < -BELIEF_TOL) or abs(p.sum() - 1.0) > BELIEF_TOL:
            raise ValueError(f"Belief must be a probability vector, but got {p}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __len__(self):
        return len(self.p)

    def __getitem__(self, k):
        return self.p[k]

    def __repr__(self):
        flag = ", off_support" if self.off_support else ""
        return f"Belief({np.array2string(self.p, precision=6)}{flag})"

    @classmethod
    def from_weights(cls, weights):
        """Clip round-off negatives and normalize, e.g. an LP primal slice."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = w.sum()
        if total <= 0.0:
            return cls.uniform(len(w), off_support=True)
        return cls(w / total)

    @classmethod
    def vertex(cls, k, dim):
        p = np.zeros(dim)
        p[k] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, dim, off_support=False):
        return cls(np.full(dim, 1.0 / dim), off_support)

    def allclose(self, other, atol=BELIEF_TOL):
        return np.allclose(self.p, as_vector(other), rtol=0.0, atol=atol)


BeliefLike = Union[Belief, Sequence[float], np.ndarray]


def as_vector(p: BeliefLike) -> np.ndarray:
    """The probability vector of a Belief or array-like."""
    if isinstance(p, Belief):
        return p.p
    return np.asarray(p, dtype=float)


def posterior_update(p: BeliefLike, mu: StageMixP1, a: int) -> Belief:
    """Bayes' rule after observing action a drawn from the type-dependent mix mu.

    An action with zero probability under (p, mu) leaves the belief unchanged
    and flags it off-support.
    """
    p = as_vector(p)
    weights = p * np.asarray(mu)[:, a]
    total = weights.sum()
    if total <= 0.0:
        return Belief(p, off_support=True)
    return Belief(weights / total)


def chi(phi: JointMix, a: int) -> Belief:
    """The type posterior given action a under the joint mix phi."""
    return Belief.from_weights(np.asarray(phi)[:, a])


def joint_from(p: BeliefLike, mu: StageMixP1) -> JointMix:
    return as_vector(p)[:, None] * np.asarray(mu, dtype=float)


def conditional_from(phi: JointMix) -> Tuple[Belief, StageMixP1]:
    """Split a joint mix into its type marginal and per-type action mixes.

    Types without mass get the uniform mix.
    """
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, None)
    n_actions = phi.shape[1]
    mass = phi.sum(axis=1)
    mu = np.full_like(phi, 1.0 / n_actions)
    pos = mass > 0
    mu[pos] = phi[pos] / mass[pos, None]
    return Belief.from_weights(mass), mu


def product_form_posterior(
    p: BeliefLike, mixes: Sequence[StageMixP1], actions: Sequence[int]
) -> Belief:
    """Posterior after several epochs, p_k * prod_m mu_m[k, a_m] normalized."""
    weights = as_vector(p).copy()
    for mu, a in zip(mixes, actions):
        weights = weights * np.asarray(mu)[:, a]
    total = weights.sum()
    if total <= 0.0:
        return Belief(as_vector(p), off_support=True)
    return Belief(weights / total)


def simplex_grid(dim: int, m: int) -> List[Belief]:
    """All beliefs with coordinates in multiples of 1/m, lexicographic order."""
    if m < 1 or dim < 1:
        raise ValueError(f"Need dim >= 1 and m >= 1, but got dim={dim}, m={m}")
    points = []
    # Stars and bars: bar positions among m + dim - 1 slots.
    for bars in itertools.combinations(range(m + dim - 1), dim - 1):
        counts, prev = [], -1
        for bar in bars:
            counts.append(bar - prev - 1)
            prev = bar
        counts.append(m + dim - 1 - prev - 1)
        points.append(tuple(counts))
    points.sort()
    return [Belief(np.array(counts, dtype=float) / m) for counts in points]


def random_belief(rng, dim) -> Belief:
    """A uniform draw from the simplex."""
    return Belief(rng.dirichlet(np.ones(dim)))
