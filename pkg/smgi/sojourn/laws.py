# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Closed-form sojourn-time laws.

Every family gives its Laplace transform and CDF exactly, so the discounted
aggregates carry no quadrature error. Laws never raise on bad parameters;
``violations`` reports them so that spec validation can list every problem.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .registry import register_sojourn_law, get_sojourn_law_cls

PROB_TOL = 1e-12


class SojournLaw:
    """Interface of a sojourn-time law family."""

    kind = None
    param_names: Tuple[str, ...] = ()

    def laplace(self, alpha):
        raise NotImplementedError

    def cdf(self, t):
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def violations(self, path=""):
        return []

    def change_points(self):
        """Finite times where the CDF jumps or starts rising."""
        return []

    def to_dict(self):
        ret = {"kind": self.kind}
        for name in self.param_names:
            ret[name] = getattr(self, name)
        return ret

    @classmethod
    def from_params(cls, **params):
        missing = [name for name in cls.param_names if name not in params]
        extra = [name for name in params if name not in cls.param_names]
        if missing or extra:
            raise ValueError(
                f"Sojourn law {cls.kind} takes {list(cls.param_names)}, "
                f"missing {missing}, unknown {extra}"
            )
        return cls(**{name: params[name] for name in cls.param_names})


def _finite(value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        return False
    return math.isfinite(value)


def _nonneg_finite(value):
    return _finite(value) and value >= 0


@register_sojourn_law("exponential")
@dataclass(frozen=True)
class Exponential(SojournLaw):
    rate: float
    param_names = ("rate",)

    def laplace(self, alpha):
        return self.rate / (self.rate + alpha)

    def cdf(self, t):
        if t <= 0:
            return 0.0
        return -math.expm1(-self.rate * t)

    def sample(self, rng):
        # 1 - U lies in (0, 1], so the log is finite.
        return -math.log(1.0 - rng.random()) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def violations(self, path=""):
        if not (_nonneg_finite(self.rate) and self.rate > 0):
            return [f"{path}.rate: rate must be positive and finite, got {self.rate}"]
        return []


@register_sojourn_law("deterministic")
@dataclass(frozen=True)
class Deterministic(SojournLaw):
    delay: float
    param_names = ("delay",)

    def laplace(self, alpha):
        return math.exp(-alpha * self.delay)

    def cdf(self, t):
        return 1.0 if t >= self.delay else 0.0

    def sample(self, rng):
        return float(self.delay)

    def mean(self):
        return float(self.delay)

    def violations(self, path=""):
        if not _nonneg_finite(self.delay):
            return [f"{path}.delay: delay must be nonnegative and finite, got {self.delay}"]
        return []

    def change_points(self):
        return [float(self.delay)]


@register_sojourn_law("uniform")
@dataclass(frozen=True)
class Uniform(SojournLaw):
    lo: float
    hi: float
    param_names = ("lo", "hi")

    def laplace(self, alpha):
        width = self.hi - self.lo
        return -math.exp(-alpha * self.lo) * math.expm1(-alpha * width) / (alpha * width)

    def cdf(self, t):
        if t <= self.lo:
            return 0.0
        if t >= self.hi:
            return 1.0
        return (t - self.lo) / (self.hi - self.lo)

    def sample(self, rng):
        return self.lo + rng.random() * (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def violations(self, path=""):
        ret = []
        if not _nonneg_finite(self.lo):
            ret.append(f"{path}.lo: lo must be nonnegative and finite, got {self.lo}")
        if not _finite(self.hi):
            ret.append(f"{path}.hi: hi must be finite, got {self.hi}")
        elif not ret and self.hi <= self.lo:
            ret.append(f"{path}.hi: need lo < hi, got lo={self.lo} hi={self.hi}")
        return ret

    def change_points(self):
        return [float(self.lo)]


@register_sojourn_law("discrete")
@dataclass(frozen=True)
class Discrete(SojournLaw):
    atoms: Tuple[Tuple[float, float], ...]
    param_names = ("atoms",)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(tuple(atom) for atom in self.atoms))

    @property
    def times(self):
        return np.array([t for t, _ in self.atoms], dtype=float)

    @property
    def weights(self):
        return np.array([w for _, w in self.atoms], dtype=float)

    def laplace(self, alpha):
        return float(np.dot(self.weights, np.exp(-alpha * self.times)))

    def cdf(self, t):
        # Right-continuous: atoms at exactly t count.
        return float(self.weights[self.times <= t].sum())

    def sample(self, rng):
        cum = np.cumsum(self.weights)
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return float(self.times[min(idx, len(self.atoms) - 1)])

    def mean(self):
        return float(np.dot(self.weights, self.times))

    def to_dict(self):
        return {"kind": self.kind, "atoms": [list(atom) for atom in self.atoms]}

    def violations(self, path=""):
        if not self.atoms:
            return [f"{path}.atoms: at least one atom is required"]
        if any(len(atom) != 2 for atom in self.atoms):
            return [f"{path}.atoms: every atom must be a (time, weight) pair"]
        ret = []
        prev = None
        for idx, (t, w) in enumerate(self.atoms):
            if not _nonneg_finite(t):
                ret.append(f"{path}.atoms[{idx}]: time must be nonnegative, got {t}")
            if not (_nonneg_finite(w) and w > 0):
                ret.append(f"{path}.atoms[{idx}]: weight must be positive, got {w}")
            if prev is not None and _nonneg_finite(t) and t <= prev:
                ret.append(f"{path}.atoms[{idx}]: times must be strictly increasing")
            prev = t
        total = sum(w for _, w in self.atoms)
        if abs(total - 1.0) > PROB_TOL:
            ret.append(f"{path}.atoms: weights sum to {total}, expected 1")
        return ret

    def change_points(self):
        return [float(t) for t, _ in self.atoms]


def make_law(kind, **params):
    """Build a law from its spec-file kind and parameters."""
    return get_sojourn_law_cls(kind).from_params(**params)


def laplace_point(law: SojournLaw, alpha: float) -> float:
    """E[exp(-alpha * tau)] of the law."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, but got {alpha}")
    return law.laplace(alpha)


def cdf_point(law: SojournLaw, t: float) -> float:
    if t < 0:
        raise ValueError(f"CDF is evaluated at t >= 0, but got {t}")
    return law.cdf(t)


def sample_sojourn(law: SojournLaw, rng) -> float:
    """Inverse-CDF draw from the law using a numpy Generator."""
    return law.sample(rng)


__all__: List[str] = [
    "SojournLaw",
    "Exponential",
    "Deterministic",
    "Uniform",
    "Discrete",
    "make_law",
    "laplace_point",
    "cdf_point",
    "sample_sojourn",
]
