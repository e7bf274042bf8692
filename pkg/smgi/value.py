# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Cut envelopes, the LP stage backup and value iteration.

A value function on the belief simplex is stored per state as a set of
linear cuts g, with V(p, j) = min_g <g, p>. The stage backup is a single LP
over the joint mix phi[k, a] = p_k mu[k, a]; its duals give Player 2's mix
and a supergradient cut of the backed-up function.

Value iteration carries grid values between sweeps and continues each backup
with their least concave majorant (GridInterpolant). The cut envelope of the
last sweep is read off that majorant at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .belief import Belief, BeliefLike, as_vector, conditional_from, joint_from, simplex_grid
from .config import DEFAULT_TOLERANCES, SolveConfig, Tolerances
from .env import parallel_map
from .errors import IterationBudgetExceeded, NumericalFailure
from .logger import get_logger
from .lp import EQ, LE, LinearProgram, solve_lp
from .model import Assumption1Certificate, DiscountedAggregates, GameSpec
from .utils.report import report_memory

logger = get_logger()

CANONICAL_TOL = 1e-9


def _unique_rows(cuts: np.ndarray, tol: float) -> np.ndarray:
    kept: List[np.ndarray] = []
    for g in cuts:
        if kept and np.abs(np.asarray(kept) - g).max(axis=1).min() <= tol:
            continue
        kept.append(g)
    return np.asarray(kept)


@dataclass(frozen=True, eq=False)
class ConcaveEnvelope:
    """Per-state cut sets; ``cuts[j]`` has shape (n_cuts, K)."""

    cuts: Tuple[np.ndarray, ...]

    def __post_init__(self):
        cuts = tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in self.cuts)
        for j, c in enumerate(cuts):
            if c.shape[0] == 0:
                raise ValueError(f"Envelope of state {j} has no cut")
            c.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)

    @classmethod
    def zero(cls, n_states, n_types):
        """The function identically 0."""
        return cls(tuple(np.zeros((1, n_types)) for _ in range(n_states)))

    @classmethod
    def from_cuts(cls, cuts: Sequence[np.ndarray], tol: float = DEFAULT_TOLERANCES.merge):
        """Build an envelope, merging cuts equal within tol."""
        return cls(tuple(_unique_rows(np.atleast_2d(c), tol) for c in cuts))

    @property
    def n_states(self):
        return len(self.cuts)

    @property
    def n_types(self):
        return self.cuts[0].shape[1]

    def n_cuts(self):
        return [len(c) for c in self.cuts]

    def evaluate(self, p: BeliefLike, j: int) -> float:
        return float((self.cuts[j] @ as_vector(p)).min())

    def perspective(self, v, j: int) -> float:
        """min_g <g, v> for a nonnegative weight vector v."""
        return float((self.cuts[j] @ np.asarray(v, dtype=float)).min())

    def add_continuation(self, lp: LinearProgram, w: int, weights: Sequence[int], j: int):
        """Rows w <= <g, weights> for every cut g of state j."""
        for g in self.cuts[j]:
            lp.add_constraint([(w, 1.0)] + [(col, -gk) for col, gk in zip(weights, g)], LE, 0.0)

    def active_cut(self, p: BeliefLike, j: int) -> np.ndarray:
        """The first cut attaining the minimum at p."""
        return self.cuts[j][int(np.argmin(self.cuts[j] @ as_vector(p)))]

    def pruned(self, tol: float = 1e-10) -> "ConcaveEnvelope":
        """Drop cuts that are nowhere the strict minimum on the simplex."""
        return ConcaveEnvelope(tuple(_prune_dominated(c, tol) for c in self.cuts))

    def to_list(self):
        return [c.tolist() for c in self.cuts]


def _prune_dominated(cuts: np.ndarray, tol: float) -> np.ndarray:
    keep = list(range(len(cuts)))
    for idx in range(len(cuts)):
        others = [o for o in keep if o != idx]
        if not others:
            break
        # max s s.t. <h - g, p> >= s for every other cut h, p in the simplex.
        lp = LinearProgram()
        ps = [lp.add_variable() for _ in range(cuts.shape[1])]
        s = lp.add_variable(lower=-math.inf, cost=1.0)
        for o in others:
            diff = cuts[o] - cuts[idx]
            lp.add_constraint([(s, 1.0)] + [(x, -d) for x, d in zip(ps, diff)], LE, 0.0)
        lp.add_constraint([(x, 1.0) for x in ps], EQ, 1.0)
        sol = solve_lp(lp)
        if sol.objective <= tol:
            keep.remove(idx)
    return cuts[keep]


def envelope_eval(env: ConcaveEnvelope, p: BeliefLike, j: int) -> float:
    return env.evaluate(p, j)


def perspective_eval(env: ConcaveEnvelope, v, j: int) -> float:
    return env.perspective(v, j)


@dataclass(frozen=True, eq=False)
class GridInterpolant:
    """Least concave majorant of per-state values on a belief grid.

    V(v, j) = max sum_x lam_x values[j, x] over lam >= 0 with sum_x lam_x x = v.
    It is nondecreasing in the grid values and shifts with them by constants.
    """

    points: np.ndarray  # (N, K), rows on the simplex
    values: np.ndarray  # (S, N)

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[1] != points.shape[0]:
            raise ValueError(f"Got {values.shape[1]} values per state for {points.shape[0]} points")
        for arr in (points, values):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @classmethod
    def zero(cls, points, n_states):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, np.zeros((n_states, len(points))))

    @property
    def n_states(self):
        return self.values.shape[0]

    @property
    def n_types(self):
        return self.points.shape[1]

    def add_continuation(self, lp: LinearProgram, w: int, weights: Sequence[int], j: int):
        """Rows w <= sum_x lam_x values[j, x] with sum_x lam_x x = weights."""
        lam = [lp.add_variable() for _ in range(len(self.points))]
        for k, col in enumerate(weights):
            coeffs = [(l, x) for l, x in zip(lam, self.points[:, k]) if x != 0.0]
            lp.add_constraint(coeffs + [(col, -1.0)], EQ, 0.0)
        lp.add_constraint(
            [(w, 1.0)] + [(l, -v) for l, v in zip(lam, self.values[j]) if v != 0.0], LE, 0.0
        )

    def perspective(self, v, j: int) -> float:
        v = np.asarray(v, dtype=float)
        lp = LinearProgram()
        lam = [lp.add_variable(cost=val) for val in self.values[j]]
        for k in range(self.n_types):
            lp.add_constraint(
                [(l, x) for l, x in zip(lam, self.points[:, k]) if x != 0.0], EQ, v[k]
            )
        sol = solve_lp(lp)
        if not sol.optimal:
            raise NumericalFailure(f"Grid majorant at {v}, state {j} ended {sol.status}")
        return sol.objective

    def evaluate(self, p: BeliefLike, j: int) -> float:
        return self.perspective(as_vector(p), j)

    def to_envelope(self, tol: Tolerances = DEFAULT_TOLERANCES) -> ConcaveEnvelope:
        """One supergradient cut of the majorant per grid point. Among the
        supergradients at a point the one lowest at the simplex centre is kept,
        so for two types the cuts cover every linear piece."""
        centre = np.full(self.n_types, 1.0 / self.n_types)
        cuts = [
            np.array([_majorant_cut(self.points, self.values[j], x, centre, tol) for x in self.points])
            for j in range(self.n_states)
        ]
        return ConcaveEnvelope.from_cuts(cuts, tol.merge)


Continuation = Union[ConcaveEnvelope, GridInterpolant]


def _majorant_cut(points, values, x, centre, tol: Tolerances) -> np.ndarray:
    # min <g, x> over hyperplanes lying on or above every (point, value).
    lp = LinearProgram()
    g = [lp.add_variable(lower=-math.inf, cost=-xk) for xk in x]
    for y, v in zip(points, values):
        lp.add_constraint([(gk, -yk) for gk, yk in zip(g, y) if yk != 0.0], LE, -v)
    sol = solve_lp(lp, tol)
    if not sol.optimal:
        raise NumericalFailure(f"Majorant cut at {x} ended {sol.status}")
    height = -sol.objective
    lp.add_constraint(
        [(gk, xk) for gk, xk in zip(g, x) if xk != 0.0], LE, height + CANONICAL_TOL * max(1.0, abs(height))
    )
    lp.objective = [-c for c in centre]
    sol2 = solve_lp(lp, tol)
    if not sol2.optimal:
        logger.warning(f"Centre tie-break of the cut at {x} ended {sol2.status}; keeping the first optimum")
        return sol.x[g]
    return sol2.x[g]


@dataclass(frozen=True, eq=False)
class StageSaddle:
    value: float
    phi_star: np.ndarray
    mu_star: np.ndarray
    nu_star: np.ndarray
    cut: np.ndarray
    belief: Belief
    state: int


def _stage_lp(p, i, prev: Continuation, agg: DiscountedAggregates, spec: GameSpec):
    n_k, n_a, n_b, n_s = spec.n_types, spec.n_actions_p1, spec.n_actions_p2, spec.n_states
    lp = LinearProgram()
    phi = np.array([[lp.add_variable() for _ in range(n_a)] for _ in range(n_k)])
    w = np.array(
        [[lp.add_variable(lower=-math.inf) for _ in range(n_s)] for _ in range(n_a)]
    )
    t = lp.add_variable(lower=-math.inf, cost=1.0)

    mass_rows = [
        lp.add_constraint([(phi[k, a], 1.0) for a in range(n_a)], EQ, p[k]) for k in range(n_k)
    ]
    for a in range(n_a):
        for j in range(n_s):
            prev.add_continuation(lp, w[a, j], phi[:, a], j)
    stage = spec.cost[:, i] * agg.m[i][None]  # (K, A, B)
    payoff_rows = []
    for b in range(n_b):
        coeffs = [(t, 1.0)]
        coeffs += [(phi[k, a], -stage[k, a, b]) for k in range(n_k) for a in range(n_a)]
        coeffs += [
            (w[a, j], -agg.qhat[i, a, b, j])
            for a in range(n_a)
            for j in range(n_s)
            if agg.qhat[i, a, b, j] != 0.0
        ]
        payoff_rows.append(lp.add_constraint(coeffs, LE, 0.0))
    return lp, phi, t, mass_rows, payoff_rows


def stage_backup(
    p: BeliefLike,
    i: int,
    prev: Continuation,
    agg: DiscountedAggregates,
    spec: GameSpec,
    tol: Tolerances = DEFAULT_TOLERANCES,
    canonical: bool = False,
) -> StageSaddle:
    """One application of the Shapley operator at (p, i), with both players'
    stage mixes and a supergradient cut.

    With ``canonical`` the joint mix is re-selected among (near) optimal ones,
    preferring lower action indices, so that policies do not depend on which
    optimal vertex the simplex happened to land on.
    """
    pv = as_vector(p)
    lp, phi, t, mass_rows, payoff_rows = _stage_lp(pv, i, prev, agg, spec)
    sol = solve_lp(lp, tol)
    if not sol.optimal:
        raise NumericalFailure(f"Stage LP at p={pv}, state {i} ended {sol.status}")
    value = sol.objective
    cut = sol.duals[mass_rows]
    nu = np.clip(sol.duals[payoff_rows], 0.0, None)
    nu = nu / nu.sum()
    x = sol.x

    if canonical:
        n_a = spec.n_actions_p1
        floor = value - CANONICAL_TOL * max(1.0, abs(value))
        lp.add_constraint([(t, -1.0)], LE, -floor)
        lp.objective = [0.0] * lp.n_vars
        for k in range(phi.shape[0]):
            for a in range(n_a):
                lp.objective[phi[k, a]] = (n_a - a) / n_a
        sol2 = solve_lp(lp, tol)
        if sol2.optimal:
            x = sol2.x
        else:
            logger.warning(f"Canonical re-selection ended {sol2.status}; keeping the first optimum")

    phi_star = np.clip(x[phi], 0.0, None)
    _, mu = conditional_from(phi_star)
    return StageSaddle(
        value=value,
        phi_star=phi_star,
        mu_star=mu,
        nu_star=nu,
        cut=cut,
        belief=p if isinstance(p, Belief) else Belief.from_weights(pv),
        state=i,
    )


def stage_operator(
    p: BeliefLike,
    i: int,
    mu: np.ndarray,
    nu: np.ndarray,
    prev: Continuation,
    agg: DiscountedAggregates,
    spec: GameSpec,
) -> float:
    """T^{mu,nu} prev evaluated directly: expected stage reward plus discounted
    continuation at the posteriors."""
    phi = joint_from(p, mu)
    stage = np.einsum("ka,kab,ab->b", phi, spec.cost[:, i], agg.m[i])
    cont = np.array(
        [[prev.perspective(phi[:, a], j) for j in range(spec.n_states)] for a in range(spec.n_actions_p1)]
    )
    total = stage + np.einsum("abj,aj->b", agg.qhat[i], cont)
    return float(np.asarray(nu) @ total)


def _beta_of(cert):
    return cert.beta if isinstance(cert, Assumption1Certificate) else float(cert)


def error_budget(n: int, cert, cstar: float, alpha: float) -> float:
    """c* beta^(n+1) / alpha, the reward left after epoch n."""
    if n < 0:
        raise ValueError(f"Horizon must be >= 0, but got {n}")
    return cstar * _beta_of(cert) ** (n + 1) / alpha


def iteration_floor(eps0: float, cstar: float, alpha: float, beta: float) -> int:
    """Iterations after which the a-priori tail is below eps0."""
    if cstar <= 0:
        return 1
    return int(math.ceil(abs(math.log(alpha * eps0 / cstar)) / abs(math.log(beta)))) + 1


@dataclass
class SolveReport:
    envelope: ConcaveEnvelope
    mesh: int
    iterations: int
    beta: float
    tail_bound: float
    sup_change: float
    stop_tol: float
    grid_values: List[np.ndarray] = field(default_factory=list)
    n_cuts: List[int] = field(default_factory=list)

    @property
    def horizon(self):
        """Index n of the last iterate V*_n."""
        return self.iterations - 1


class _Backup:
    """Picklable backup task over (belief, state) pairs."""

    def __init__(self, prev, agg, spec, tol):
        self.prev = prev
        self.agg = agg
        self.spec = spec
        self.tol = tol

    def __call__(self, item):
        p, i = item
        return stage_backup(p, i, self.prev, self.agg, self.spec, self.tol).value


def value_iterate(
    spec: GameSpec,
    agg: DiscountedAggregates,
    cert: Assumption1Certificate,
    mesh: Optional[int] = None,
    stop_tol: Optional[float] = None,
    config: SolveConfig = SolveConfig(),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SolveReport:
    """V*_{n+1} = T V*_n from V*_{-1} = 0 on a simplex grid.

    Each sweep backs up every grid belief against the concave majorant of the
    previous sweep's grid values, so grid values never decrease. The returned
    envelope holds the cuts of the last sweep's majorant.
    """
    mesh = config.mesh if mesh is None else mesh
    stop_tol = config.stop_tol if stop_tol is None else stop_tol
    if mesh < 1 or not stop_tol > 0:
        raise ValueError(f"Need mesh >= 1 and stop_tol > 0, got {mesh}, {stop_tol}")
    n_s, n_k = spec.n_states, spec.n_types
    grid = simplex_grid(n_k, mesh)
    floor = iteration_floor(stop_tol, spec.cstar, spec.alpha, cert.beta)
    threshold = stop_tol * (1.0 - cert.beta)
    logger.info(
        f"Value iteration on {len(grid)} grid beliefs x {n_s} states, "
        f"beta={cert.beta:.6g}, at least {floor} iterations",
        main_only=True,
    )

    points = np.array([p.p for p in grid])
    interp = GridInterpolant.zero(points, n_s)
    prev_table = np.zeros((n_s, len(grid)))
    history = []
    items = [(p, i) for i in range(n_s) for p in grid]
    for it in range(1, config.max_iterations + 1):
        results = parallel_map(_Backup(interp, agg, spec, tol), items, config.workers)
        table = np.array(results).reshape(n_s, len(grid))
        interp = GridInterpolant(points, table)
        change = float(np.abs(table - prev_table).max())
        history.append(table)
        prev_table = table
        logger.info(
            f"Iteration {it}: sup change {change:.3e}", main_only=True
        )
        report_memory(f"Iteration {it}")
        if change <= threshold and it >= floor:
            break
    else:
        raise IterationBudgetExceeded(
            f"No convergence within {config.max_iterations} iterations (last change {change:.3e})"
        )

    env = interp.to_envelope(tol)
    if config.prune:
        env = env.pruned()

    report = SolveReport(
        envelope=env,
        mesh=mesh,
        iterations=it,
        beta=cert.beta,
        tail_bound=0.0,
        sup_change=change,
        stop_tol=stop_tol,
        grid_values=history,
        n_cuts=env.n_cuts(),
    )
    report.tail_bound = error_budget(report.horizon, cert, spec.cstar, spec.alpha)
    logger.info(
        f"Converged after {it} iterations, tail bound {report.tail_bound:.3e}", main_only=True
    )
    return report


def query_table(env: ConcaveEnvelope, mesh: int) -> List[Tuple[Belief, int, float]]:
    """(belief, state, value) over a simplex grid."""
    return [
        (p, j, env.evaluate(p, j))
        for j in range(env.n_states)
        for p in simplex_grid(env.n_types, mesh)
    ]
