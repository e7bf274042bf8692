# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Dense bounded-variable primal simplex with dual extraction, and a matrix-game
solver on top of it.

Programs are always maximizations::

    maximize    c . x
    subject to  A_i . x  (<= or ==)  b_i
                lower <= x <= upper      (infinite bounds allowed)

Internally every variable is shifted or complemented onto [0, u] (free ones are
split), rows with a negative right-hand side are negated, and slack columns are
added for inequality rows. Upper bounds are handled by complementing columns
in the tableau, so a nonbasic column always sits at zero in the working
representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import NumericalFailure
from .logger import get_logger

logger = get_logger()

LE = "<="
EQ = "=="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

Coefficients = Union[Dict[int, float], Iterable[Tuple[int, float]], np.ndarray]


class LinearProgram:
    """A maximization program built incrementally."""

    def __init__(self):
        self.objective: List[float] = []
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.names: List[Optional[str]] = []
        self._rows: List[Tuple[Dict[int, float], str, float]] = []

    @property
    def n_vars(self):
        return len(self.objective)

    @property
    def n_rows(self):
        return len(self._rows)

    def add_variable(self, lower=0.0, upper=math.inf, cost=0.0, name=None):
        """Add a variable and return its column index."""
        if lower > upper:
            logger.debug(f"Variable {name} has empty bounds [{lower}, {upper}]")
        self.objective.append(float(cost))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.names.append(name)
        return len(self.objective) - 1

    def add_constraint(self, coeffs: Coefficients, relation, rhs):
        """Add a row and return its index. ``coeffs`` maps column to coefficient."""
        if relation not in (LE, EQ):
            raise ValueError(f"Only support relations {LE} and {EQ}, but got {relation}")
        if isinstance(coeffs, np.ndarray):
            row = {int(j): float(v) for j, v in enumerate(coeffs) if v != 0.0}
        elif isinstance(coeffs, dict):
            row = {int(j): float(v) for j, v in coeffs.items()}
        else:
            row = {}
            for j, v in coeffs:
                row[int(j)] = row.get(int(j), 0.0) + float(v)
        self._rows.append((row, relation, float(rhs)))
        return len(self._rows) - 1

    @classmethod
    def from_arrays(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
        """Build from dense arrays. ``bounds`` is a (lower, upper) pair per variable."""
        lp = cls()
        c = np.asarray(c, dtype=float)
        bounds = bounds if bounds is not None else [(0.0, math.inf)] * len(c)
        for cost, (lo, hi) in zip(c, bounds):
            lp.add_variable(-math.inf if lo is None else lo, math.inf if hi is None else hi, cost)
        for A, b, rel in ((A_ub, b_ub, LE), (A_eq, b_eq, EQ)):
            if A is None:
                continue
            for row, rhs in zip(np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_1d(b)):
                lp.add_constraint(row, rel, rhs)
        return lp

    def matrices(self):
        """Dense (c, A, relations, b, lower, upper)."""
        n, m = self.n_vars, self.n_rows
        A = np.zeros((m, n))
        for i, (row, _, _) in enumerate(self._rows):
            for j, v in row.items():
                if not 0 <= j < n:
                    raise ValueError(f"Row {i} references column {j} of {n}")
                A[i, j] = v
        rel = np.array([r for _, r, _ in self._rows], dtype=object)
        b = np.array([rhs for _, _, rhs in self._rows], dtype=float)
        return (
            np.array(self.objective, dtype=float),
            A,
            rel,
            b,
            np.array(self.lower, dtype=float),
            np.array(self.upper, dtype=float),
        )


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


class _BoundedSimplex:
    """Tableau state of one solve."""

    def __init__(self, T, rhs, basis, ub, tol: Tolerances):
        self.T = T
        self.rhs = rhs
        self.basis = basis
        self.ub = ub
        self.flipped = np.zeros(T.shape[1], dtype=bool)
        self.tol = tol
        self.iterations = 0

    def flip(self, j, cost):
        """Move nonbasic column j to its upper bound by complementing it."""
        self.rhs -= self.T[:, j] * self.ub[j]
        self.T[:, j] = -self.T[:, j]
        cost[j] = -cost[j]
        self.flipped[j] = not self.flipped[j]

    def complement_row(self, r, cost):
        """Complement the basic variable of row r, which is leaving at its upper bound."""
        v = self.basis[r]
        self.T[r] = -self.T[r]
        self.T[r, v] = 1.0
        self.rhs[r] = self.ub[v] - self.rhs[r]
        cost[v] = -cost[v]
        self.flipped[v] = not self.flipped[v]

    def pivot(self, r, j):
        T = self.T
        piv = T[r, j]
        T[r] /= piv
        self.rhs[r] /= piv
        factors = T[:, j].copy()
        factors[r] = 0.0
        T -= np.outer(factors, T[r])
        self.rhs -= factors * self.rhs[r]
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def iterate(self, cost):
        """Run primal simplex on ``cost`` (working representation). Returns the status."""
        T, tol = self.T, self.tol
        m, n = T.shape
        cap = tol.iteration_factor * (m + n) + 100
        use_bland = False
        streak = 0
        while True:
            if self.iterations > cap:
                raise NumericalFailure(f"Simplex did not terminate within {cap} pivots")
            reduced = cost - cost[self.basis] @ T if m else cost.copy()
            reduced[self.basis] = 0.0
            scale = max(1.0, float(np.abs(cost).max(initial=0.0)))
            candidates = np.flatnonzero(reduced > tol.optimality * scale)
            if candidates.size == 0:
                return OPTIMAL
            if use_bland:
                j = int(candidates[0])
            else:
                # argmax returns the first maximum: smallest index on ties.
                j = int(np.argmax(np.where(reduced > tol.optimality * scale, reduced, -np.inf)))

            col = T[:, j]
            ratios = np.full(m, math.inf)
            ub_basic = self.ub[self.basis]
            pos = col > tol.pivot
            neg = (col < -tol.pivot) & np.isfinite(ub_basic)
            ratios[pos] = np.maximum(self.rhs[pos], 0.0) / col[pos]
            ratios[neg] = np.maximum(ub_basic[neg] - self.rhs[neg], 0.0) / -col[neg]
            theta = ratios.min(initial=math.inf)

            if self.ub[j] <= theta:
                if math.isinf(self.ub[j]):
                    return UNBOUNDED
                self.flip(j, cost)
                step = self.ub[j]
            else:
                ties = np.flatnonzero(ratios <= theta + tol.pivot)
                r = int(ties[np.argmin(self.basis[ties])])
                if neg[r]:
                    self.complement_row(r, cost)
                self.pivot(r, j)
                step = theta
            self.iterations += 1

            if step <= tol.pivot:
                streak += 1
                if streak >= tol.degenerate_streak and not use_bland:
                    logger.debug("Switching to Bland's rule after degenerate pivots")
                    use_bland = True
            else:
                streak = 0


def _standard_form(c, A, rel, b, lo, hi):
    """Shift, complement and split variables so that all columns live on [0, u]."""
    n = len(c)
    cols, ubs = [], []
    x0 = np.zeros(n)
    for j in range(n):
        if math.isfinite(lo[j]):
            x0[j] = lo[j]
            cols.append((j, 1.0))
            ubs.append(hi[j] - lo[j])
        elif math.isfinite(hi[j]):
            x0[j] = hi[j]
            cols.append((j, -1.0))
            ubs.append(math.inf)
        else:
            cols.append((j, 1.0))
            ubs.append(math.inf)
            cols.append((j, -1.0))
            ubs.append(math.inf)
    S = np.zeros((n, len(cols)))
    for col, (j, sign) in enumerate(cols):
        S[j, col] = sign
    return S, x0, np.array(ubs, dtype=float)


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOLERANCES) -> LpSolution:
    """Solve the program and check the result (primal and dual feasibility,
    complementary slackness, strong duality)."""
    c, A, rel, b, lo, hi = lp.matrices()
    m, n = A.shape
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("LP coefficients must be finite")
    if np.any(lo == math.inf) or np.any(hi == -math.inf):
        raise ValueError("LP bounds must satisfy lower < inf and upper > -inf")
    if np.any(lo > hi):
        return LpSolution(INFEASIBLE)

    S, x0, ub_h = _standard_form(c, A, rel, b, lo, hi)
    A_h = A @ S
    b_h = b - A @ x0
    c_h = c @ S
    n_h = A_h.shape[1]

    le = np.array([r == LE for r in rel], dtype=bool)
    slack_rows = np.flatnonzero(le)
    n_slack = len(slack_rows)
    slack = np.zeros((m, n_slack))
    slack[slack_rows, np.arange(n_slack)] = 1.0

    row_sign = np.where(b_h < 0, -1.0, 1.0)
    A_std = np.hstack([A_h, slack]) * row_sign[:, None]
    b_std = b_h * row_sign
    c_std = np.concatenate([c_h, np.zeros(n_slack)])
    u_std = np.concatenate([ub_h, np.full(n_slack, math.inf)])
    n_std = n_h + n_slack

    basis = np.empty(m, dtype=int)
    art_rows = []
    slack_of_row = {int(r): n_h + k for k, r in enumerate(slack_rows)}
    for i in range(m):
        if le[i] and row_sign[i] > 0:
            basis[i] = slack_of_row[i]
        else:
            basis[i] = n_std + len(art_rows)
            art_rows.append(i)
    n_art = len(art_rows)
    art = np.zeros((m, n_art))
    art[art_rows, np.arange(n_art)] = 1.0

    simplex = _BoundedSimplex(
        np.hstack([A_std, art]),
        b_std.copy(),
        basis,
        np.concatenate([u_std, np.full(n_art, math.inf)]),
        tol,
    )
    b_scale = max(1.0, float(np.abs(b_std).max(initial=0.0)))

    kept = np.ones(m, dtype=bool)
    if n_art:
        cost1 = np.zeros(n_std + n_art)
        cost1[n_std:] = -1.0
        simplex.iterate(cost1)
        is_art = simplex.basis >= n_std
        infeasibility = float(simplex.rhs[is_art].sum())
        if infeasibility > 10 * tol.feasibility * b_scale:
            logger.debug(f"Phase 1 ended with infeasibility {infeasibility:.3e}")
            return LpSolution(INFEASIBLE, iterations=simplex.iterations)
        for r in np.flatnonzero(is_art):
            row = np.abs(simplex.T[r, :n_std])
            row[simplex.basis[simplex.basis < n_std]] = 0.0
            j = int(np.argmax(row)) if n_std else 0
            if n_std and row[j] > 1e-9:
                simplex.pivot(r, j)
            else:
                kept[r] = False
        simplex.T = simplex.T[kept][:, :n_std]
        simplex.rhs = simplex.rhs[kept]
        simplex.basis = simplex.basis[kept]
        simplex.ub = simplex.ub[:n_std]
        simplex.flipped = simplex.flipped[:n_std]
        if not kept.all():
            logger.debug(f"Dropped {int((~kept).sum())} redundant rows")

    cost2 = np.where(simplex.flipped, -c_std, c_std)
    status = simplex.iterate(cost2)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=simplex.iterations)

    # Recover the standard-form point, re-solving the basic block on the
    # original matrix to shed accumulated pivot round-off.
    x_std = np.where(simplex.flipped, u_std, 0.0)
    basis = simplex.basis
    x_std[basis] = 0.0
    B = A_std[kept][:, basis]
    duals = np.zeros(m)
    if len(basis):
        rhs = b_std[kept] - A_std[kept] @ x_std
        try:
            x_std[basis] = np.linalg.solve(B, rhs)
            duals[kept] = np.linalg.solve(B.T, c_std[basis])
        except np.linalg.LinAlgError as err:
            raise NumericalFailure(f"Singular final basis: {err}") from err
    duals *= row_sign
    x = x0 + S @ x_std[:n_h]
    x = np.clip(x, lo, hi)
    objective = float(c @ x)
    _check_optimality(c, A, le, b, lo, hi, x, duals, objective, tol)
    return LpSolution(OPTIMAL, x, duals, objective, simplex.iterations)


def _check_optimality(c, A, le, b, lo, hi, x, y, objective, tol: Tolerances):
    """Raise NumericalFailure unless (x, y) is an optimal primal-dual pair."""
    activity = A @ x
    row_scale = np.maximum(1.0, np.maximum(np.abs(b), np.abs(A * x).max(axis=1, initial=0.0)))
    resid = activity - b
    viol = np.where(le, np.maximum(resid, 0.0), np.abs(resid))
    if np.any(viol > tol.feasibility * row_scale):
        worst = int(np.argmax(viol / row_scale))
        raise NumericalFailure(f"Primal infeasible at row {worst}: residual {resid[worst]:.3e}")

    y_scale = max(1.0, float(np.abs(y).max(initial=0.0)))
    if np.any(y[le] < -tol.dual_feasibility * y_scale):
        raise NumericalFailure(f"Negative dual on an inequality row: {y[le].min():.3e}")

    d = c - A.T @ y
    d_scale = max(1.0, float(np.abs(c).max(initial=0.0)), y_scale)
    d_tol = tol.dual_feasibility * d_scale
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    lo0, hi0 = np.where(fin_lo, lo, 0.0), np.where(fin_hi, hi, 0.0)
    at_lo = fin_lo & (x <= lo0 + tol.feasibility * np.maximum(1.0, np.abs(lo0)))
    at_hi = fin_hi & (x >= hi0 - tol.feasibility * np.maximum(1.0, np.abs(hi0)))
    bad = ((d > d_tol) & ~at_hi) | ((d < -d_tol) & ~at_lo)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise NumericalFailure(f"Reduced cost {d[j]:.3e} of column {j} has the wrong sign")

    slack = np.where(le, b - activity, 0.0)
    obj_scale = max(1.0, abs(objective))
    if np.any(np.abs(y * slack) > tol.slackness * obj_scale):
        raise NumericalFailure("Complementary slackness violated")

    bound_term = np.where(d > 0, np.where(np.isfinite(hi), hi, 0.0) * d, 0.0) + np.where(
        d < 0, np.where(np.isfinite(lo), lo, 0.0) * d, 0.0
    )
    dual_objective = float(b @ y + bound_term.sum())
    if abs(objective - dual_objective) > tol.duality_gap * obj_scale:
        raise NumericalFailure(
            f"Duality gap {abs(objective - dual_objective):.3e} "
            f"(primal {objective:.12g}, dual {dual_objective:.12g})"
        )


def _as_mix(v):
    v = np.clip(np.asarray(v, dtype=float), 0.0, None)
    return v / v.sum()


def solve_matrix_game(
    M: Sequence[Sequence[float]], tol: Tolerances = DEFAULT_TOLERANCES
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixes of the zero-sum game where the row player maximizes."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"Need a non-empty payoff matrix, but got shape {M.shape}")
    n_rows, n_cols = M.shape
    lp = LinearProgram()
    xs = [lp.add_variable() for _ in range(n_rows)]
    v = lp.add_variable(lower=-math.inf, cost=1.0)
    for col in range(n_cols):
        coeffs = [(x, -M[r, col]) for r, x in enumerate(xs)]
        coeffs.append((v, 1.0))
        lp.add_constraint(coeffs, LE, 0.0)
    lp.add_constraint([(x, 1.0) for x in xs], EQ, 1.0)
    sol = solve_lp(lp, tol)
    if not sol.optimal:
        raise NumericalFailure(f"Matrix game LP ended {sol.status}")

    value = sol.objective
    row_mix = _as_mix(sol.x[:n_rows])
    col_mix = _as_mix(sol.duals[:n_cols])
    cert = 1e-7 * max(1.0, float(np.abs(M).max()))
    if (row_mix @ M).min() < value - cert or (M @ col_mix).max() > value + cert:
        raise NumericalFailure(
            f"Saddle certificate failed: value {value:.10g}, "
            f"row guarantee {(row_mix @ M).min():.10g}, col guarantee {(M @ col_mix).max():.10g}"
        )
    return value, row_mix, col_mix
