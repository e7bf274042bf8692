# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""The dual game and the uninformed player's policy engine.

U*(z, i) = max_p [V*(p, i) - <p, z>/alpha] is evaluated lazily by LP from the
cut envelope of V*. V* is recovered as min over the box [0, c*]^K of
U*(z, i) + <p, z>/alpha. Player 2 tracks a dual vector zeta: each epoch it
solves the dual stage problem at (i, zeta) for its mix and for the dual
vectors it moves to after observing Player 1's action and the next state.
"""
from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .belief import Belief, BeliefLike, as_vector, chi
from .config import DEFAULT_TOLERANCES, DualSearchConfig, Tolerances
from .engine import Engine, protocol_step
from .errors import NumericalFailure, ProtocolError
from .logger import get_logger
from .lp import EQ, LE, LinearProgram, solve_lp, solve_matrix_game
from .model import DiscountedAggregates, GameSpec
from .player1 import P1Engine
from .search import Database, Space, coordinate_descent, grid_search
from .value import ConcaveEnvelope, stage_backup

logger = get_logger()

BOX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DualVector:
    z: np.ndarray
    in_box: bool

    @classmethod
    def of(cls, z, cstar, tol=BOX_TOL):
        z = np.array(z, dtype=float)
        if not np.all(np.isfinite(z)):
            raise ValueError(f"Dual vector must be finite, but got {z}")
        z.setflags(write=False)
        return cls(z, bool(np.all(z >= -tol) and np.all(z <= cstar + tol)))

    def __repr__(self):
        return f"DualVector({np.array2string(self.z, precision=6)}, in_box={self.in_box})"


def _as_z(z):
    return z.z if isinstance(z, DualVector) else np.asarray(z, dtype=float)


@dataclass(frozen=True, eq=False)
class WField:
    """Continuation dual vectors w[a, j] in [0, c*]^K, one per observed
    (Player 1 action, next state)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 3:
            raise ValueError(f"WField must be (A, S, K), but got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_states(cls, per_state, n_actions):
        """The field that ignores the observed action."""
        per_state = np.asarray(per_state, dtype=float)
        return cls(np.broadcast_to(per_state, (n_actions,) + per_state.shape))

    @classmethod
    def constant(cls, n_actions, n_states, n_types, value=0.0):
        return cls(np.full((n_actions, n_states, n_types), float(value)))

    @property
    def is_tied(self):
        return bool(np.all(self.w == self.w[:1]))

    def at(self, a, j) -> np.ndarray:
        return self.w[a, j]

    def in_box(self, cstar, tol=BOX_TOL):
        return bool(np.all(self.w >= -tol) and np.all(self.w <= cstar + tol))


class DualValueOracle:
    """Lazy, memoized evaluation of U*(z, i) from the V* envelope."""

    def __init__(
        self,
        envelope: ConcaveEnvelope,
        spec: GameSpec,
        cfg: DualSearchConfig = DualSearchConfig(),
        tol: Tolerances = DEFAULT_TOLERANCES,
        db_file_name: Optional[str] = None,
    ):
        self.envelope = envelope
        self.alpha = spec.alpha
        self.cstar = spec.cstar
        self.n_types = spec.n_types
        self.cfg = cfg
        self.tol = tol
        self.memo = Database(db_file_name, tag=self.cache_tag()).load()
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def cache_tag(self) -> str:
        """Digest of everything a memoized value depends on."""
        digest = hashlib.sha1()
        digest.update(repr((self.alpha, self.cstar, self.cfg.memo_quantum)).encode())
        for cuts in self.envelope.cuts:
            digest.update(np.ascontiguousarray(cuts, dtype=np.float64).tobytes())
        return digest.hexdigest()

    def save(self):
        """Write the memo to its file, if the oracle has one."""
        self.memo.dump()

    def _key(self, z, i):
        q = np.round(z / self.cfg.memo_quantum).astype(np.int64)
        return f"{i}|" + ",".join(str(v) for v in q), q * self.cfg.memo_quantum

    def conjugate(self, z, i) -> Tuple[float, np.ndarray]:
        """(U*(z, i), a maximizing belief)."""
        key, zq = self._key(_as_z(z), i)
        hit = self.memo.get(key)
        if hit is not None:
            return hit[0], np.asarray(hit[1])
        cuts = self.envelope.cuts[i]
        lp = LinearProgram()
        ps = [lp.add_variable() for _ in range(self.n_types)]
        t = lp.add_variable(lower=-math.inf, cost=1.0)
        shifted = cuts - zq[None, :] / self.alpha
        for g in shifted:
            lp.add_constraint([(t, 1.0)] + [(x, -gk) for x, gk in zip(ps, g)], LE, 0.0)
        lp.add_constraint([(x, 1.0) for x in ps], EQ, 1.0)
        sol = solve_lp(lp, self.tol)
        if not sol.optimal:
            raise NumericalFailure(f"Conjugate LP at z={zq}, state {i} ended {sol.status}")
        p = np.clip(sol.x[: self.n_types], 0.0, None)
        p = p / p.sum()
        with self._lock:
            self.memo.commit(key, (sol.objective, p.tolist()))
        return sol.objective, p

    def tangent(self, q: BeliefLike, j: int) -> Optional[np.ndarray]:
        """Dual vector of the active envelope cut at q, if it lies in the box.

        For such z, U*(z, j) + <q, z>/alpha equals V*(q, j) exactly.
        """
        z = self.alpha * self.envelope.active_cut(q, j)
        z = z - z.min()
        if z.max() > self.cstar + BOX_TOL:
            return None
        return np.clip(z, 0.0, self.cstar)

    def objective(self, p, i, z) -> float:
        return self.conjugate(z, i)[0] + float(as_vector(p) @ z) / self.alpha

    def recover(
        self,
        p: BeliefLike,
        i: int,
        cfg: Optional[DualSearchConfig] = None,
        seeds: Sequence[np.ndarray] = (),
    ) -> Tuple[float, DualVector]:
        """min over the box of U*(z, i) + <p, z>/alpha and its arg-min."""
        cfg = self.cfg if cfg is None else cfg
        pv = as_vector(p)
        n_k, cstar = self.n_types, self.cstar
        if cstar <= 0.0:
            z = np.zeros(n_k)
            return self.objective(pv, i, z), DualVector.of(z, cstar)

        def f(z):
            return self.objective(pv, i, np.asarray(z))

        best_z, best_val = None, math.inf
        points = cfg.recover_grid
        if points >= 2:
            while points > 2 and points**n_k > cfg.max_grid_candidates:
                points -= 1
            if points != cfg.recover_grid:
                logger.warning(f"Recover grid shrunk to {points} points per axis to fit the budget")
            space = Space()
            for k in range(n_k):
                space.create_symbol(f"z[{k}]", np.linspace(0.0, cstar, points).tolist())
            cfg_best, best_val, _ = grid_search(
                space, lambda c: f([c[f"z[{k}]"] for k in range(n_k)]), cfg.max_evaluations
            )
            best_z = np.array([cfg_best[f"z[{k}]"] for k in range(n_k)])
            step = cstar / (points - 1)
        else:
            step = cstar / 4.0

        tangent = self.tangent(pv, i)
        candidates = ([tangent] if tangent is not None else []) + [
            np.clip(np.asarray(s, dtype=float), 0.0, cstar) for s in seeds
        ]
        if best_z is None and not candidates:
            candidates = [np.zeros(n_k)]
        for cand in candidates:
            val = f(cand)
            if val < best_val - cfg.improvement_tol:
                best_z, best_val = cand, val

        result = coordinate_descent(
            f,
            best_z,
            0.0,
            cstar,
            step,
            cfg.recover_min_step,
            budget=cfg.max_evaluations,
            tol=cfg.improvement_tol,
            start_value=best_val,
        )
        return result.value, DualVector.of(result.point, cstar)


def conjugate_eval(oracle: DualValueOracle, z, i: int) -> float:
    return oracle.conjugate(z, i)[0]


def recover_value(
    oracle: DualValueOracle, p: BeliefLike, i: int, cfg: Optional[DualSearchConfig] = None
) -> Tuple[float, DualVector]:
    return oracle.recover(p, i, cfg)


def gamma_matrix(
    i: int,
    z,
    w: WField,
    oracle: DualValueOracle,
    agg: DiscountedAggregates,
    spec: GameSpec,
) -> np.ndarray:
    """Payoff matrix of the dual stage game, rows (k, a) in type-major order,
    columns b."""
    z = _as_z(z)
    n_k, n_a, n_s = spec.n_types, spec.n_actions_p1, spec.n_states
    alpha = spec.alpha
    # cont[a, j, k] = U*(w[a, j], j) + w[a, j, k] / alpha
    cont = np.empty((n_a, n_s, n_k))
    for a in range(n_a):
        for j in range(n_s):
            cont[a, j] = oracle.conjugate(w.w[a, j], j)[0] + w.w[a, j] / alpha
    stage = spec.cost[:, i] * agg.m[i][None]  # (K, A, B)
    future = np.einsum("abj,ajk->kab", agg.qhat[i], cont)
    M = stage - z[:, None, None] / alpha + future
    return M.reshape(n_k * n_a, spec.n_actions_p2)


@dataclass(frozen=True, eq=False)
class DualStageSolution:
    w: WField
    nu: np.ndarray
    value: float
    tol: float
    evaluations: int

    def __iter__(self) -> Iterator:
        return iter((self.w, self.nu, self.value))


def _warm_start(i, z, oracle, agg, spec, cfg):
    """Continuation duals tangent at the posteriors of the primal stage saddle
    at the conjugate's maximizing belief."""
    _, p_star = oracle.conjugate(z, i)
    saddle = stage_backup(p_star, i, oracle.envelope, agg, spec, oracle.tol)
    fallback_cfg = cfg.replace(recover_grid=0)
    w = np.empty((spec.n_actions_p1, spec.n_states, spec.n_types))
    for a in range(spec.n_actions_p1):
        q = chi(saddle.phi_star, a)
        if q.off_support:
            q = Belief.from_weights(p_star)
        for j in range(spec.n_states):
            z_aj = oracle.tangent(q, j)
            if z_aj is None:
                _, dv = oracle.recover(q, j, fallback_cfg)
                z_aj = dv.z
            w[a, j] = z_aj
    return w


def _search_directions(shape):
    """Single coordinates, then w[:, j, k] over all actions, then w[:, :, k]."""
    n_a, n_s, n_k = shape
    ret = list(np.eye(n_a * n_s * n_k))
    for j in range(n_s):
        for k in range(n_k):
            block = np.zeros(shape)
            block[:, j, k] = 1.0
            ret.append(block.ravel())
    for k in range(n_k):
        block = np.zeros(shape)
        block[:, :, k] = 1.0
        ret.append(block.ravel())
    return ret


def dual_stage_solve(
    i: int,
    z,
    oracle: DualValueOracle,
    agg: DiscountedAggregates,
    spec: GameSpec,
    search_cfg: Optional[DualSearchConfig] = None,
) -> DualStageSolution:
    """Minimize over continuation fields the value of the dual stage game.

    Candidates come from the tied grid (when within budget) and the warm start;
    coordinate descent then refines over every (a, j, k) coordinate. The
    returned ``tol`` is the error implied by the final search step plus the
    measured distance of the value from U*(z, i), which also carries the
    off-grid error of the envelope.
    """
    cfg = oracle.cfg if search_cfg is None else search_cfg
    z = _as_z(z)
    n_k, n_a, n_s, cstar = spec.n_types, spec.n_actions_p1, spec.n_states, spec.cstar
    shape = (n_a, n_s, n_k)
    n_eval = 0
    games = {}

    def solve(w_arr):
        nonlocal n_eval
        key = w_arr.tobytes()
        if key not in games:
            n_eval += 1
            value, _, nu = solve_matrix_game(
                gamma_matrix(i, z, WField(w_arr), oracle, agg, spec), oracle.tol
            )
            games[key] = (value, nu)
        return games[key]

    def f(w_arr):
        return solve(np.asarray(w_arr).reshape(shape))[0]

    if cstar <= 0.0:
        w_best = np.zeros(shape)
        value, nu = solve(w_best)
        return DualStageSolution(WField(w_best), nu, value, 0.0, n_eval)

    best_w, best_val = None, math.inf
    points = cfg.w_grid
    if points >= 2 and points ** (n_s * n_k) <= cfg.max_grid_candidates:
        space = Space()
        for j in range(n_s):
            for k in range(n_k):
                space.create_symbol(f"w[{j},{k}]", np.linspace(0.0, cstar, points).tolist())

        def tied(c):
            per_state = np.array([[c[f"w[{j},{k}]"] for k in range(n_k)] for j in range(n_s)])
            return np.broadcast_to(per_state, shape).copy()

        cfg_best, best_val, _ = grid_search(space, lambda c: f(tied(c)), cfg.max_evaluations)
        best_w = tied(cfg_best)
        step = cstar / (points - 1)
    else:
        if points >= 2:
            logger.debug(f"Tied grid of {points}^{n_s * n_k} points skipped, over budget")
        step = cstar / 8.0

    warm = _warm_start(i, z, oracle, agg, spec, cfg)
    warm_val = f(warm)
    if warm_val < best_val - cfg.improvement_tol:
        best_w, best_val = warm, warm_val

    result = coordinate_descent(
        f,
        best_w.ravel(),
        0.0,
        cstar,
        step,
        cstar * cfg.w_min_step_frac,
        budget=cfg.max_evaluations,
        tol=cfg.improvement_tol,
        start_value=best_val,
        directions=_search_directions(shape),
    )
    w_star = result.point.reshape(shape)
    value, nu = solve(w_star)
    search_tol = 2.0 * agg.beta_bound * result.final_step / spec.alpha
    gap = abs(value - oracle.conjugate(z, i)[0])
    stage_tol = search_tol + gap
    logger.debug(
        f"Dual stage at state {i}: value {value:.10g}, {n_eval} games, "
        f"search tol {search_tol:.3e}, gap to U* {gap:.3e}"
    )
    return DualStageSolution(WField(w_star), nu, value, stage_tol, n_eval)


def p2_init(
    oracle: DualValueOracle, p: BeliefLike, i0: int, cfg: Optional[DualSearchConfig] = None
) -> DualVector:
    """The dual vector minimizing U*(z, i0) + <p, z>/alpha."""
    return oracle.recover(p, i0, cfg)[1]


class P2Engine(Engine):
    """Markov in (state, dual vector)."""

    player = 2

    def __init__(
        self,
        oracle: DualValueOracle,
        agg: DiscountedAggregates,
        spec: GameSpec,
        zeta,
        cfg: Optional[DualSearchConfig] = None,
        cache: Optional[dict] = None,
    ):
        super().__init__()
        self.oracle = oracle
        self.agg = agg
        self.spec = spec
        self.cfg = oracle.cfg if cfg is None else cfg
        self.zeta = zeta if isinstance(zeta, DualVector) else DualVector.of(zeta, spec.cstar)
        if not self.zeta.in_box:
            raise ValueError(f"Initial dual vector {self.zeta} is outside the box")
        self.solution: Optional[DualStageSolution] = None
        self._state = None
        self.cache = {} if cache is None else cache

    @classmethod
    def from_belief(cls, oracle, agg, spec, p, i0, cfg=None, init_cfg=None):
        return cls(oracle, agg, spec, p2_init(oracle, p, i0, init_cfg), cfg)

    @property
    def nu(self):
        return None if self.solution is None else self.solution.nu

    @protocol_step()
    def decide(self, i: int) -> np.ndarray:
        key = (i, self.zeta.z.tobytes())
        sol = self.cache.get(key)
        if sol is None:
            sol = dual_stage_solve(i, self.zeta, self.oracle, self.agg, self.spec, self.cfg)
            self.cache[key] = sol
        self.solution = sol
        self._state = i
        return sol.nu.copy()

    @protocol_step(observe=True)
    def observe(self, j: int, a: Optional[int] = None) -> DualVector:
        w = self.solution.w
        if a is None:
            if not w.is_tied:
                self.error = True
                raise ProtocolError("The continuation depends on Player 1's action; pass a")
            a = 0
        self.trace.append(
            {
                "n": self.epoch,
                "state": self.spec.states[self._state],
                "zeta": self.zeta.z.tolist(),
                "nu": self.solution.nu.tolist(),
                "value": self.solution.value,
                "w": w.w.tolist(),
                "next_state": self.spec.states[j],
            }
        )
        self.zeta = DualVector.of(w.at(a, j), self.spec.cstar)
        self.epoch += 1
        return self.zeta


def p2_decide(engine: P2Engine, i: int) -> np.ndarray:
    return engine.decide(i)


def p2_observe(engine: P2Engine, j: int, a: Optional[int] = None) -> DualVector:
    return engine.observe(j, a)


def dual_p1_policy(oracle: DualValueOracle, z, i: int, agg: DiscountedAggregates, spec: GameSpec):
    """Player 1 in the dual game: pick the type law maximizing
    V*(p, i) - <p, z>/alpha, then play the primal engine from it."""
    _, rho = oracle.conjugate(z, i)
    rho = Belief.from_weights(rho)
    return rho, P1Engine(oracle.envelope, spec, agg, rho, oracle.tol)


def conjugate_table(oracle: DualValueOracle, i: int, points: int) -> List[Tuple[np.ndarray, float]]:
    """U*(z, i) over a grid of the box."""
    axis = np.linspace(0.0, oracle.cstar, points)
    space = Space()
    for k in range(oracle.n_types):
        space.create_symbol(f"z[{k}]", axis.tolist())
    ret = []
    for cfg in space.enumerate():
        z = np.array([cfg[f"z[{k}]"] for k in range(oracle.n_types)])
        ret.append((z, oracle.conjugate(z, i)[0]))
    return ret


def fenchel_report(
    oracle: DualValueOracle,
    agg: DiscountedAggregates,
    spec: GameSpec,
    rng,
    n_beliefs: int = 20,
    n_duals: int = 10,
    cfg: Optional[DualSearchConfig] = None,
) -> dict:
    """Round-trip and dual-equation residuals at random samples."""
    round_trip, residual, stage_tol = 0.0, 0.0, 0.0
    for _ in range(n_beliefs):
        p = rng.dirichlet(np.ones(spec.n_types))
        i = int(rng.integers(spec.n_states))
        val, _ = oracle.recover(p, i, cfg)
        round_trip = max(round_trip, abs(val - oracle.envelope.evaluate(p, i)))
    for _ in range(n_duals):
        z = rng.uniform(0.0, spec.cstar, spec.n_types)
        i = int(rng.integers(spec.n_states))
        sol = dual_stage_solve(i, z, oracle, agg, spec, cfg)
        residual = max(residual, abs(sol.value - oracle.conjugate(z, i)[0]))
        stage_tol = max(stage_tol, sol.tol)
    return {
        "round_trip_max": round_trip,
        "equation_residual_max": residual,
        "dual_stage_tol": stage_tol,
    }
