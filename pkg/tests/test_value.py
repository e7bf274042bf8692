# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""
Test cut envelopes, the stage backup and value iteration.
"""
import itertools
import math

import numpy as np
import pytest

from smgi import (
    Belief,
    ConcaveEnvelope,
    GridInterpolant,
    SolveConfig,
    certify_assumption1,
    discounted_aggregates,
    error_budget,
    iteration_floor,
    query_table,
    simplex_grid,
    stage_backup,
    stage_operator,
    value_iterate,
)
from smgi.belief import random_belief
from smgi.oracle import brute_value, lipschitz_audit

from .reference import matrix_game, single_type_shapley, stage_matrix


def test_envelope():
    env = ConcaveEnvelope((np.array([[1.0, 0.0], [0.0, 1.0]]),))
    assert env.evaluate([0.3, 0.7], 0) == pytest.approx(0.3)
    assert env.perspective([0.0, 0.0], 0) == 0.0
    assert env.perspective([0.6, 1.4], 0) == pytest.approx(0.6)
    assert np.array_equal(env.active_cut([0.3, 0.7], 0), [1.0, 0.0])
    assert env.n_cuts() == [2]


def test_envelope_merge_and_prune():
    cuts = np.array([[1.0, 0.0], [1.0, 1e-14], [0.0, 1.0], [2.0, 2.0]])
    env = ConcaveEnvelope.from_cuts([cuts])
    assert env.n_cuts() == [3]
    assert env.pruned().n_cuts() == [2]
    zero = ConcaveEnvelope.zero(2, 3)
    assert zero.evaluate([0.2, 0.3, 0.5], 1) == 0.0
    with pytest.raises(ValueError):
        ConcaveEnvelope((np.zeros((0, 2)),))


def test_grid_majorant():
    points = [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]]
    tent = GridInterpolant(points, [[0.0, 1.0, 0.0]])
    assert tent.evaluate([0.25, 0.75], 0) == pytest.approx(0.5, abs=1e-10)
    assert tent.perspective([0.5, 1.5], 0) == pytest.approx(1.0, abs=1e-10)
    # Non-concave data is lifted to its majorant.
    dip = GridInterpolant(points, [[0.0, 0.2, 1.0]])
    assert dip.evaluate([0.5, 0.5], 0) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        GridInterpolant(points, [[0.0, 1.0]])

    env = tent.to_envelope()
    for x, v in zip(points, [0.0, 1.0, 0.0]):
        assert np.all(env.cuts[0] @ x >= v - 1e-8)
        assert env.evaluate(x, 0) == pytest.approx(v, abs=1e-8)
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = random_belief(rng, 2)
        assert env.evaluate(p, 0) == pytest.approx(tent.evaluate(p, 0), abs=1e-8)


def test_stage_backup_constant(constant_spec):
    """Against the zero continuation, a constant cost pays c0 * m."""
    agg = discounted_aggregates(constant_spec)
    zero = ConcaveEnvelope.zero(2, 2)
    for p in ([0.5, 0.5], [1.0, 0.0], [0.2, 0.8]):
        saddle = stage_backup(Belief(p), 0, zero, agg, constant_spec)
        assert saddle.value == pytest.approx(0.3, abs=1e-10)
        assert np.allclose(saddle.phi_star.sum(axis=1), p, atol=1e-10)
        assert saddle.nu_star.sum() == pytest.approx(1.0)


def test_stage_backup_zero_continuation(desk_spec):
    """With no continuation the stage is the game over pure type profiles
    weighted by the belief."""
    agg = discounted_aggregates(desk_spec)
    zero = ConcaveEnvelope.zero(2, 2)
    n_a, n_b = desk_spec.n_actions_p1, desk_spec.n_actions_p2
    for p, i in (([0.3, 0.7], 0), ([0.6, 0.4], 1), ([0.5, 0.5], 0)):
        M = np.zeros((n_a**2, n_b))
        for r, (a0, a1) in enumerate(itertools.product(range(n_a), repeat=2)):
            for b in range(n_b):
                M[r, b] = sum(
                    p[k] * desk_spec.cost[k, i, a, b] * agg.m[i, a, b]
                    for k, a in enumerate((a0, a1))
                )
        ref, _ = matrix_game(M)
        assert stage_backup(Belief(p), i, zero, agg, desk_spec).value == pytest.approx(ref, abs=1e-9)


def test_backup_saddle_and_cut(solved_desk):
    """The returned mixes form a saddle of the stage operator, and the cut
    majorizes the backup everywhere."""
    s = solved_desk
    rng = np.random.default_rng(2)
    env = s.envelope
    for _ in range(5):
        p = random_belief(rng, 2)
        i = int(rng.integers(2))
        saddle = stage_backup(p, i, env, s.agg, s.spec)
        for _ in range(5):
            mu = rng.dirichlet(np.ones(2), size=2)
            nu = rng.dirichlet(np.ones(2))
            assert stage_operator(p, i, saddle.mu_star, nu, env, s.agg, s.spec) >= saddle.value - 1e-7
            assert stage_operator(p, i, mu, saddle.nu_star, env, s.agg, s.spec) <= saddle.value + 1e-7
        assert saddle.cut @ p.p == pytest.approx(saddle.value, abs=1e-8)
        for _ in range(5):
            q = random_belief(rng, 2)
            assert saddle.cut @ q.p >= stage_backup(q, i, env, s.agg, s.spec).value - 1e-7


def test_canonical_selection(constant_spec):
    """Among equally good mixes the canonical one prefers low action indices."""
    agg = discounted_aggregates(constant_spec)
    zero = ConcaveEnvelope.zero(2, 2)
    saddle = stage_backup(Belief([0.4, 0.6]), 0, zero, agg, constant_spec, canonical=True)
    assert np.allclose(saddle.mu_star, [[1.0, 0.0], [1.0, 0.0]], atol=1e-9)


def test_error_budget():
    assert error_budget(0, 0.5, 1.0, 1.0) == pytest.approx(0.5)
    assert error_budget(10, 0.9221, 2.0, 0.5) == pytest.approx(4.0 * 0.9221**11, abs=1e-12)
    assert error_budget(10, 0.9221, 2.0, 0.5) == pytest.approx(1.639148, abs=1e-5)
    with pytest.raises(ValueError):
        error_budget(-1, 0.5, 1.0, 1.0)
    n = iteration_floor(1e-4, 1.0, 1.0, 0.75)
    assert error_budget(n - 1, 0.75, 1.0, 1.0) <= 1e-4


def test_value_iterate_constant(solved_constant):
    s = solved_constant
    assert s.report.envelope.evaluate([0.3, 0.7], 1) == pytest.approx(0.6, abs=1e-6)
    assert np.allclose(s.report.grid_values[-1], 0.6, atol=1e-6)
    assert s.report.iterations >= iteration_floor(1e-4, 0.6, 1.0, s.cert.beta)
    assert s.report.sup_change <= 1e-4 * (1.0 - s.cert.beta)


def test_value_iterate_monotone(solved_desk):
    """Iterates from zero increase on the grid."""
    history = solved_desk.report.grid_values
    for prev, cur in zip(history, history[1:]):
        assert np.all(cur >= prev - 1e-8)


def test_value_iterate_s1_converges(solved_s1):
    """Mesh 10 on the one-state instance settles instead of cycling, with
    grid values that never decrease and an envelope equal to the majorant
    of the last sweep."""
    s = solved_s1
    report = s.report
    assert report.sup_change <= report.stop_tol * (1.0 - s.cert.beta)
    history = report.grid_values
    for prev, cur in zip(history, history[1:]):
        assert np.all(cur >= prev - 1e-8)
    grid = simplex_grid(2, 10)
    last = GridInterpolant(np.array([p.p for p in grid]), history[-1])
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = random_belief(rng, 2)
        assert s.envelope.evaluate(p, 0) == pytest.approx(last.evaluate(p, 0), abs=1e-8)
    # Belief (0.6, 0.4) sits at index 6 of the ascending grid.
    assert np.allclose(grid[6].p, [0.6, 0.4])
    assert abs(history[-1][0, 6] - history[-2][0, 6]) <= report.stop_tol


def test_concave_and_lipschitz(solved_desk):
    s = solved_desk
    rng = np.random.default_rng(4)
    for j in range(2):
        for _ in range(20):
            p, q = random_belief(rng, 2), random_belief(rng, 2)
            lam = rng.random()
            mid = lam * p.p + (1 - lam) * q.p
            avg = lam * s.envelope.evaluate(p, j) + (1 - lam) * s.envelope.evaluate(q, j)
            assert s.envelope.evaluate(mid, j) >= avg - 1e-12
        grid = simplex_grid(2, 8)
        values = [s.envelope.evaluate(p, j) for p in grid]
        assert lipschitz_audit(values, grid, s.spec.cstar / s.spec.alpha) <= 1.05


def test_fixed_point_on_grid(solved_desk):
    """One more backup moves grid values by no more than the stop tolerance."""
    s = solved_desk
    for p in simplex_grid(2, 8):
        for i in range(2):
            val = stage_backup(p, i, s.envelope, s.agg, s.spec).value
            assert val == pytest.approx(s.envelope.evaluate(p, i), abs=s.report.stop_tol)


def test_vertex_reduction(solved_desk):
    """At a vertex belief the value is the complete-information value of that type."""
    s = solved_desk
    ref = single_type_shapley(s.spec.cost[0], s.agg.qhat, s.agg.m, 120)[-1]
    tol = s.report.stop_tol + s.report.tail_bound + 1e-7
    for i in range(2):
        assert s.envelope.evaluate([1.0, 0.0], i) == pytest.approx(ref[i], abs=tol)


def test_single_type(solved_single):
    s = solved_single
    ref = single_type_shapley(s.spec.cost[0], s.agg.qhat, s.agg.m, 120)[-1]
    tol = s.report.stop_tol + s.report.tail_bound + 1e-7
    for i in range(2):
        assert s.envelope.evaluate([1.0], i) == pytest.approx(ref[i], abs=tol)
    # The stage mix secures the value of the complete-information stage game.
    saddle = stage_backup([1.0], 0, s.envelope, s.agg, s.spec)
    G = stage_matrix(s.spec.cost[0], s.agg.qhat, s.agg.m, ref, 0)
    assert (saddle.mu_star[0] @ G).min() >= ref[0] - 2.0 * tol


def test_iterates_match_enumeration(solved_s1):
    """The first two iterates equal the exact finite-horizon values."""
    s = solved_s1
    grid = simplex_grid(2, 10)
    for n in (0, 1):
        table = s.report.grid_values[n]
        for idx in range(0, len(grid), 2):
            ref = brute_value(grid[idx], 0, n, s.spec, s.agg)
            assert table[0, idx] == pytest.approx(ref, abs=1e-6)


def test_value_iterate_rejects_bad_config(desk_s1_spec):
    agg = discounted_aggregates(desk_s1_spec)
    cert = certify_assumption1(desk_s1_spec)
    with pytest.raises(ValueError):
        value_iterate(desk_s1_spec, agg, cert, mesh=0)
    with pytest.raises(ValueError):
        SolveConfig(stop_tol=0.0)


def test_query_table(solved_constant):
    rows = query_table(solved_constant.envelope, 2)
    assert len(rows) == 6
    assert all(math.isclose(v, 0.6, abs_tol=1e-6) for _, _, v in rows)
    assert [j for _, j, _ in rows] == [0, 0, 0, 1, 1, 1]


if __name__ == "__main__":
    pytest.main([__file__])
