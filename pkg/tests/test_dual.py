# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""
Test the dual value function, the dual stage game and the uninformed
player's engine.
"""
import pickle

import numpy as np
import pytest

from smgi import (
    ConcaveEnvelope,
    DualSearchConfig,
    DualStageSolution,
    DualValueOracle,
    DualVector,
    P2Engine,
    ProtocolError,
    WField,
    conjugate_eval,
    dual_stage_solve,
    gamma_matrix,
    p2_decide,
    p2_init,
    p2_observe,
    recover_value,
    simplex_grid,
)
from smgi.belief import random_belief
from smgi.dual import conjugate_table, dual_p1_policy, fenchel_report

from .reference import stage_matrix, single_type_shapley

FAST = DualSearchConfig(recover_grid=9, w_grid=0, w_min_step_frac=1e-2)


def make_oracle(solved, cfg=FAST):
    return DualValueOracle(solved.envelope, solved.spec, cfg)


def test_conjugate_constant(solved_constant):
    oracle = make_oracle(solved_constant)
    for z in ([0.0, 0.0], [0.2, 0.5], [0.6, 0.1]):
        for i in range(2):
            assert conjugate_eval(oracle, z, i) == pytest.approx(0.6 - min(z), abs=1e-9)


def test_conjugate_at_zero(solved_s1):
    """U*(0) is the maximum of V* and is attained at the returned belief."""
    oracle = make_oracle(solved_s1)
    value, p = oracle.conjugate(np.zeros(2), 0)
    assert value == pytest.approx(solved_s1.envelope.evaluate(p, 0), abs=1e-9)
    grid_max = max(solved_s1.envelope.evaluate(q, 0) for q in simplex_grid(2, 100))
    assert value >= grid_max - 1e-10


def test_translation(solved_s1):
    """Shifting z by c * 1 shifts U* by -c / alpha."""
    oracle = make_oracle(solved_s1)
    z = np.array([0.25, 0.5])
    shift = 0.125
    lhs = conjugate_eval(oracle, z + shift, 0)
    assert lhs == pytest.approx(conjugate_eval(oracle, z, 0) - shift, abs=1e-9)


def test_convex_lipschitz(solved_desk):
    oracle = make_oracle(solved_desk)
    rng = np.random.default_rng(8)
    for _ in range(30):
        z1, z2 = rng.uniform(0.0, 1.0, 2), rng.uniform(0.0, 1.0, 2)
        i = int(rng.integers(2))
        u1, u2 = conjugate_eval(oracle, z1, i), conjugate_eval(oracle, z2, i)
        assert conjugate_eval(oracle, 0.5 * (z1 + z2), i) <= 0.5 * (u1 + u2) + 1e-9
        assert abs(u1 - u2) <= np.abs(z1 - z2).max() + 1e-9


def test_memo(solved_s1, tmp_path):
    """Evaluations are memoized, persisted on save, reloaded for the same
    envelope, and survive pickling."""
    db = str(tmp_path / "memo.json")
    oracle = DualValueOracle(solved_s1.envelope, solved_s1.spec, FAST, db_file_name=db)
    first, p_first = oracle.conjugate([0.3, 0.4], 0)
    assert len(oracle.memo) == 1
    assert oracle.conjugate([0.3, 0.4], 0)[0] == first
    assert len(oracle.memo) == 1
    clone = pickle.loads(pickle.dumps(oracle))
    assert len(clone.memo) == 1
    assert clone.conjugate([0.3, 0.4], 0)[0] == first

    oracle.save()
    reloaded = DualValueOracle(solved_s1.envelope, solved_s1.spec, FAST, db_file_name=db)
    assert reloaded.memo.n_loaded == 1
    value, p = reloaded.conjugate([0.3, 0.4], 0)
    assert value == first
    assert np.allclose(p, p_first)
    # A different envelope does not reuse the file.
    other = DualValueOracle(
        ConcaveEnvelope.zero(2, 2), solved_s1.spec, FAST, db_file_name=db
    )
    assert len(other.memo) == 0


def test_recover_constant(solved_constant):
    oracle = make_oracle(solved_constant)
    for p in ([0.5, 0.5], [0.1, 0.9], [1.0, 0.0]):
        value, dv = recover_value(oracle, p, 1)
        assert value == pytest.approx(0.6, abs=1e-6)
        assert dv.in_box


def test_round_trip(solved_s1):
    """Recovering V* from U* reproduces the envelope."""
    oracle = make_oracle(solved_s1)
    rng = np.random.default_rng(6)
    beliefs = [random_belief(rng, 2) for _ in range(5)] + [[1.0, 0.0], [0.0, 1.0]]
    for p in beliefs:
        value, dv = oracle.recover(p, 0)
        assert value == pytest.approx(solved_s1.envelope.evaluate(p, 0), abs=1e-3)
        assert dv.in_box


def test_tangent(solved_s1):
    oracle = make_oracle(solved_s1)
    p = [0.3, 0.7]
    z = oracle.tangent(p, 0)
    assert z is not None
    assert oracle.objective(p, 0, z) == pytest.approx(solved_s1.envelope.evaluate(p, 0), abs=1e-9)


def test_recover_shrinks_grid(solved_s1):
    cfg = FAST.replace(recover_grid=20, max_grid_candidates=100)
    oracle = make_oracle(solved_s1, cfg)
    value, _ = oracle.recover([0.5, 0.5], 0)
    assert value == pytest.approx(solved_s1.envelope.evaluate([0.5, 0.5], 0), abs=1e-3)


def test_gamma_constant(solved_constant):
    oracle = make_oracle(solved_constant)
    s = solved_constant
    M = gamma_matrix(0, np.zeros(2), WField.constant(2, 2, 2), oracle, s.agg, s.spec)
    assert M.shape == (4, 2)
    assert np.allclose(M, 0.6, atol=1e-9)


def test_gamma_entries(solved_desk):
    """Rows are (type, action) in type-major order."""
    s = solved_desk
    oracle = make_oracle(s)
    rng = np.random.default_rng(12)
    w = WField(rng.uniform(0.0, 1.0, (2, 2, 2)))
    z = rng.uniform(0.0, 1.0, 2)
    i = 1
    M = gamma_matrix(i, z, w, oracle, s.agg, s.spec)
    for k in range(2):
        for a in range(2):
            for b in range(2):
                expected = s.spec.cost[k, i, a, b] * s.agg.m[i, a, b] - z[k]
                for j in range(2):
                    u = conjugate_eval(oracle, w.at(a, j), j)
                    expected += s.agg.qhat[i, a, b, j] * (u + w.at(a, j)[k])
                assert M[k * 2 + a, b] == pytest.approx(expected, abs=1e-12)


def test_dual_stage_constant(solved_constant):
    s = solved_constant
    oracle = make_oracle(s)
    for z in ([0.0, 0.0], [0.3, 0.1]):
        sol = dual_stage_solve(1, z, oracle, s.agg, s.spec)
        assert sol.value == pytest.approx(0.6 - min(z), abs=1e-7)
        assert sol.w.in_box(s.spec.cstar)
        w, nu, value = sol
        assert nu.sum() == pytest.approx(1.0)
        assert value == sol.value


def test_dual_equation(solved_desk):
    """No continuation field beats U*, and the searched value lands within
    its reported tolerance, which stays small."""
    s = solved_desk
    oracle = make_oracle(s, DualSearchConfig(w_grid=0))
    rng = np.random.default_rng(13)
    for _ in range(10):
        z = rng.uniform(0.0, s.spec.cstar, 2)
        i = int(rng.integers(2))
        sol = dual_stage_solve(i, z, oracle, s.agg, s.spec)
        u = conjugate_eval(oracle, z, i)
        assert sol.value >= u - 1e-6
        assert sol.value <= u + sol.tol
        assert sol.tol <= 5e-3


def test_dual_stage_grid(solved_s1):
    """The tied grid seeds the search when it fits the budget."""
    s = solved_s1
    oracle = make_oracle(s, FAST.replace(w_grid=3))
    sol = dual_stage_solve(0, [0.2, 0.7], oracle, s.agg, s.spec)
    assert sol.evaluations >= 9
    u = conjugate_eval(oracle, [0.2, 0.7], 0)
    assert u - 1e-6 <= sol.value <= u + sol.tol


def test_single_type_dual(solved_single):
    """With one type the continuation drops out and the mix is the
    complete-information minimizer's."""
    s = solved_single
    oracle = make_oracle(s)
    ref = single_type_shapley(s.spec.cost[0], s.agg.qhat, s.agg.m, 120)[-1]
    tol = s.report.stop_tol + s.report.tail_bound + 1e-7
    z = np.array([0.3])
    sol = dual_stage_solve(0, z, oracle, s.agg, s.spec)
    assert sol.value == pytest.approx(ref[0] - 0.3, abs=2.0 * tol)
    G = stage_matrix(s.spec.cost[0], s.agg.qhat, s.agg.m, ref, 0)
    assert (G @ sol.nu).max() <= ref[0] + 2.0 * tol


def test_p2_init(solved_constant, solved_s1):
    oracle = make_oracle(solved_constant)
    z = p2_init(oracle, [0.4, 0.6], 0)
    assert z.in_box
    assert oracle.objective([0.4, 0.6], 0, z.z) == pytest.approx(0.6, abs=1e-6)

    oracle = make_oracle(solved_s1)
    z = p2_init(oracle, [1.0, 0.0], 0)
    value = conjugate_eval(oracle, z, 0) + z.z[0] / solved_s1.spec.alpha
    assert value == pytest.approx(solved_s1.envelope.evaluate([1.0, 0.0], 0), abs=1e-3)


def test_wfield():
    tied = WField.from_states(np.array([[0.1, 0.2], [0.3, 0.4]]), 3)
    assert tied.w.shape == (3, 2, 2)
    assert tied.is_tied
    assert np.array_equal(tied.at(2, 1), [0.3, 0.4])
    w = np.zeros((2, 1, 2))
    w[1, 0, 0] = 0.5
    assert not WField(w).is_tied
    assert WField(w).in_box(0.5)
    assert not WField(w).in_box(0.4)
    with pytest.raises(ValueError):
        WField(np.zeros((2, 2)))


def test_dual_vector():
    assert DualVector.of([0.0, 1.0], 1.0).in_box
    assert not DualVector.of([-0.1, 0.5], 1.0).in_box
    with pytest.raises(ValueError):
        DualVector.of([np.nan, 0.0], 1.0)


def test_p2_engine(solved_constant):
    s = solved_constant
    oracle = make_oracle(s)
    engine = P2Engine.from_belief(oracle, s.agg, s.spec, [0.5, 0.5], 0)
    nu = p2_decide(engine, 0)
    assert nu.sum() == pytest.approx(1.0)
    zeta = p2_observe(engine, 1, a=0)
    assert zeta.in_box
    assert engine.epoch == 1
    assert engine.trace[0]["next_state"] == "s1"
    # Same (state, dual vector): answered from the shared cache.
    twin = engine.clone()
    twin.decide(1)
    assert len(engine.cache) == 2


def test_p2_engine_protocol(solved_constant):
    s = solved_constant
    oracle = make_oracle(s)
    engine = P2Engine(oracle, s.agg, s.spec, np.zeros(2))
    with pytest.raises(ProtocolError):
        engine.observe(0, a=0)

    engine = P2Engine(oracle, s.agg, s.spec, np.zeros(2))
    engine.decide(0)
    w = np.zeros((2, 2, 2))
    w[1] = 0.1
    engine.solution = DualStageSolution(WField(w), np.array([0.5, 0.5]), 0.6, 0.0, 0)
    with pytest.raises(ProtocolError):
        engine.observe(0)
    assert engine.error

    engine = P2Engine(oracle, s.agg, s.spec, np.zeros(2))
    engine.decide(0)
    engine.solution = DualStageSolution(
        WField.constant(2, 2, 2, 0.2), np.array([0.5, 0.5]), 0.6, 0.0, 0
    )
    assert np.allclose(engine.observe(1).z, 0.2)

    with pytest.raises(ValueError):
        P2Engine(oracle, s.agg, s.spec, np.array([2.0, 0.0]))


def test_dual_p1_policy(solved_constant):
    s = solved_constant
    oracle = make_oracle(s)
    rho, engine = dual_p1_policy(oracle, [0.4, 0.1], 0, s.agg, s.spec)
    # The maximizer puts its mass on the type with the smallest z.
    assert rho[1] == pytest.approx(1.0)
    assert engine.decide(0).shape == (2, 2)


def test_conjugate_table_and_report(solved_constant):
    s = solved_constant
    oracle = make_oracle(s)
    table = conjugate_table(oracle, 0, 3)
    assert len(table) == 9
    for z, value in table:
        assert value == pytest.approx(0.6 - z.min(), abs=1e-9)
    report = fenchel_report(oracle, s.agg, s.spec, np.random.default_rng(0), n_beliefs=3, n_duals=2)
    assert report["round_trip_max"] <= 1e-6
    assert report["equation_residual_max"] <= report["dual_stage_tol"] + 1e-7


if __name__ == "__main__":
    pytest.main([__file__])
