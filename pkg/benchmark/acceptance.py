# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Acceptance runs at desk scale: solve an instance, then check it against
the brute-force oracle, the dual side, both engines' exploitability and
Monte Carlo play. Each check prints one tab-separated line."""

import argparse
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from smgi import (
    DualSearchConfig,
    DualValueOracle,
    FixedP2Engine,
    P1Engine,
    P2Engine,
    SolveConfig,
    certify_assumption1,
    discounted_aggregates,
    error_budget,
    load_spec,
    simplex_grid,
    stage_backup,
    value_iterate,
)
from smgi.dual import dual_stage_solve, fenchel_report
from smgi.logger import get_logger
from smgi.oracle import best_response_p1, best_response_p2, brute_value
from smgi.sim import EnginePair, monte_carlo_value

logger = get_logger()

CHECKS = {}


def register_check(name):
    def decorator(fn):
        CHECKS[name] = fn
        return fn

    return decorator


@dataclass
class Exp:
    name: str  # Experiment name
    spec: str  # Instance file under instances/
    mesh: int  # Belief grid resolution
    tol: float  # Stopping tolerance eps0
    horizon: int  # Depth N of the best responses
    episodes: int  # Monte Carlo episodes
    checks: List[str] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.spec_obj = load_spec(self.spec)
        self.agg = discounted_aggregates(self.spec_obj)
        self.cert = certify_assumption1(self.spec_obj)
        self.report = None
        self.results: Dict[str, tuple] = {}

    @property
    def envelope(self):
        return self.report.envelope

    def solve(self):
        tic = time.time()
        self.report = value_iterate(
            self.spec_obj, self.agg, self.cert, config=SolveConfig(mesh=self.mesh, stop_tol=self.tol)
        )
        threshold = self.tol * (1.0 - self.cert.beta)
        self.results["solve"] = (self.report.sup_change, threshold, self.report.sup_change <= threshold, time.time() - tic)

    def run(self):
        self.solve()
        for name in self.checks:
            tic = time.time()
            measured, bound, ok = CHECKS[name](self)
            self.results[name] = (measured, bound, ok, time.time() - tic)

    def print_results(self, append_to=""):
        for name, (measured, bound, ok, elapsed) in self.results.items():
            line = f"{self.name}\t{name}\t{measured:.6g}\t{bound:.6g}\t{'PASS' if ok else 'FAIL'}\t{elapsed:.1f}"
            print(line)
            if append_to:
                with open(append_to, "a") as filep:
                    filep.write(f"{line}\n")


@register_check("constant")
def check_constant(exp):
    c0 = float(exp.spec_obj.cost.flat[0])
    err = max(
        abs(exp.envelope.evaluate(p, j) - c0 / exp.spec_obj.alpha)
        for j in range(exp.spec_obj.n_states)
        for p in simplex_grid(exp.spec_obj.n_types, exp.mesh)
    )
    return err, 1e-6, err <= 1e-6


@register_check("oracle")
def check_oracle(exp):
    """Iterates 0 and 1 against brute-force values on the grid."""
    spec = exp.spec_obj
    grid = simplex_grid(spec.n_types, 10)
    report = value_iterate(spec, exp.agg, exp.cert, config=SolveConfig(mesh=10, stop_tol=exp.tol))
    err = 0.0
    for n in (0, 1):
        for idx, p in enumerate(grid):
            err = max(err, abs(report.grid_values[n][0, idx] - brute_value(p, 0, n, spec, exp.agg)))
    return err, 1e-6, err <= 1e-6


@register_check("residual")
def check_residual(exp):
    rng = np.random.default_rng(exp.seed)
    spec = exp.spec_obj
    grid = simplex_grid(spec.n_types, exp.mesh)
    err = 0.0
    for idx in rng.choice(len(grid), size=min(20, len(grid)), replace=False):
        p = grid[idx]
        i = int(rng.integers(spec.n_states))
        err = max(err, abs(stage_backup(p, i, exp.envelope, exp.agg, spec).value - exp.envelope.evaluate(p, i)))
    bound = exp.tol + 1e-6
    return err, bound, err <= bound


@register_check("fenchel")
def check_fenchel(exp):
    oracle = DualValueOracle(exp.envelope, exp.spec_obj)
    out = fenchel_report(oracle, exp.agg, exp.spec_obj, np.random.default_rng(exp.seed), 20, 0)
    return out["round_trip_max"], 1e-3, out["round_trip_max"] <= 1e-3


@register_check("dual_equation")
def check_dual_equation(exp):
    spec = exp.spec_obj
    oracle = DualValueOracle(exp.envelope, spec)
    rng = np.random.default_rng(exp.seed)
    err, tol = 0.0, 0.0
    for _ in range(10):
        z = rng.uniform(0.0, spec.cstar, spec.n_types)
        i = int(rng.integers(spec.n_states))
        sol = dual_stage_solve(i, z, oracle, exp.agg, spec)
        err = max(err, abs(sol.value - oracle.conjugate(z, i)[0]))
        tol = max(tol, sol.tol)
    return err, tol, err <= tol and tol <= 5e-3


def _point(exp):
    return exp.spec_obj.initial_belief, exp.spec_obj.initial_state


@register_check("exploit_p1")
def check_exploit_p1(exp):
    """Player 2 best-responds to the informed engine."""
    spec = exp.spec_obj
    p, i = _point(exp)
    engine = P1Engine(exp.envelope, spec, exp.agg, belief=p)
    lo, _ = best_response_p2(engine, p, i, exp.horizon, spec, exp.agg)
    slack = error_budget(exp.horizon, exp.cert, spec.cstar, spec.alpha) + exp.tol + 1e-3
    gap = exp.envelope.evaluate(p, i) - lo
    return gap, slack, gap <= slack


@register_check("exploit_p2")
def check_exploit_p2(exp):
    """Player 1 best-responds to the dual engine."""
    spec = exp.spec_obj
    p, i = _point(exp)
    oracle = DualValueOracle(exp.envelope, spec, DualSearchConfig())
    engine = P2Engine.from_belief(oracle, exp.agg, spec, p, i)
    _, hi = best_response_p1(engine, p, i, exp.horizon, spec, exp.agg, beta=exp.cert.beta)
    stage_tol = max((sol.tol for sol in engine.cache.values()), default=0.0)
    slack = error_budget(exp.horizon, exp.cert, spec.cstar, spec.alpha) + exp.tol + stage_tol + 1e-3
    gap = hi - exp.envelope.evaluate(p, i)
    return gap, slack, gap <= slack


@register_check("simulate")
def check_simulate(exp):
    spec = exp.spec_obj
    p, i = _point(exp)
    oracle = DualValueOracle(exp.envelope, spec)
    p2 = P2Engine.from_belief(oracle, exp.agg, spec, p, i)
    pair = EnginePair(P1Engine(exp.envelope, spec, exp.agg, belief=p), p2)
    summary = monte_carlo_value(spec, exp.agg, pair, exp.episodes, exp.seed, i0=i, p=p)
    stage_tol = max((sol.tol for sol in p2.cache.values()), default=0.0)
    bound = 3.0 * summary.stderr + summary.residual_max + exp.tol + stage_tol
    gap = abs(summary.mean - exp.envelope.evaluate(p, i))
    return gap, bound, gap <= bound


@register_check("linearity")
def check_linearity(exp):
    """The Monte Carlo value under a prior matches the prior-weighted values
    with the type forced, for the solved engine against uniform play."""
    spec = exp.spec_obj
    p, i = _point(exp)
    pair = EnginePair(P1Engine(exp.envelope, spec, exp.agg, belief=p), FixedP2Engine.uniform(spec.n_actions_p2))
    mixed = monte_carlo_value(spec, exp.agg, pair, exp.episodes, exp.seed, i0=i, p=p)
    forced = [
        monte_carlo_value(spec, exp.agg, pair, exp.episodes, exp.seed + 1 + k, i0=i, p=p, forced_type=k)
        for k in range(spec.n_types)
    ]
    combined = float(np.dot(p, [s.mean for s in forced]))
    stderr = mixed.stderr + float(np.sqrt(np.dot(p**2, [s.stderr**2 for s in forced])))
    gap = abs(mixed.mean - combined)
    return gap, 3.0 * stderr, gap <= 3.0 * stderr


def parse_cfg(path, instance_dir):
    """One experiment per line: NAME SPEC MESH TOL HORIZON EPISODES CHECKS.
    CHECKS is a comma list; lines starting with # are skipped."""
    exps = []
    with open(path, "r") as filep:
        for line in filep:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, spec, mesh, tol, horizon, episodes, checks = line.split()
            unknown = sorted(set(checks.split(",")) - set(CHECKS))
            if unknown:
                raise ValueError(f"{name}: unknown checks {unknown}. Available: {sorted(CHECKS)}")
            exps.append(
                Exp(
                    name,
                    os.path.join(instance_dir, spec),
                    int(mesh),
                    float(tol),
                    int(horizon),
                    int(episodes),
                    checks.split(","),
                )
            )
    return exps


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument("config", type=str, help="Config file, one experiment per line")
    parser.add_argument(
        "--instances",
        type=str,
        default=os.path.join(os.path.dirname(os.path.abspath(__file__)), "instances"),
        help="Directory of instance files",
    )
    parser.add_argument("--append-to", type=str, default="", help="Append results to this file")
    parser.add_argument("--only", type=str, default=None, help="Run only this experiment")
    return parser.parse_args()


def main():
    args = parse_args()
    exps = parse_cfg(args.config, args.instances)
    if args.only is not None:
        exps = [exp for exp in exps if exp.name == args.only]
    failed = 0
    print("Exp\tCheck\tMeasured\tBound\tResult\tSeconds")
    for exp in exps:
        logger.info(f"Running {exp.name} on {exp.spec}")
        exp.run()
        exp.print_results(args.append_to)
        failed += sum(not ok for _, _, ok, _ in exp.results.values())
    if failed:
        logger.error(f"{failed} checks failed")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
