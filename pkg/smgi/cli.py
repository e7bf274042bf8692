# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Command-line entry point.

Machine output (JSON or CSV) goes to ``--out`` or stdout; logs go to stderr.
The exit code is 0 on success, otherwise the ``exit_code`` of the raised
solver error.
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

import numpy as np

from .belief import Belief
from .config import DualSearchConfig, OracleLimits, SimulationConfig, SolveConfig
from .dual import DualValueOracle, P2Engine, conjugate_table, fenchel_report
from .engine import FixedP1Engine, FixedP2Engine
from .errors import SMGIError, UsageError
from .io import (
    load_solution,
    load_spec,
    load_valid_spec,
    save_solution,
    write_csv,
    write_json,
    write_records,
)
from .logger import get_logger, set_level
from .model import certify_assumption1, discounted_aggregates, validate_spec
from .oracle import OracleReport, best_response_p1, best_response_p2, brute_value
from .player1 import P1Engine
from .sim import EnginePair, monte_carlo_value
from .utils import summarize
from .value import error_budget, query_table, value_iterate

logger = get_logger()

# Slack added to the exploitability and simulation checks.
CHECK_SLACK = 1e-3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_args(argv=None):
    common_parser = _Parser(add_help=False)
    common_parser.add_argument("--spec", type=str, required=True, help="Game spec file (JSON)")
    common_parser.add_argument("--out", type=str, default=None, help="Output file. Default: stdout")
    common_parser.add_argument(
        "--format", type=str, default="json", choices=["json", "csv"], help="Output format. Default: json"
    )
    common_parser.add_argument("--log-level", type=str, default=None, help="Log level, e.g. DEBUG")
    common_parser.add_argument(
        "--workers", type=int, default=None, help="Worker processes. Default: SMGI_NUM_WORKERS or 1"
    )

    point_parser = _Parser(add_help=False)
    point_parser.add_argument(
        "--belief", type=str, default=None, help="Comma separated prior. Default: the spec's"
    )
    point_parser.add_argument(
        "--state", type=str, default=None, help="Initial state label. Default: the spec's"
    )

    solution_parser = _Parser(add_help=False)
    solution_parser.add_argument("--solution", type=str, required=True, help="Solution file")
    solution_parser.add_argument(
        "--cache", type=str, default=None, help="JSON file that keeps dual values between runs"
    )

    parser = _Parser(prog="smgi", description="Semi-Markov games with one-sided incomplete information")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    subparsers.add_parser(
        "validate", parents=[common_parser], help="Check a spec and certify the sojourn condition"
    )

    solve = subparsers.add_parser("solve", parents=[common_parser], help="Run value iteration")
    solve.add_argument("--solution", type=str, required=True, help="Where to write the solution")
    solve.add_argument("--mesh", type=int, default=SolveConfig.mesh, help="Belief grid resolution")
    solve.add_argument("--tol", type=float, default=SolveConfig.stop_tol, help="Stopping tolerance")
    solve.add_argument(
        "--query-mesh", type=int, default=None, help="Grid of the value table. Default: --mesh"
    )
    solve.add_argument("--prune", action="store_true", help="Drop dominated cuts every iteration")

    oracle = subparsers.add_parser(
        "oracle", parents=[common_parser, point_parser], help="Brute-force finite-horizon value"
    )
    oracle.add_argument("--horizon", "--n", dest="horizon", type=int, default=0, help="Epoch index n")
    oracle.add_argument(
        "--budget", type=int, default=OracleLimits.enumeration, help="Matrix entry limit"
    )

    conjugate = subparsers.add_parser(
        "conjugate",
        parents=[common_parser, solution_parser, point_parser],
        help="Dual value table and duality residuals",
    )
    conjugate.add_argument("--query-mesh", type=int, default=11, help="Points per dual axis")
    conjugate.add_argument("--seed", type=int, default=0, help="Seed of the residual samples")
    conjugate.add_argument("--samples", type=int, default=20, help="Random samples")

    exploit = subparsers.add_parser(
        "exploit",
        parents=[common_parser, solution_parser, point_parser],
        help="Best response against a solved engine",
    )
    exploit.add_argument("--player", type=int, choices=[1, 2], required=True, help="Engine to attack")
    exploit.add_argument("--horizon", "--n", dest="horizon", type=int, default=6, help="Depth N")
    exploit.add_argument(
        "--budget", type=int, default=OracleLimits.best_response, help="History budget"
    )
    exploit.add_argument(
        "--trace", type=str, default=None, help="JSON-lines engine trace at every leaf"
    )

    simulate = subparsers.add_parser(
        "simulate",
        parents=[common_parser, solution_parser, point_parser],
        help="Monte Carlo value of the solved engines",
    )
    simulate.add_argument("--episodes", type=int, default=1000, help="Episodes. Default: 1000")
    simulate.add_argument("--seed", type=int, default=0, help="Base seed")
    simulate.add_argument(
        "--trace", type=str, default=None, help="JSON-lines trajectories with engine traces"
    )
    simulate.add_argument(
        "--player",
        type=int,
        choices=[1, 2],
        default=None,
        help="Pit only this solved engine against a uniform opponent",
    )

    args = parser.parse_args(argv)
    _check_args(args)
    return args


def _check_args(args):
    def need(ok, msg):
        if not ok:
            raise UsageError(msg)

    if getattr(args, "mesh", None) is not None:
        need(args.mesh >= 1, "--mesh must be >= 1")
    if getattr(args, "query_mesh", None) is not None:
        need(args.query_mesh >= 1, "--query-mesh must be >= 1")
    if getattr(args, "tol", None) is not None:
        need(args.tol > 0, "--tol must be positive")
    if getattr(args, "horizon", None) is not None:
        need(args.horizon >= 0, "--horizon must be >= 0")
    if getattr(args, "episodes", None) is not None:
        need(args.episodes >= 2, "--episodes must be >= 2")
    if getattr(args, "budget", None) is not None:
        need(args.budget >= 1, "--budget must be >= 1")
    if args.workers is not None:
        need(args.workers >= 1, "--workers must be >= 1")


def _point(args, spec):
    """(belief, state index) from --belief/--state or the spec defaults."""
    if args.belief is None:
        p = Belief(spec.initial_belief)
    else:
        try:
            p = Belief([float(x) for x in args.belief.split(",")])
        except ValueError as err:
            raise UsageError(f"--belief: {err}") from err
        if len(p) != spec.n_types:
            raise UsageError(f"--belief needs {spec.n_types} entries, got {len(p)}")
    if args.state is None:
        return p, spec.initial_state
    if args.state not in spec.states:
        raise UsageError(f"--state {args.state!r} is not one of {list(spec.states)}")
    return p, spec.states.index(args.state)


def _emit(args, obj, header=None, rows=None):
    if args.format == "csv":
        if rows is None:
            header, rows = ["key", "value"], sorted(obj.items())
        write_csv(args.out, header, rows)
    else:
        write_json(args.out, obj)


def _load(args):
    return load_valid_spec(args.spec)


def cmd_validate(args):
    spec = load_spec(args.spec)
    violations = validate_spec(spec)
    if violations:
        for msg in violations:
            logger.error(msg)
        _emit(args, {"valid": False, "violations": violations})
        return 2
    spec = spec.normalized()
    agg = discounted_aggregates(spec)
    cert = certify_assumption1(spec)
    identity = float(np.abs(agg.m * spec.alpha + agg.continuation_mass() - 1.0).max())
    logger.info(
        summarize(
            f"Valid spec {args.spec}",
            {
                "types": spec.n_types,
                "states": spec.n_states,
                "c*": spec.cstar,
                "beta": cert.beta,
                "delta": cert.delta,
                "epsilon": cert.epsilon,
            },
        )
    )
    _emit(
        args,
        {
            "valid": True,
            "cstar": spec.cstar,
            "beta_bound": agg.beta_bound,
            "kernel_identity_residual": identity,
            "certificate": cert.to_dict(),
        },
    )
    return 0


def cmd_solve(args):
    spec = _load(args)
    agg = discounted_aggregates(spec)
    cert = certify_assumption1(spec)
    config = SolveConfig(mesh=args.mesh, stop_tol=args.tol, prune=args.prune, workers=args.workers)
    report = value_iterate(spec, agg, cert, config=config)
    save_solution(args.solution, report, spec)
    table = query_table(report.envelope, args.query_mesh or args.mesh)
    rows = [(p, spec.states[j], v) for p, j, v in table]
    if args.format == "csv":
        _emit(args, None, ["belief", "state", "value"], rows)
    else:
        _emit(
            args,
            {
                "iterations": report.iterations,
                "horizon": report.horizon,
                "beta": report.beta,
                "tail_bound": report.tail_bound,
                "sup_change": report.sup_change,
                "n_cuts": report.n_cuts,
                "values": [{"belief": p, "state": s, "value": v} for p, s, v in rows],
            },
        )
    return 0


def cmd_oracle(args):
    spec = _load(args)
    agg = discounted_aggregates(spec)
    p, i = _point(args, spec)
    value = brute_value(p, i, args.horizon, spec, agg, OracleLimits(enumeration=args.budget))
    report = OracleReport("brute_value", value, value, args.horizon, args.budget)
    logger.info(f"V*_{args.horizon}({p}, {spec.states[i]}) = {value:.10g}")
    _emit(args, report.to_dict())
    return 0


def cmd_conjugate(args):
    spec = _load(args)
    agg = discounted_aggregates(spec)
    solution = load_solution(args.solution, spec)
    oracle = DualValueOracle(solution.envelope, spec, db_file_name=args.cache)
    _, i = _point(args, spec)
    table = conjugate_table(oracle, i, args.query_mesh)
    fenchel = fenchel_report(
        oracle, agg, spec, np.random.default_rng(args.seed), args.samples, max(1, args.samples // 2)
    )
    logger.info(
        f"Fenchel round trip {fenchel['round_trip_max']:.3e}, dual equation residual "
        f"{fenchel['equation_residual_max']:.3e} (search tol {fenchel['dual_stage_tol']:.3e})"
    )
    oracle.save()
    rows = [(z, spec.states[i], v) for z, v in table]
    if args.format == "csv":
        _emit(args, None, ["z", "state", "value"], rows)
    else:
        _emit(
            args,
            {"fenchel": fenchel, "table": [{"z": z, "state": s, "value": v} for z, s, v in rows]},
        )
    return 0


def _engines(spec, agg, solution, p, i, cache=None):
    oracle = DualValueOracle(solution.envelope, spec, DualSearchConfig(), db_file_name=cache)
    p1 = P1Engine(solution.envelope, spec, agg, p)
    p2 = P2Engine.from_belief(oracle, agg, spec, p, i)
    return p1, p2


def _dual_stage_tol(engine):
    return max((sol.tol for sol in engine.cache.values()), default=0.0)


def cmd_exploit(args):
    spec = _load(args)
    agg = discounted_aggregates(spec)
    cert = certify_assumption1(spec)
    solution = load_solution(args.solution, spec)
    p, i = _point(args, spec)
    limits = OracleLimits(best_response=args.budget)
    reference = solution.envelope.evaluate(p, i)
    p1, p2 = _engines(spec, agg, solution, p, i, args.cache)
    tail = error_budget(args.horizon, cert, spec.cstar, spec.alpha)
    traces = [] if args.trace is not None else None
    if args.player == 1:
        lo, hi = best_response_p2(p1, p, i, args.horizon, spec, agg, limits, traces=traces)
        slack = tail + solution.stop_tol + CHECK_SLACK
        holds = lo >= reference - slack
        kind = "best_response_p2"
    else:
        lo, hi = best_response_p1(p2, p, i, args.horizon, spec, agg, limits, traces=traces)
        slack = tail + solution.stop_tol + _dual_stage_tol(p2) + CHECK_SLACK
        holds = hi <= reference + slack
        kind = "best_response_p1"
    p2.oracle.save()
    if traces is not None:
        n = write_records(args.trace, ({"leaf": k, "trace": t} for k, t in enumerate(traces)))
        logger.info(f"Wrote {n} engine traces to {args.trace}")
    report = OracleReport(kind, lo, hi, args.horizon, args.budget, reference=reference)
    out = report.to_dict()
    out.update({"slack": slack, "guarantee_holds": bool(holds)})
    logger.info(
        f"Player {args.player} engine: opponent best response in [{lo:.8g}, {hi:.8g}], "
        f"V* = {reference:.8g}, guarantee {'holds' if holds else 'FAILS'}"
    )
    _emit(args, out)
    return 0


def cmd_simulate(args):
    spec = _load(args)
    agg = discounted_aggregates(spec)
    solution = load_solution(args.solution, spec)
    p, i = _point(args, spec)
    p1, p2 = _engines(spec, agg, solution, p, i, args.cache)
    if args.player == 1:
        p2 = FixedP2Engine.uniform(spec.n_actions_p2)
    elif args.player == 2:
        p1 = FixedP1Engine.uniform(spec.n_types, spec.n_actions_p1, p)
    summary = monte_carlo_value(
        spec,
        agg,
        EnginePair(p1, p2),
        args.episodes,
        args.seed,
        SimulationConfig(),
        i0=i,
        p=p,
        workers=args.workers,
        keep_records=args.trace is not None,
    )
    if args.trace is not None:
        n = write_records(args.trace, (rec.to_dict(spec) for rec in summary.records))
        logger.info(f"Wrote {n} trajectories to {args.trace}")
    if args.player != 1:
        p2.oracle.save()
    out = summary.to_dict()
    out["reference"] = solution.envelope.evaluate(p, i)
    _emit(args, out)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "conjugate": cmd_conjugate,
    "exploit": cmd_exploit,
    "simulate": cmd_simulate,
}


def run(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
        if args.log_level is not None:
            try:
                set_level(args.log_level)
            except ValueError as err:
                raise UsageError(str(err)) from err
        return COMMANDS[args.command](args)
    except SMGIError as err:
        logger.error(f"{type(err).__name__}: {err}")
        return err.exit_code
    except OSError as err:
        logger.error(f"{type(err).__name__}: {err}")
        return UsageError.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
