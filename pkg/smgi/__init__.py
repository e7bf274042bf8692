# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0

from .env import *
from .logger import get_logger
from .errors import *
from .config import (
    Tolerances,
    SolveConfig,
    DualSearchConfig,
    SimulationConfig,
    OracleLimits,
    DEFAULT_TOLERANCES,
)
from .sojourn import *
from .model import (
    Branch,
    GameSpec,
    DiscountedAggregates,
    Assumption1Certificate,
    validate_spec,
    discounted_aggregates,
    certify_assumption1,
    epoch_time_bound,
    holding_cdf,
)
from .belief import (
    Belief,
    as_vector,
    posterior_update,
    chi,
    joint_from,
    conditional_from,
    product_form_posterior,
    simplex_grid,
)
from .lp import LinearProgram, LpSolution, solve_lp, solve_matrix_game
from .value import (
    ConcaveEnvelope,
    GridInterpolant,
    StageSaddle,
    SolveReport,
    envelope_eval,
    perspective_eval,
    stage_backup,
    stage_operator,
    error_budget,
    iteration_floor,
    value_iterate,
    query_table,
)
from .engine import Engine, FixedP1Engine, FixedP2Engine
from .player1 import P1Engine, p1_decide, p1_observe
from .dual import (
    DualVector,
    WField,
    DualValueOracle,
    DualStageSolution,
    P2Engine,
    conjugate_eval,
    recover_value,
    gamma_matrix,
    dual_stage_solve,
    p2_init,
    p2_decide,
    p2_observe,
)
from .io import load_spec, load_valid_spec, spec_from_dict, dump_spec, load_solution, save_solution
