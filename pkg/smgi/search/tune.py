# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0

"""Box searches over dual vectors: lexicographic grids and coordinate descent."""
import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from ..errors import SearchBudgetExceeded
from ..logger import get_logger

logger = get_logger()


class Symbol:
    """A search coordinate with candidate values."""

    def __init__(self, name, vals):
        self.name = name
        self.vals = list(vals)


class Space:
    """A product space of symbols, enumerated in lexicographic order."""

    def __init__(self):
        self.space = {}
        self.idx_to_name = []

    def create_symbol(self, name, vals):
        """Create a symbol in the space, replacing the candidates of an existing one."""
        if name not in self.space:
            self.idx_to_name.append(name)
        self.space[name] = Symbol(name, vals)
        return self.space[name]

    def enumerate(self):
        """Yield every point as a dict; the last symbol varies fastest."""
        names = self.idx_to_name
        for vals in itertools.product(*(self.space[n].vals for n in names)):
            yield dict(zip(names, vals))

    @staticmethod
    def cfg_dict_to_str(cfg_dict):
        """Convert a config dict to a string for logging and debugging."""
        ret = "("
        for idx, (k, v) in enumerate(cfg_dict.items()):
            is_last = idx == len(cfg_dict) - 1
            last_ch = ")" if is_last else ", "
            ret += f"{k}: {v}{last_ch}"
        return ret


class Database:
    """A dict store for evaluated points, optionally backed by a JSON file.

    The file carries a tag; records stored under another tag are not loaded.
    """

    def __init__(self, db_file_name=None, tag=""):
        self.db_file_name = db_file_name
        self.tag = tag
        self.db = {}
        self.n_loaded = 0

    def __contains__(self, key):
        return key in self.db

    def __len__(self):
        return len(self.db)

    def get(self, key, default=None):
        return self.db.get(key, default)

    def load(self):
        """Load records from the file, if it exists and carries our tag."""
        if not self.db_file_name or not os.path.exists(self.db_file_name):
            return self
        with open(self.db_file_name, "r") as filep:
            obj = json.load(filep)
        if obj.get("tag") != self.tag:
            logger.warning(f"Ignoring {self.db_file_name}: it was written for another solution")
            return self
        self.db.update(obj["records"])
        self.n_loaded = len(obj["records"])
        logger.info(f"Loaded {self.n_loaded} search records from {self.db_file_name}")
        return self

    def commit(self, key, data):
        self.db[key] = data

    def dump(self):
        """Write every record to the file."""
        if not self.db_file_name:
            return
        with open(self.db_file_name, "w") as filep:
            json.dump({"tag": self.tag, "records": self.db}, filep)
        logger.info(f"Saved {len(self.db)} search records to {self.db_file_name}")


def grid_search(space, eval_fn, budget=None):
    """Minimize eval_fn over the space. Ties keep the first point in enumeration
    order. Returns (best cfg, best value, evaluations)."""
    best_cfg, best_val, n_eval = None, np.inf, 0
    for cfg in space.enumerate():
        if budget is not None and n_eval >= budget:
            raise SearchBudgetExceeded(f"Grid search exceeded {budget} evaluations")
        val = eval_fn(cfg)
        n_eval += 1
        if val < best_val:
            best_cfg, best_val = cfg, val
    logger.debug(f"Grid best {Space.cfg_dict_to_str(best_cfg or {})} = {best_val:.10g}")
    return best_cfg, best_val, n_eval


@dataclass
class SearchResult:
    point: np.ndarray
    value: float
    final_step: float
    evaluations: int


def coordinate_descent(
    eval_fn,
    start,
    lower,
    upper,
    step,
    min_step,
    budget=None,
    tol=1e-12,
    start_value=None,
    directions=None,
):
    """Box-constrained coordinate descent with step halving.

    Each sweep tries -step then +step along every direction in order and moves
    on the first strict improvement. Directions default to the coordinate
    axes. A sweep without improvement halves the step; the search ends once the
    step drops below min_step. ``final_step`` is the last step at which the
    point was locally optimal.
    """
    x = np.array(start, dtype=float)
    if directions is None:
        directions = np.eye(x.size)
    directions = [np.asarray(d, dtype=float).reshape(x.shape) for d in directions]
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    n_eval = 0

    def evaluate(point):
        nonlocal n_eval
        if budget is not None and n_eval >= budget:
            raise SearchBudgetExceeded(
                f"Coordinate descent exceeded {budget} evaluations at step {step:.3e}"
            )
        n_eval += 1
        return eval_fn(point)

    fx = evaluate(x) if start_value is None else start_value
    final_step = step
    while step >= min_step:
        improved = False
        for vec in directions:
            for sign in (-1.0, 1.0):
                cand = np.clip(x + sign * step * vec, lower, upper)
                if np.array_equal(cand, x):
                    continue
                fc = evaluate(cand)
                if fc < fx - tol:
                    x, fx, improved = cand, fc, True
                    break
        if not improved:
            final_step = step
            step /= 2.0
    return SearchResult(x, fx, final_step, n_eval)
