# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Sojourn-time law families."""

from .registry import register_sojourn_law, get_all_sojourn_laws, get_sojourn_law_cls
from .laws import (
    SojournLaw,
    Exponential,
    Deterministic,
    Uniform,
    Discrete,
    make_law,
    laplace_point,
    cdf_point,
    sample_sojourn,
)
