# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Exceptions raised by the solver. Each family maps to a command-line exit code."""


class SMGIError(Exception):
    """Base class of all solver errors."""

    exit_code = 3


class UsageError(SMGIError):
    """Command-line misuse."""

    exit_code = 1


class SpecFormatError(SMGIError, ValueError):
    """A game specification or solution file is malformed."""

    exit_code = 2


class CertificationFailed(SMGIError):
    """No candidate delta certifies the uniform sojourn condition."""

    exit_code = 2


class NumericalFailure(SMGIError, ArithmeticError):
    """An LP solution failed its post-solve checks."""

    exit_code = 3


class ProtocolError(SMGIError, RuntimeError):
    """An engine was driven out of decide/observe order."""

    exit_code = 3


class BudgetExceeded(SMGIError):
    """A configured work budget was exhausted."""

    exit_code = 4


class IterationBudgetExceeded(BudgetExceeded):
    pass


class SearchBudgetExceeded(BudgetExceeded):
    pass


class DepthExceeded(BudgetExceeded):
    """A policy table is shallower than the requested horizon."""


class EnumerationTooLarge(BudgetExceeded):
    """The deterministic-policy enumeration exceeds the entry limit."""

    def __init__(self, n_rows, n_cols, limit):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.limit = limit
        super().__init__(
            f"Enumeration needs {n_rows} x {n_cols} = {n_rows * n_cols} entries, "
            f"limit is {limit}"
        )
