# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""
Test worker configuration, the parallel map and the logger.
"""
import logging

import pytest

import smgi.logger as smgi_logger
from smgi.env import num_workers, parallel_map
from smgi.errors import (
    BudgetExceeded,
    CertificationFailed,
    EnumerationTooLarge,
    NumericalFailure,
    ProtocolError,
    SMGIError,
    SpecFormatError,
    UsageError,
)
from smgi.utils import summarize


def _square(x):
    return x * x


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__()
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


@pytest.fixture
def collected():
    logger = smgi_logger.get_logger()
    handler = _Collect()
    logger.addHandler(handler)
    yield logger, handler.messages
    logger.removeHandler(handler)


def test_num_workers(monkeypatch):
    monkeypatch.delenv("SMGI_NUM_WORKERS", raising=False)
    assert num_workers() == 1
    monkeypatch.setenv("SMGI_NUM_WORKERS", "3")
    assert num_workers() == 3
    assert num_workers(2) == 2
    with pytest.raises(ValueError):
        num_workers(0)


def test_parallel_map():
    items = list(range(7))
    assert parallel_map(_square, items, workers=1) == [x * x for x in items]
    assert parallel_map(_square, items, workers=3) == [x * x for x in items]
    # Inline runs accept closures.
    offset = 2
    assert parallel_map(lambda x: x + offset, [1], workers=4) == [3]


def test_worker_records(collected, monkeypatch):
    logger, messages = collected
    logger.warning("from main")
    logger.warning("main only", main_only=True)
    monkeypatch.setattr(smgi_logger, "in_worker", lambda: True)
    logger.warning("from worker")
    logger.warning("dropped", main_only=True)
    assert messages[:2] == ["from main", "main only"]
    assert messages[2].startswith("[Worker ") and messages[2].endswith("from worker")
    assert len(messages) == 3


def test_levels(monkeypatch):
    logger = smgi_logger.get_logger()
    monkeypatch.setenv("SMGI_LOG_LEVEL", "debug")
    assert smgi_logger.default_level() == logging.DEBUG
    monkeypatch.setenv("SMGI_LOG_LEVEL", "30")
    assert smgi_logger.default_level() == logging.WARNING
    monkeypatch.setenv("SMGI_LOG_LEVEL", "chatty")
    with pytest.raises(ValueError):
        smgi_logger.default_level()

    old = logger.level
    try:
        assert smgi_logger.set_level("ERROR") is logger
        assert logger.level == logging.ERROR
        with pytest.raises(ValueError):
            smgi_logger.set_level("chatty")
    finally:
        logger.setLevel(old)


def test_exit_codes():
    assert UsageError.exit_code == 1
    assert SpecFormatError.exit_code == 2
    assert CertificationFailed.exit_code == 2
    assert NumericalFailure.exit_code == 3
    assert ProtocolError.exit_code == 3
    assert SMGIError.exit_code == 3
    err = EnumerationTooLarge(16, 4, 10)
    assert isinstance(err, BudgetExceeded) and err.exit_code == 4
    assert "16" in str(err)
    assert issubclass(SpecFormatError, ValueError)


def test_summarize():
    text = summarize("Solved", {"beta": 0.75, "iterations": 34})
    assert text.splitlines() == ["Solved", "  beta       : 0.75", "  iterations : 34"]


if __name__ == "__main__":
    pytest.main([__file__])
