# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0
"""Logging."""
import os
import sys
import logging
import multiprocessing as mp
from logging import getLevelName

FORMATTER = logging.Formatter(
    "[%(asctime)s][%(levelname)s][%(filename)s:%(lineno)d:%(funcName)s] %(message)s"
)

LOGGER_TABLE = {}

# Syntax suger.
CRITICAL = logging.CRITICAL
FATAL = logging.FATAL
ERROR = logging.ERROR
WARNING = logging.WARNING
WARN = logging.WARN
INFO = logging.INFO
DEBUG = logging.DEBUG
NOTSET = logging.NOTSET


def default_level():
    """The level requested by SMGI_LOG_LEVEL, INFO if unset."""
    env = os.getenv("SMGI_LOG_LEVEL")
    if not env:
        return INFO
    if env.isdigit():
        return int(env)
    level = getLevelName(env.upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level {env} in SMGI_LOG_LEVEL")
    return level


def in_worker():
    """Whether we run inside a worker process of the parallel map."""
    return mp.current_process().name != "MainProcess"


def get_logger(name="SMGI", level=None):
    """Attach to the default logger. Records go to stderr, stdout is for artifacts."""
    if level is None:
        level = default_level()
    if name in LOGGER_TABLE:
        logger = LOGGER_TABLE[name]
        if logger.level != level:
            logger.warning(
                f"Logger {name} already exists with {getLevelName(logger.level)}. "
                f"The new level {getLevelName(level)} will be ignored."
            )
        return logger

    logger = logging.getLogger(name)
    logger.setLevel(level)
    logger.propagate = False
    ch = logging.StreamHandler(stream=sys.stderr)
    ch.setLevel(NOTSET)
    ch.setFormatter(FORMATTER)
    logger.addHandler(ch)
    orig_log = logger._log

    def wrapper(level, msg, *args, **kwargs):
        """Prefix records from worker processes with their pid.
        main_only=True drops the record when emitted from a worker.
        """
        main_only = kwargs.pop("main_only", False)
        if in_worker():
            if main_only:
                return
            worker_info = f"[Worker {os.getpid()}] "
        else:
            worker_info = ""
        orig_log(level, f"{worker_info}{msg}", *args, **kwargs)

    logger._log = wrapper
    LOGGER_TABLE[name] = logger
    return logger


def set_level(level, name="SMGI"):
    """Change the level of an existing logger, e.g. from --log-level."""
    if isinstance(level, str):
        level = getLevelName(level.upper())
        if not isinstance(level, int):
            raise ValueError(f"Unknown log level {level}")
    logger = LOGGER_TABLE[name] if name in LOGGER_TABLE else get_logger(name, level)
    logger.setLevel(level)
    return logger
