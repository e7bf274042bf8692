# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0

import gc

import psutil

from ..logger import get_logger

logger = get_logger()


def memory_used_gib():
    """Resident memory of this process in GiB."""
    return psutil.Process().memory_info().rss / 1024 / 1024 / 1024


def report_memory(msg="", report_gc=False):
    """Log the process and system memory at DEBUG level."""
    logger.debug(
        f"{msg} RAM used: {memory_used_gib():.4f} GiB "
        f"(system {psutil.virtual_memory()[3] / 1024 / 1024 / 1024:.4f} GiB)"
    )
    if report_gc:
        n_obj = len(gc.get_objects())
        logger.debug(f"{msg} GC tracks {n_obj} objects")


def summarize(title, fields):
    """Render a human summary block for the diagnostic stream."""
    width = max((len(k) for k in fields), default=0)
    lines = [title]
    for key, val in fields.items():
        if isinstance(val, float):
            val = f"{val:.10g}"
        lines.append(f"  {key.ljust(width)} : {val}")
    return "\n".join(lines)
