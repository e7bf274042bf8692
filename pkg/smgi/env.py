# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
# SPDX-License-Identifier: Apache-2.0

import os
from concurrent.futures import ProcessPoolExecutor


def num_workers(requested=None):
    """Worker count: the explicit request, else SMGI_NUM_WORKERS, else 1."""
    if requested is None:
        requested = int(os.getenv("SMGI_NUM_WORKERS", "1"))
    if requested < 1:
        raise ValueError(f"Number of workers must be >= 1, but got {requested}")
    return requested


def parallel_map(fn, items, workers=None, chunksize=1):
    """Map fn over items, results in input order.

    With one worker (or a single item) everything runs inline, so fn and the
    items need not be picklable.
    """
    items = list(items)
    workers = num_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
