"""Deterministic chunked parallelism for per-frequency kernels.

The MTDC_STAB_THREADS environment variable caps the thread count
(0 or unset = auto).  Work is split into contiguous frequency chunks and
each chunk's result is written at fixed indices, so the output is
identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "MTDC_STAB_THREADS"
_MAX_AUTO = 8
_MIN_CHUNK = 64


def thread_count() -> int:
    raw = os.environ.get(_ENV_VAR, "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = min(os.cpu_count() or 1, _MAX_AUTO)
    return n


def map_chunks(kernel, n_items: int):
    """Run ``kernel(lo, hi)`` over contiguous index chunks covering range(n_items).

    The kernel must write its results into preallocated arrays at [lo:hi];
    chunk boundaries depend only on n_items and the thread cap, never on
    scheduling order.
    """
    threads = thread_count()
    if threads <= 1 or n_items <= _MIN_CHUNK:
        kernel(0, n_items)
        return
    n_chunks = min(threads, max(1, n_items // _MIN_CHUNK))
    bounds = [round(i * n_items / n_chunks) for i in range(n_chunks + 1)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(kernel, bounds[i], bounds[i + 1])
            for i in range(n_chunks)
            if bounds[i] < bounds[i + 1]
        ]
        for fut in futures:
            fut.result()
