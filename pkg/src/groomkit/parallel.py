"""Thread fan-out with scheduling-independent results.

Work is always cut into the same fixed-size chunks whatever the thread
count, and results come back in chunk order, so any reduction performed by
the caller sees an identical sequence of partial results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "GROOMKIT_THREADS"
CHUNK = 4096


def thread_count() -> int:
    """Worker count from ``GROOMKIT_THREADS`` (unset or 0 = all CPUs)."""
    raw = os.environ.get(ENV_VAR, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{ENV_VAR} must be a non-negative integer, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def chunk_slices(n: int, chunk: int = CHUNK) -> list[slice]:
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def map_chunks(fn, n: int, chunk: int = CHUNK, threads: int | None = None) -> list:
    """Apply ``fn(slice)`` to fixed chunks of ``range(n)``; results in order."""
    slices = chunk_slices(n, chunk)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(slices) <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=min(threads, len(slices))) as pool:
        return list(pool.map(fn, slices))
