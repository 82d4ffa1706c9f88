"""Worker-count resolution shared by the parallel sweep functions.

All parallel work in this package is index-addressed: each work item is a
pure function of its inputs and results are written back by index, so output
bytes never depend on the worker count or scheduling order.
"""
from __future__ import annotations

import os

ENV_WORKERS = "ATOMWALK_WORKERS"


def resolve_workers(workers: int | None) -> int:
    """Explicit argument, else ATOMWALK_WORKERS, else the CPU count."""
    if workers is not None:
        if workers < 1:
            raise ValueError(f"worker count must be >= 1, got {workers}")
        return workers
    env = os.environ.get(ENV_WORKERS)
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{ENV_WORKERS} must be >= 1, got {env}")
        return n
    return os.cpu_count() or 1
