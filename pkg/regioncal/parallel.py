"""Worker pool helpers.

All parallel work in this package is a map over independent items
(images or classes). Results are always returned in input order,
so any reduction over them is deterministic regardless of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from regioncal import conf
from regioncal.exceptions import InvalidParameterValue

T = TypeVar("T")
R = TypeVar("R")

JOBS_ENVIRONMENT_VARIABLE = "REGIONCAL_JOBS"


def resolve_jobs(jobs: int | str | None = None) -> int:
    """Tell how many workers to use.

    The explicit value wins, then the ``REGIONCAL_JOBS`` environment variable,
    then the ``REGIONCAL_JOBS`` setting, then the number of CPU cores.
    """
    if jobs is None:
        jobs = os.environ.get(JOBS_ENVIRONMENT_VARIABLE) or conf.REGIONCAL_JOBS
    if jobs is None:
        return os.cpu_count() or 1

    try:
        jobs = int(jobs)
    except (TypeError, ValueError):
        raise InvalidParameterValue(
            "jobs", f"Expected an integer for jobs, got '{jobs}'."
        ) from None
    if jobs < 1:
        raise InvalidParameterValue("jobs", "The number of jobs should be at least 1.")
    return jobs


def parallel_map(func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Apply ``func`` to all items, in order.

    With ``jobs=1`` this is a plain loop, which keeps tracebacks readable.
    The numpy kernels release the GIL, so threads give a real speedup
    for the larger per-image workloads.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as executor:
        return list(executor.map(func, items))
