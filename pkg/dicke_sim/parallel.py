"""
Worker-pool helpers shared by record synthesis, moment estimation and sweeps.
"""

from typing import Callable, Iterable, List, TypeVar
import logging
import os

from joblib import Parallel, delayed


logger = logging.getLogger(__name__)

THREADS_ENV = 'DICKE_SIM_THREADS'

T = TypeVar('T')
R = TypeVar('R')


def worker_count() -> int:
    """Worker cap from DICKE_SIM_THREADS, falling back to the CPU count."""
    default = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == '':
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}; using {default} workers")
        return default
    if value < 1:
        logger.warning(f"Ignoring {THREADS_ENV}={value}; using {default} workers")
        return default
    return value


def run_parallel(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Map `func` over `items` on a thread pool; results keep the input order."""
    items = list(items)
    n_jobs = min(worker_count(), max(len(items), 1))
    if n_jobs == 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer='threads')(delayed(func)(item) for item in items)
