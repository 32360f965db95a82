"""Worker-pool helper with sequential reference semantics.

``jobs=1`` runs a plain loop and is the reference; larger values fan
independent items out to a thread pool.  Items never share state, so the
results are identical either way (numpy releases the GIL in the kernels that
dominate the work).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigurationError


def parallel_map(fn, items, jobs: int = 1) -> list:
    if jobs is None:
        jobs = 1
    if jobs < 1:
        raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
    items = list(items)
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
