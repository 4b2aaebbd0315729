from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, workers=1):
    """Ordered map, optionally over a process pool.

    Results come back in input order, so output never depends on scheduling.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    workers = min(workers, len(items))
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
