"""
Grid Runner - Chunked Parallel Lattice Evaluation
=================================================

Evaluates vectorised functions over large lattices in row chunks on a
thread pool. numpy releases the GIL inside matrix products, so threads
give real parallelism for network evaluation.

The worker count is capped by NARROWFORGE_THREADS. Results are written
back in chunk order, so output is identical for any thread count.
"""

import concurrent.futures
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from config import get_config

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_ROWS = 4096

VectorFunction = Callable[[np.ndarray], np.ndarray]


def _chunks(total: int, chunk_rows: int) -> List[slice]:
    return [slice(start, min(start + chunk_rows, total)) for start in range(0, total, chunk_rows)]


def evaluate_on_grid(fn: VectorFunction, points: np.ndarray, threads: Optional[int] = None,
                     chunk_rows: int = DEFAULT_CHUNK_ROWS) -> np.ndarray:
    """
    Evaluate fn on every row of points.

    Args:
        fn: Maps an (k, n) array to (k,) or (k, m)
        points: Lattice points, one per row
        threads: Worker cap (default from config)
        chunk_rows: Rows per task

    Returns:
        2-D array with one output row per point
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    workers = max(1, min(threads or get_config().threads, 64))
    parts = _chunks(pts.shape[0], max(1, chunk_rows))

    def run(part: slice) -> np.ndarray:
        out = np.asarray(fn(pts[part]), dtype=float)
        return out.reshape(out.shape[0], -1)

    if workers == 1 or len(parts) <= 1:
        results = [run(part) for part in parts]
    else:
        logger.debug(f"Grid evaluation: {pts.shape[0]} points in {len(parts)} chunks on {workers} threads")
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, parts))
    if not results:
        return np.zeros((0, 0))
    return np.vstack(results)


def sup_deviation(f: VectorFunction, g: VectorFunction, points: np.ndarray,
                  threads: Optional[int] = None) -> Tuple[float, int]:
    """Max-norm deviation of f from g over points, and the index where it is attained."""
    fa = evaluate_on_grid(f, points, threads)
    ga = evaluate_on_grid(g, points, threads)
    if fa.shape != ga.shape:
        raise ValueError(f"output shapes differ: {fa.shape} vs {ga.shape}")
    per_point = np.max(np.abs(fa - ga), axis=1) if fa.shape[1] else np.zeros(fa.shape[0])
    index = int(np.argmax(per_point))
    return float(per_point[index]), index
