"""
Verifier - Grid Sup-Norm Errors and Property Checks
===================================================

sup_error compares a network against an oracle on the uniform lattice
with grid_res points per axis. The result is a lower bound on the true
sup-norm error, so reports are labelled "grid-measured".

The check_* functions answer yes/no questions about a network and return
the evidence. They never raise on a negative answer.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import get_config
from core.errors import DimensionMismatchError, NotInvertibleError
from core.intervals import Box
from core.network import Network, invert_evaluate
from handlers.grid_runner import evaluate_on_grid

logger = logging.getLogger(__name__)

VERIFY_PRESETS: Dict[str, int] = {
    'quick': 9,
    'standard': 33,
    'thorough': 101,
}

VectorOracle = Callable[[np.ndarray], np.ndarray]


def grid_res_for(preset: Optional[str] = None, grid_res: Optional[int] = None) -> int:
    """Explicit grid_res wins over a preset; 'standard' otherwise."""
    if grid_res is not None:
        return int(grid_res)
    if preset is None:
        return VERIFY_PRESETS['standard']
    if preset not in VERIFY_PRESETS:
        raise ValueError(f"unknown preset '{preset}' (choose from {', '.join(VERIFY_PRESETS)})")
    return VERIFY_PRESETS[preset]


@dataclass
class VerifyReport:
    sup_error: float
    argmax: List[float]
    grid_res: int
    width: int
    depth: int
    seed: int
    tol: Optional[float] = None
    per_stage_errors: List[Optional[float]] = field(default_factory=list)
    wall_time: float = 0.0
    label: str = "grid-measured"

    @property
    def within_tol(self) -> bool:
        return self.tol is None or self.sup_error <= self.tol

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload['within_tol'] = self.within_tol
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sup_error(net: Network, oracle: VectorOracle, box: Box, grid_res: int,
              tol: Optional[float] = None, seed: Optional[int] = None,
              per_stage_errors: Optional[List[Optional[float]]] = None,
              threads: Optional[int] = None) -> VerifyReport:
    """
    Max over the lattice of ||net(x) - oracle(x)||_inf.

    Raises:
        ValueError: grid_res < 2
        DimensionMismatchError: box or oracle dimensions disagree with net
    """
    if grid_res < 2:
        raise ValueError(f"grid_res must be at least 2, got {grid_res}")
    if box.dim != net.input_dim:
        raise DimensionMismatchError(f"box has dim {box.dim}, network expects {net.input_dim}", 0)
    started = time.perf_counter()
    points = box.grid(grid_res)
    got = evaluate_on_grid(net.evaluate, points, threads)
    want = evaluate_on_grid(oracle, points, threads)
    if got.shape != want.shape:
        raise DimensionMismatchError(
            f"network output dim {got.shape[1]} != oracle output dim {want.shape[1]}")
    per_point = np.max(np.abs(got - want), axis=1)
    index = int(np.argmax(per_point))
    report = VerifyReport(
        sup_error=float(per_point[index]),
        argmax=[float(v) for v in points[index]],
        grid_res=int(grid_res),
        width=net.width,
        depth=net.depth,
        seed=get_config().seed if seed is None else int(seed),
        tol=tol,
        per_stage_errors=list(per_stage_errors or []),
        wall_time=time.perf_counter() - started,
    )
    logger.info(f"sup_error {report.sup_error:.3e} on {points.shape[0]} points "
                f"(grid {grid_res}, {report.wall_time:.2f}s)")
    return report


@dataclass
class MonotonicityCheck:
    ok: bool
    samples: int
    counterexample: Optional[Dict[str, Any]] = None


def check_monotone_last(net: Network, box: Box, samples: int = 1000,
                        seed: Optional[int] = None) -> MonotonicityCheck:
    """Last output strictly increasing in the last input, on random ordered pairs."""
    if box.dim != net.input_dim:
        raise DimensionMismatchError(f"box has dim {box.dim}, network expects {net.input_dim}", 0)
    rng = np.random.default_rng(get_config().seed if seed is None else seed)
    low = box.sample(samples, rng)
    high = low.copy()
    a = rng.uniform(box.lo[-1], box.hi[-1], samples)
    b = rng.uniform(box.lo[-1], box.hi[-1], samples)
    low[:, -1] = np.minimum(a, b)
    high[:, -1] = np.maximum(a, b)
    keep = high[:, -1] > low[:, -1]
    y_low = net.evaluate(low[keep])[:, -1]
    y_high = net.evaluate(high[keep])[:, -1]
    bad = np.flatnonzero(y_high <= y_low)
    if bad.size == 0:
        return MonotonicityCheck(True, int(keep.sum()))
    i = int(bad[0])
    counterexample = {
        'x_low': low[keep][i].tolist(),
        'x_high': high[keep][i].tolist(),
        'y_low': float(y_low[i]),
        'y_high': float(y_high[i]),
    }
    logger.warning(f"Monotonicity violated at {counterexample}")
    return MonotonicityCheck(False, int(keep.sum()), counterexample)


@dataclass
class InvertibilityCheck:
    ok: bool
    max_error: Optional[float]
    reason: Optional[str] = None


def check_invertible(net: Network, box: Box, samples: int = 1000, tol: float = 1e-8,
                     seed: Optional[int] = None) -> InvertibilityCheck:
    """Round trip x -> invert_evaluate(net, net(x)) on random samples of box."""
    if box.dim != net.input_dim:
        raise DimensionMismatchError(f"box has dim {box.dim}, network expects {net.input_dim}", 0)
    rng = np.random.default_rng(get_config().seed if seed is None else seed)
    x = box.sample(samples, rng)
    try:
        back = invert_evaluate(net, net.evaluate(x), get_config().det_threshold)
    except NotInvertibleError as e:
        return InvertibilityCheck(False, None, f"not invertible by construction: {e}")
    error = float(np.max(np.abs(back - x))) if x.size else 0.0
    return InvertibilityCheck(error <= tol, error)


def check_width(net: Network, bound: int) -> bool:
    return net.width <= bound
