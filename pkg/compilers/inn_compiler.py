"""
INN Program Compiler
====================

Compiles a sequence of invertible stages on R^d (affine maps, affine
coupling flows, single-coordinate transformations) into one network.

The tolerance is split over the stages that approximate: each such stage
gets an equal share divided by the Lipschitz constant of everything after
it. Stage input boxes come from sound per-stage enclosures, widened by the
upstream budget so approximate inputs stay inside them.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from config import get_config
from core.errors import NarrowForgeError, NotInvertibleError, StageCompileError
from core.intervals import Box, affine_interval
from core.network import AffineMap, Network, compose_all
from core.serializer import InnProgramDoc, affine_from_doc
from handlers.stage_tracker import StageTracker
from .coupling_compiler import AcfSpec, acf_output_box, compile_acf, evaluate_acf
from .expressions import ExpressionOracle
from .sct_compiler import compile_sct_leakyrelu

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AffineStage:
    affine: AffineMap


@dataclass(frozen=True)
class AcfStage:
    spec: AcfSpec


@dataclass(frozen=True)
class SctStage:
    """oracle gives the new last coordinate; a precompiled network may be
    supplied instead together with its known error."""
    oracle: Optional[ScalarField] = None
    slices: int = 8
    network: Optional[Network] = None
    declared_error: float = 0.0


Stage = Union[AffineStage, AcfStage, SctStage]
StageCompiler = Callable[[Stage, Box, float], Network]


@dataclass(frozen=True)
class InnProgram:
    d: int
    stages: Tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, 'stages', tuple(self.stages))
        threshold = get_config().det_threshold
        for index, stage in enumerate(self.stages):
            if isinstance(stage, AffineStage):
                if stage.affine.in_dim != self.d or stage.affine.out_dim != self.d:
                    raise ValueError(f"stage {index}: affine map is not {self.d}x{self.d}")
                if not stage.affine.is_invertible(threshold):
                    raise NotInvertibleError(f"stage {index}: affine map is singular")
            elif isinstance(stage, AcfStage):
                if stage.spec.d != self.d:
                    raise ValueError(f"stage {index}: ACF has dim {stage.spec.d}, expected {self.d}")
            elif isinstance(stage, SctStage):
                if stage.oracle is None and stage.network is None:
                    raise ValueError(f"stage {index}: SCT stage needs an oracle or a network")
            else:
                raise TypeError(f"stage {index}: unknown stage type {type(stage).__name__}")

    @classmethod
    def from_doc(cls, doc: InnProgramDoc) -> 'InnProgram':
        stages: List[Stage] = []
        for index, stage in enumerate(doc.stages):
            given = [k for k in ('affine', 'acf', 'sct') if getattr(stage, k) is not None]
            if len(given) != 1:
                raise ValueError(f"stage {index}: expected exactly one of affine/acf/sct, got {given}")
            if stage.affine is not None:
                stages.append(AffineStage(affine_from_doc(stage.affine, doc.d)))
            elif stage.acf is not None:
                stages.append(AcfStage(AcfSpec.from_doc(stage.acf)))
            else:
                stages.append(SctStage(ExpressionOracle(stage.sct.expression, doc.d), stage.sct.slices))
        return cls(doc.d, tuple(stages))


def evaluate_stage(stage: Stage, x: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(stage, AffineStage):
        return stage.affine.apply(pts)
    if isinstance(stage, AcfStage):
        return evaluate_acf(stage.spec, pts)
    if stage.oracle is None:
        return stage.network.evaluate(pts)
    out = pts.copy()
    out[:, -1] = stage.oracle(pts)
    return out


def evaluate_inn_program(program: InnProgram, x: np.ndarray) -> np.ndarray:
    """Reference evaluation of the composed stages."""
    arr = np.asarray(x, dtype=float)
    z = np.atleast_2d(arr)
    for stage in program.stages:
        z = evaluate_stage(stage, z)
    return z if arr.ndim > 1 else z[0]


def _grid_side(box: Box) -> int:
    return min(17, max(3, int(np.floor(4096 ** (1.0 / max(box.dim, 1))))))


def _sample_grid(box: Box) -> np.ndarray:
    return box.grid(_grid_side(box))


def measure_stage_error(stage: Stage, network: Network, box: Box) -> float:
    """Sup-norm distance between a compiled stage and its reference, sampled
    on the stage grid and its cell centres."""
    side = _grid_side(box)
    points = np.vstack([box.grid(side), box.midpoint_grid(side)])
    return float(np.max(np.abs(network.evaluate(points) - evaluate_stage(stage, points))))


def stage_output_box(stage: Stage, box: Box) -> Box:
    if isinstance(stage, AffineStage):
        lo, hi = affine_interval(stage.affine.weight, stage.affine.bias, box.lo, box.hi)
        return Box(lo, hi)
    if isinstance(stage, AcfStage):
        return acf_output_box(stage.spec, box)
    if stage.oracle is None:
        return stage.network.output_box(box)
    values = stage.oracle(_sample_grid(box))
    span = float(np.max(values) - np.min(values))
    pad = 0.1 * span + 1e-6
    return box.with_last(float(np.min(values)) - pad, float(np.max(values)) + pad)


def stage_lipschitz(stage: Stage, box: Box) -> float:
    """Max-norm Lipschitz bound of the stage on box."""
    if isinstance(stage, AffineStage):
        return stage.affine.row_norm()
    if isinstance(stage, AcfStage):
        prefix = box.prefix()
        s_hi = stage.spec.s.interval(prefix)[1]
        x_max = float(np.max(np.abs([box.lo[-1], box.hi[-1]])))
        last_row = np.exp(s_hi) * (1.0 + x_max * stage.spec.s.lipschitz(prefix)) + stage.spec.t.lipschitz(prefix)
        return max(1.0, float(last_row))
    # finite differences on a lattice, with head room for what the lattice misses
    grid = _sample_grid(box)
    h = 1e-6 * (1.0 + float(np.max(box.width)))
    base = evaluate_stage(stage, grid)[:, -1]
    row = np.zeros(grid.shape[0])
    for j in range(box.dim):
        bumped = grid.copy()
        bumped[:, j] += h
        row += np.abs(evaluate_stage(stage, bumped)[:, -1] - base) / h
    return max(1.0, 1.5 * float(np.max(row)))


def _is_exact(stage: Stage) -> bool:
    if isinstance(stage, AffineStage):
        return True
    if isinstance(stage, AcfStage):
        return not stage.spec.s.terms
    return stage.oracle is None


def compile_stage(stage: Stage, box: Box, tol: float, mode: str = 'leaky',
                  seed: Optional[int] = None) -> Network:
    if isinstance(stage, AffineStage):
        return Network.from_affine(stage.affine)
    if isinstance(stage, AcfStage):
        return compile_acf(stage.spec, box, tol, mode=mode)
    if stage.oracle is None:
        return stage.network
    return compile_sct_leakyrelu(stage.oracle, box, stage.slices, tol, mode=mode, seed=seed)


def plan_budget(program: InnProgram, box: Box, tol: float,
                exact: Callable[[Stage], bool] = _is_exact) -> Tuple[List[Box], List[float]]:
    """Input box and error budget of every stage."""
    boxes = [box]
    lips = []
    for stage in program.stages:
        lips.append(stage_lipschitz(stage, boxes[-1]))
        boxes.append(stage_output_box(stage, boxes[-1]))
    inexact = [i for i, stage in enumerate(program.stages) if not exact(stage)]
    budgets = [0.0] * len(program.stages)
    for i in inexact:
        downstream = float(np.prod(lips[i + 1:]))
        budgets[i] = 0.8 * tol / (len(inexact) * downstream)
    return boxes[:-1], budgets


def compile_inn(program: InnProgram, box: Box, tol: float, mode: str = 'leaky',
                seed: Optional[int] = None, tracker: Optional[StageTracker] = None,
                stage_compiler: Optional[StageCompiler] = None,
                exact: Callable[[Stage], bool] = _is_exact) -> Network:
    """Compile all stages and compose them in order.

    stage_compiler(stage, box, budget) replaces the default per-stage
    compile; the pipeline uses it for the ReLU and general lifts.

    Raises:
        StageCompileError: wraps the failure of stage k.
    """
    if box.dim != program.d:
        raise ValueError(f"box has dim {box.dim}, program has dim {program.d}")
    tracker = tracker or StageTracker().start()
    boxes, budgets = plan_budget(program, box, tol, exact)
    if stage_compiler is None:
        stage_compiler = lambda stage, stage_box, budget: compile_stage(stage, stage_box, budget, mode, seed)
    upstream = 0.0
    networks = []
    for index, stage in enumerate(program.stages):
        name = f"stage {index} ({type(stage).__name__})"
        tracker.begin_stage(name, budgets[index])
        try:
            stage_box = boxes[index].widen(upstream) if upstream > 0 else boxes[index]
            networks.append(stage_compiler(stage, stage_box, max(budgets[index], 1e-15)))
        except (NarrowForgeError, ValueError) as e:
            tracker.fail_stage(name, str(e))
            raise StageCompileError(index, e) from e
        if isinstance(stage, SctStage) and stage.oracle is None:
            error = stage.declared_error
        elif budgets[index] == 0.0:
            error = 0.0
        else:
            error = measure_stage_error(stage, networks[-1], stage_box)
            if error > budgets[index]:
                logger.warning(f"{name}: measured error {error:.3e} exceeds its budget {budgets[index]:.3e}")
        tracker.complete_stage(name, error, width=networks[-1].width, depth=networks[-1].depth)
        upstream = max(upstream, tol)
    if not networks:
        return Network.identity(program.d)
    return compose_all(networks)
