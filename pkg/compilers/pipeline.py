"""
Pipeline Assembly
=================

End-to-end compilation of a target f: R^n -> R^m given as an invertible
program G on R^d, d = max(2n+1, m):

    network = project(d, m) o H o include(n, d)

where H approximates G with width d + alpha(sigma). Inclusion and
projection are exact affine maps, so H receives the whole tolerance.

Every non-affine stage goes through the lift of its class: compile_inn on
a Leaky-ReLU tape, lift_relu for ReLU (coupling flows and ridge sums alike)
and lift_general for a registered sigma.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import get_config
from core.activations import registered_activations
from core.errors import WidthBudgetError
from core.intervals import Box
from core.network import AffineMap, Network, compose_all
from core.serializer import DiffeoTargetDoc
from handlers.stage_tracker import StageTracker
from .inn_compiler import (
    AcfStage, AffineStage, InnProgram, SctStage, Stage, compile_inn, evaluate_inn_program,
)
from .lifts import lift_general, lift_relu

logger = logging.getLogger(__name__)

ACTIVATION_KINDS = ('leaky', 'relu', 'general')


@dataclass(frozen=True)
class ActivationClass:
    kind: str
    sigma: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation class '{self.kind}'")
        if self.kind == 'general' and self.sigma not in registered_activations():
            raise ValueError(f"general class needs a registered activation, got {self.sigma!r}")

    def describe(self) -> str:
        return f"general:{self.sigma}" if self.kind == 'general' else self.kind


def LeakyReluClass() -> ActivationClass:
    return ActivationClass('leaky')


def ReluClass() -> ActivationClass:
    return ActivationClass('relu')


def GeneralClass(sigma: str) -> ActivationClass:
    return ActivationClass('general', sigma)


def parse_activation_class(text: str) -> ActivationClass:
    """'leaky-relu', 'relu' or 'general:<name>'."""
    if text in ('leaky-relu', 'leaky'):
        return LeakyReluClass()
    if text == 'relu':
        return ReluClass()
    if text.startswith('general:'):
        return GeneralClass(text.split(':', 1)[1])
    raise ValueError(f"unknown activation '{text}' (expected leaky-relu, relu or general:<name>)")


def alpha_of(cls: ActivationClass) -> int:
    return {'leaky': 0, 'relu': 1, 'general': 2}[cls.kind]


def embedding_dim(n: int, m: int) -> int:
    return max(2 * n + 1, m)


def min_width_bound(n: int, m: int, cls: ActivationClass) -> int:
    if n < 1 or m < 1:
        raise ValueError(f"dimensions must be positive, got n={n}, m={m}")
    return embedding_dim(n, m) + alpha_of(cls)


def include(n: int, d: int) -> Network:
    """Zero-padding x -> (x, 0, ..., 0)."""
    if d < n:
        raise ValueError(f"cannot include R^{n} into R^{d}")
    return Network.from_affine(AffineMap(np.eye(d, n), np.zeros(d)))


def project(d: int, m: int) -> Network:
    """Projection onto the first m coordinates."""
    if m > d:
        raise ValueError(f"cannot project R^{d} onto R^{m}")
    return Network.from_affine(AffineMap(np.eye(m, d), np.zeros(m)))


@dataclass(frozen=True)
class DiffeoTarget:
    n: int
    m: int
    program: InnProgram

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"dimensions must be positive, got n={self.n}, m={self.m}")
        if self.program.d != self.d:
            raise ValueError(f"program acts on R^{self.program.d}, expected R^{self.d} "
                             f"for n={self.n}, m={self.m}")

    @property
    def d(self) -> int:
        return embedding_dim(self.n, self.m)

    @classmethod
    def from_doc(cls, doc: DiffeoTargetDoc) -> 'DiffeoTarget':
        return cls(doc.n, doc.m, InnProgram.from_doc(doc.program))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Reference value project(G(include(x)))."""
        arr = np.asarray(x, dtype=float)
        pts = np.atleast_2d(arr)
        padded = np.hstack([pts, np.zeros((pts.shape[0], self.d - self.n))])
        out = evaluate_inn_program(self.program, padded)[:, :self.m]
        return out if arr.ndim > 1 else out[0]


def verification_box(box: Box, d: int) -> Box:
    """box x [0,1]^(d-n), the bounded stand-in for box x R^(d-n)."""
    if d < box.dim:
        raise ValueError(f"box has dim {box.dim} > {d}")
    return box.product(Box.unit(d - box.dim)) if d > box.dim else box


def compile_pipeline(target: DiffeoTarget, cls: ActivationClass, box: Box, tol: float,
                     seed: Optional[int] = None, tracker: Optional[StageTracker] = None) -> Network:
    """Network R^n -> R^m of width at most min_width_bound(n, m, cls).

    Raises:
        StageCompileError: a stage failed, with its index.
        WidthBudgetError: the assembled network is wider than the bound.
    """
    if box.dim != target.n:
        raise ValueError(f"box has dim {box.dim}, target input dim is {target.n}")
    seed = get_config().seed if seed is None else seed
    d = target.d
    inner_box = verification_box(box, d)
    logger.info(f"Pipeline: n={target.n}, m={target.m}, d={d}, class {cls.describe()}, "
                f"{len(target.program.stages)} stages")

    if cls.kind == 'leaky':
        core = compile_inn(target.program, inner_box, tol, 'leaky', seed, tracker)
    elif cls.kind == 'relu':
        def compile_relu(stage: Stage, stage_box: Box, budget: float) -> Network:
            if isinstance(stage, AffineStage):
                return Network.from_affine(stage.affine)
            if isinstance(stage, AcfStage):
                return lift_relu(stage.spec, d, stage_box, budget, seed=seed)
            if stage.oracle is None:
                return stage.network
            return lift_relu(stage.oracle, d, stage_box, budget, slices=stage.slices, seed=seed)

        core = compile_inn(target.program, inner_box, tol, 'relu', seed, tracker,
                           stage_compiler=compile_relu)
    else:
        def compile_general(stage: Stage, stage_box: Box, budget: float) -> Network:
            if isinstance(stage, AffineStage):
                return Network.from_affine(stage.affine)
            if isinstance(stage, SctStage) and stage.oracle is None:
                return stage.network
            if isinstance(stage, AcfStage):
                return lift_general(cls.sigma, stage.spec, d, stage_box, budget, seed=seed)
            return lift_general(cls.sigma, stage.oracle, d, stage_box, budget, seed=seed)

        core = compile_inn(target.program, inner_box, tol, 'leaky', seed, tracker,
                           stage_compiler=compile_general,
                           exact=lambda stage: isinstance(stage, AffineStage))

    network = compose_all([include(target.n, d), core, project(d, target.m)])
    bound = min_width_bound(target.n, target.m, cls)
    if network.width > bound:
        raise WidthBudgetError(f"pipeline network has width {network.width} > bound {bound}")
    logger.info(f"Pipeline done: width {network.width} (bound {bound}), depth {network.depth}")
    return network
