"""
Single-Coordinate Transformation Compiler
=========================================

Compiles x -> (x_prefix, tau(x)) with tau strictly increasing in x_d into a
width-d network (Leaky-ReLU, or ReLU with one scratch channel).

Procedure on the unit box:
- slices u_i(p) = tau(p, i/N), i = 0..N
- g_0 = x_d + fit(u_0)
- for each slice step: subtract the current alpha1 slice, pre-normalise the
  ratio b = target / g(., alpha2) to be >= 1, sharpen until the ratio is 1
  within tolerance, add the alpha1 slice back

One sharpening step with gamma = max ratio on the prefix grid:
    L0 = {ratio <= gamma^(1/3)}, L1 = {ratio >= gamma^(2/3)}
    phi = D(., L0) / (D(., L0) + D(., L1)),  h = (1 - phi) * g(., alpha2)
    g <- gamma^(1/3) * lr_{gamma^(-1/3)}(g - h) + h
Values with x_d <= alpha1 (where g <= 0 <= h) are unchanged; on L1 the
slice at alpha2 grows by gamma^(1/3), so the max ratio drops to gamma^(2/3).
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from config import get_config
from core.errors import NonMonotoneError, RidgeFitError, SharpenFitError, ToleranceNotReachedError
from core.intervals import Box
from core.network import AffineMap, Network, compose_all, evaluate
from core.serializer import SliceTableDoc
from core.tape import ChannelTape
from handlers.stage_tracker import StageTracker
from .coupling_compiler import apply_translation
from .ridge import RidgeTerm, fit_ridge, fit_ridge_best_effort

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]

DEFAULT_GRID_RES = {0: 1, 1: 33, 2: 9, 3: 5}


def default_grid_res(prefix_dim: int) -> int:
    return DEFAULT_GRID_RES.get(prefix_dim, 3)


def predicted_iterations(gamma0: float, delta: float) -> int:
    """Sharpening steps needed to bring gamma0 below 1 + delta at the ideal 2/3 rate."""
    if gamma0 <= 1.0 + delta:
        return 0
    return int(np.ceil(np.log(np.log1p(delta) / np.log(gamma0)) / np.log(2.0 / 3.0)))


def slice_values(network: Network, prefix_points: np.ndarray, alpha: float) -> np.ndarray:
    """Last output coordinate of network at (p, alpha) for each prefix p."""
    pts = np.column_stack([prefix_points, np.full(prefix_points.shape[0], alpha)])
    return evaluate(network, pts)[:, -1]


def axis_knot_dictionary(prefix_grid: np.ndarray, beta: float) -> List[RidgeTerm]:
    """Ridge features with kinks on the prefix grid lines (1-2 prefix dims)."""
    dim = prefix_grid.shape[1]
    if dim == 0 or dim > 2:
        return []
    terms = []
    for j in range(dim):
        axis = np.unique(prefix_grid[:, j])
        for value in axis[1:-1]:
            b = np.zeros(dim)
            b[j] = 1.0
            terms.append(RidgeTerm(0.0, tuple(b), -float(value), beta))
    return terms


# =================
# SHARPENING
# =================

@dataclass(frozen=True)
class SharpenState:
    """Snapshot of one sharpening run.

    network realises g on domain; box encloses its output. target holds the
    wanted g(., alpha2) on prefix_grid, so the ratio is target / g(., alpha2).
    """
    network: Network
    box: Box
    domain: Box
    mode: str
    alpha1: float
    alpha2: float
    prefix_grid: np.ndarray
    target: np.ndarray
    gamma: float
    step: int = 0
    history: Tuple[float, ...] = ()
    fit_slack: float = 0.0
    alpha1_drift: float = 0.0

    @property
    def prefix_box(self) -> Box:
        return self.domain.prefix()

    def ratio(self) -> np.ndarray:
        return self.target / slice_values(self.network, self.prefix_grid, self.alpha2)

    @classmethod
    def create(cls, network: Network, out_box: Box, domain: Box, alpha1: float, alpha2: float,
               target: np.ndarray, grid_res: int, mode: str = 'leaky') -> 'SharpenState':
        grid = domain.prefix().grid(grid_res)
        current = slice_values(network, grid, alpha2)
        if np.any(current <= 0):
            i = int(np.argmin(current))
            raise NonMonotoneError("g(., alpha2) must be positive", list(grid[i]) + [alpha2])
        gamma = float(np.max(target / current))
        return cls(network, out_box, domain, mode, alpha1, alpha2, grid,
                   np.asarray(target, dtype=float), gamma, history=(gamma,))

    @classmethod
    def initial(cls, network: Network, b: Union[ScalarField, np.ndarray], alpha1: float, alpha2: float,
                domain: Box, grid_res: Optional[int] = None, mode: str = 'leaky',
                out_box: Optional[Box] = None) -> 'SharpenState':
        """State for f = network with target ratio b (b >= 1 on the prefix grid)."""
        grid_res = grid_res or default_grid_res(domain.dim - 1)
        grid = domain.prefix().grid(grid_res)
        ratio = np.asarray(b(grid) if callable(b) else b, dtype=float).reshape(-1)
        if np.min(ratio) < 1.0 - 1e-12:
            raise ValueError(f"target ratio must be >= 1, min is {np.min(ratio):.4g}")
        base = slice_values(network, grid, alpha2)
        out_box = out_box or network.output_box(domain)
        return cls.create(network, out_box, domain, alpha1, alpha2, ratio * base, grid_res, mode)


def _distance_weight(grid: np.ndarray, low: np.ndarray, high: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """phi = D(., L0) / (D(., L0) + D(., L1)); 1 where L0 is empty."""
    if not low.any():
        return lambda p: np.ones(p.shape[0])
    if not high.any():
        return lambda p: np.zeros(p.shape[0])
    if grid.shape[1] == 0:
        return lambda p: np.zeros(p.shape[0])
    tree_low, tree_high = cKDTree(grid[low]), cKDTree(grid[high])

    def phi(p: np.ndarray) -> np.ndarray:
        d_low = tree_low.query(p)[0]
        d_high = tree_high.query(p)[0]
        return d_low / (d_low + d_high)
    return phi


def sharpen_step(
    state: SharpenState,
    fit_tol: Optional[float] = None,
    max_terms: Optional[int] = None,
    seed: Optional[int] = None,
    slack_target: float = 0.02,
) -> SharpenState:
    """One sharpening step; a state with gamma <= 1 is returned unchanged.

    Raises:
        SharpenFitError: the fitted interpolant made no progress on gamma.
    """
    if state.gamma <= 1.0 + 1e-12:
        logger.info(f"Sharpen step refused: gamma {state.gamma:.6g} already <= 1")
        return state
    cfg = get_config()
    grid = state.prefix_grid
    current = slice_values(state.network, grid, state.alpha2)
    ratio = state.target / current
    gamma = float(np.max(ratio))
    cube = gamma ** (1.0 / 3.0)
    phi = _distance_weight(grid, ratio <= cube, ratio >= cube * cube)

    network = state.network
    alpha2 = state.alpha2
    h_oracle = lambda p: (1.0 - phi(p)) * slice_values(network, p, alpha2)

    if fit_tol is None:
        fit_tol = 0.25 * slack_target * float(np.min(state.target)) / max(cube - 1.0, 1e-6)
        fit_tol = min(fit_tol, 0.05 * float(np.max(state.target)))
    max_terms = max_terms or min(cfg.fit_max_terms, 128)
    try:
        h = fit_ridge(h_oracle, state.prefix_box, max_terms=max_terms, tol=fit_tol, seed=seed,
                      dictionary=axis_knot_dictionary(grid, cfg.fit_beta))
    except RidgeFitError as e:
        logger.warning(f"Sharpen step {state.step}: interpolant error {e.best_error:.3e} "
                       f"above {fit_tol:.3e}, using best fit")
        h = e.best

    last = state.domain.dim - 1
    tape = ChannelTape.resume(network, state.box, state.mode)
    apply_translation(tape, h.negated())
    tape.activate(last, 1.0 / cube)
    tape.scale_channel(last, cube, 0.0)
    apply_translation(tape, h)
    new_network = tape.network()

    new_gamma = float(np.max(state.target / slice_values(new_network, grid, alpha2)))
    if not new_gamma < gamma:
        raise SharpenFitError(f"sharpening made no progress (gamma {gamma:.6g} -> {new_gamma:.6g})")
    drift = float(np.max(np.abs(slice_values(new_network, grid, state.alpha1)
                                - slice_values(network, grid, state.alpha1))))
    slack = max(0.0, new_gamma - cube * cube)
    logger.debug(f"Sharpen step {state.step}: gamma {gamma:.6g} -> {new_gamma:.6g} "
                 f"(slack {slack:.2e}, {len(h.terms)} terms)")
    return replace(state, network=new_network, box=tape.box, gamma=new_gamma, step=state.step + 1,
                   history=state.history + (new_gamma,), fit_slack=slack,
                   alpha1_drift=state.alpha1_drift + drift)


def sharpen_until(state: SharpenState, threshold: float, max_steps: Optional[int] = None,
                  tracker: Optional[StageTracker] = None, **fit_kwargs) -> SharpenState:
    """Repeat sharpen_step until gamma - 1 < threshold or progress stops."""
    max_steps = max_steps or get_config().sharpen_max_steps
    while state.gamma - 1.0 >= threshold and state.step < max_steps:
        if tracker is not None:
            tracker.check(f"during sharpening at alpha2={state.alpha2:.4g}")
        try:
            state = sharpen_step(state, **fit_kwargs)
        except SharpenFitError as e:
            logger.warning(f"Stopping sharpening: {e}")
            break
    return state


# =================
# SLICE INDUCTION
# =================

@dataclass(frozen=True)
class SliceTable:
    """tau sampled at x_d = i/N (normalised) over the prefix grid."""
    slices: int
    box: Box
    prefix_grid: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            'slices': self.slices,
            'box': [list(pair) for pair in self.box.to_pairs()],
            'prefix_grid': self.prefix_grid.tolist(),
            'values': self.values.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: SliceTableDoc) -> 'SliceTable':
        grid = np.array(doc.prefix_grid, dtype=float).reshape(len(doc.prefix_grid), -1)
        return cls(doc.slices, Box.from_intervals(doc.box), grid, np.array(doc.values, dtype=float))

    def inter_slice_variation(self) -> float:
        return float(np.max(np.diff(self.values, axis=0)))


@dataclass
class SctCompileResult:
    network: Network
    slice_table: SliceTable
    slice_errors: List[float] = field(default_factory=list)
    gamma_histories: List[Tuple[float, ...]] = field(default_factory=list)

    @property
    def max_slice_error(self) -> float:
        return max(self.slice_errors, default=0.0)

    @property
    def inter_slice_variation(self) -> float:
        return self.slice_table.inter_slice_variation()

    def to_dict(self) -> dict:
        return {
            'width': self.network.width,
            'depth': self.network.depth,
            'slice_errors': self.slice_errors,
            'max_slice_error': self.max_slice_error,
            'inter_slice_variation': self.inter_slice_variation,
            'sharpen_steps': [len(h) - 1 for h in self.gamma_histories],
        }


def _normalising_maps(box: Box) -> Tuple[AffineMap, AffineMap]:
    width = box.width
    if np.any(width <= 0):
        raise ValueError("SCT box must have positive width in every coordinate")
    to_unit = AffineMap(np.diag(1.0 / width), -box.lo / width)
    back_scale = width.copy()
    back_scale[-1] = 1.0
    back_shift = box.lo.copy()
    back_shift[-1] = 0.0
    return to_unit, AffineMap(np.diag(back_scale), back_shift)


def compile_sct_with_report(
    oracle: ScalarField,
    box: Box,
    slices: int,
    tol: float,
    mode: str = 'leaky',
    grid_res: Optional[int] = None,
    seed: Optional[int] = None,
    tracker: Optional[StageTracker] = None,
) -> SctCompileResult:
    """Slice-induction compile of x -> (x_prefix, oracle(x)) on box.

    Raises:
        NonMonotoneError: oracle not strictly increasing across slices.
        ToleranceNotReachedError: slice error above tol after sharpening.
    """
    if slices < 1:
        raise ValueError("need at least one slice step")
    d = box.dim
    last = d - 1
    tracker = tracker or StageTracker().start()
    to_unit, from_unit = _normalising_maps(box)
    unit = Box.unit(d)
    grid_res = grid_res or default_grid_res(d - 1)
    grid = unit.prefix().grid(grid_res)
    fit_tol = 0.1 * tol

    def tau(points: np.ndarray) -> np.ndarray:
        return np.asarray(oracle(box.lo + points * box.width), dtype=float).reshape(-1)

    def u(i: int, prefix_points: np.ndarray) -> np.ndarray:
        return tau(np.column_stack([prefix_points, np.full(prefix_points.shape[0], i / slices)]))

    table_values = np.array([u(i, grid) for i in range(slices + 1)])
    steps = np.diff(table_values, axis=0)
    if np.any(steps <= 0):
        i, j = np.unravel_index(int(np.argmin(steps)), steps.shape)
        raise NonMonotoneError(f"tau is not increasing between slices {i} and {i + 1}",
                               list(box.lo[:-1] + grid[j] * box.width[:-1]))
    table = SliceTable(slices, box, box.lo[:-1] + grid * box.width[:-1], table_values)

    dictionary = axis_knot_dictionary(grid, get_config().fit_beta)
    tape = ChannelTape(unit, mode)
    first = fit_ridge_best_effort(lambda p: u(0, p), unit.prefix(), fit_tol, seed=seed,
                                 dictionary=dictionary)
    apply_translation(tape, first)

    result = SctCompileResult(Network.identity(d), table)
    for n0 in range(slices):
        alpha1, alpha2 = n0 / slices, (n0 + 1) / slices
        name = f"slice {n0 + 1}/{slices}"
        tracker.begin_stage(name)
        net = tape.network()
        held = fit_ridge_best_effort(lambda p: slice_values(net, p, alpha1), unit.prefix(), fit_tol,
                                    seed=seed, dictionary=dictionary)
        apply_translation(tape, held.negated())

        target = u(n0 + 1, grid) - held(grid)
        current = slice_values(tape.network(), grid, alpha2)
        if np.any(target <= 0) or np.any(current <= 0):
            tracker.fail_stage(name, "slice values not increasing")
            raise NonMonotoneError(f"slice {n0 + 1} does not increase over slice {n0}")
        floor = float(np.min(target / current))
        if floor < 1.0 - 1e-9:
            tape.activate(last, 1.0 / floor)
            tape.scale_channel(last, floor, 0.0)

        state = SharpenState.create(tape.network(), tape.box, unit, alpha1, alpha2,
                                    target, grid_res, mode)
        threshold = 0.5 * tol / float(np.max(target))
        state = sharpen_until(state, threshold, tracker=tracker, seed=seed)
        tape = ChannelTape.resume(state.network, state.box, mode)
        apply_translation(tape, held)

        error = float(np.max(np.abs(slice_values(tape.network(), grid, alpha2) - table_values[n0 + 1])))
        result.gamma_histories.append(state.history)
        tracker.complete_stage(name, error, gamma=state.gamma, sharpen_steps=state.step)

    network = tape.network()
    result.slice_errors = [
        float(np.max(np.abs(slice_values(network, grid, i / slices) - table_values[i])))
        for i in range(slices + 1)
    ]
    result.network = compose_all([Network.from_affine(to_unit), network, Network.from_affine(from_unit)])
    logger.info(f"compile_sct: width {result.network.width}, depth {result.network.depth}, "
                f"max slice error {result.max_slice_error:.3e}")
    if result.max_slice_error > tol:
        raise ToleranceNotReachedError(f"slice error above {tol:.3e}", result.max_slice_error)
    return result


def compile_sct_leakyrelu(oracle: ScalarField, box: Box, slices: int, tol: float,
                          mode: str = 'leaky', **kwargs) -> Network:
    """Width-d network whose last output matches oracle at every slice x_d = lo + i/N * width."""
    return compile_sct_with_report(oracle, box, slices, tol, mode=mode, **kwargs).network
