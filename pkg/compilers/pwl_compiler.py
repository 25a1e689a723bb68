"""
Piecewise Linear Compiler
=========================

Strictly increasing piecewise linear functions of one variable and their
exact compilation into width-1 Leaky-ReLU networks.

Key pieces:
- PwlFunction: breakpoints, slopes (one more than breakpoints), anchor point
- wrap_schedule: breakpoints peeled from largest to smallest; each wrap is
  f = (g2/g1) * lr_{g1/g2}(f_prev - f(alpha)) + f(alpha)
- pwl_approximate: adaptive interpolation of an increasing g to a tolerance
- generalize_activation: swap a custom increasing activation for
  compiled Leaky-ReLU pieces, with the error budget split per layer
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import get_config
from core.activations import lipschitz_on
from core.errors import BudgetSplitError, NonMonotoneError, ToleranceNotReachedError
from core.intervals import Box
from core.network import AffineMap, Layer, Network, compose_all, layer_bounds
from core.activations import LeakyRelu, get_activation
from core.serializer import PwlDoc
from core.tape import ChannelTape

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PwlFunction:
    """f(x) with slopes[0] left of breakpoints[0], slopes[i] on
    [breakpoints[i-1], breakpoints[i]] and slopes[-1] on the right,
    pinned by f(anchor[0]) = anchor[1]."""
    breakpoints: Tuple[float, ...]
    slopes: Tuple[float, ...]
    anchor: Tuple[float, float]

    def __post_init__(self):
        bps = tuple(float(v) for v in self.breakpoints)
        slopes = tuple(float(v) for v in self.slopes)
        anchor = (float(self.anchor[0]), float(self.anchor[1]))
        if len(slopes) != len(bps) + 1:
            raise ValueError(f"need {len(bps) + 1} slopes for {len(bps)} breakpoints, got {len(slopes)}")
        if any(b >= a for a, b in zip(bps[1:], bps[:-1])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(np.isfinite(bps + slopes + anchor)):
            raise ValueError("PWL parameters must be finite")
        object.__setattr__(self, 'breakpoints', bps)
        object.__setattr__(self, 'slopes', slopes)
        object.__setattr__(self, 'anchor', anchor)

    @property
    def is_increasing(self) -> bool:
        return all(s > 0 for s in self.slopes)

    def knot_values(self) -> np.ndarray:
        """f at every breakpoint."""
        bps = np.array(self.breakpoints)
        slopes = np.array(self.slopes)
        if bps.size == 0:
            return bps
        rel = np.concatenate([[0.0], np.cumsum(slopes[1:-1] * np.diff(bps))])
        return rel + (self.anchor[1] - self._relative(self.anchor[0], rel))

    def _relative(self, x: float, rel: np.ndarray) -> float:
        bps = self.breakpoints
        j = int(np.searchsorted(bps, x, side='right'))
        if j == 0:
            return self.slopes[0] * (x - bps[0])
        return rel[j - 1] + self.slopes[j] * (x - bps[j - 1])

    def to_dict(self) -> dict:
        return {'breakpoints': list(self.breakpoints), 'slopes': list(self.slopes),
                'anchor': list(self.anchor)}

    @classmethod
    def from_doc(cls, doc: PwlDoc) -> 'PwlFunction':
        return cls(tuple(doc.breakpoints), tuple(doc.slopes), (doc.anchor[0], doc.anchor[1]))


def eval_pwl(f: PwlFunction, x) -> np.ndarray:
    """Vectorised evaluation."""
    x = np.asarray(x, dtype=float)
    if not f.breakpoints:
        return f.slopes[0] * (x - f.anchor[0]) + f.anchor[1]
    bps = np.array(f.breakpoints)
    slopes = np.array(f.slopes)
    values = f.knot_values()
    j = np.searchsorted(bps, x, side='right')
    left = np.maximum(j - 1, 0)
    return values[left] + slopes[j] * (x - bps[left])


def simplify_pwl(f: PwlFunction) -> PwlFunction:
    """Drop breakpoints whose two neighbouring slopes are equal."""
    keep = [i for i in range(len(f.breakpoints)) if f.slopes[i] != f.slopes[i + 1]]
    if len(keep) == len(f.breakpoints):
        return f
    slopes = [f.slopes[0]] + [f.slopes[i + 1] for i in keep]
    logger.debug(f"Removed {len(f.breakpoints) - len(keep)} phantom breakpoints")
    return PwlFunction(tuple(f.breakpoints[i] for i in keep), tuple(slopes), f.anchor)


@dataclass(frozen=True)
class PwlSchedule:
    """steps[0] maps x to the first pre-activation; steps[i] maps the output
    of wrap i to the next pre-activation (or to f for the last one)."""
    steps: Tuple[Tuple[float, float], ...]
    betas: Tuple[float, ...]


def wrap_schedule(f: PwlFunction) -> PwlSchedule:
    """Exact wrap recursion for an increasing PWL (phantom breakpoints removed)."""
    if not f.is_increasing:
        bad = next(i for i, s in enumerate(f.slopes) if s <= 0)
        raise NonMonotoneError(f"slope {bad} is {f.slopes[bad]}, must be positive")
    f = simplify_pwl(f)
    s = f.slopes
    if not f.breakpoints:
        return PwlSchedule(((s[0], f.anchor[1] - s[0] * f.anchor[0]),), ())
    values = f.knot_values()
    steps: List[Tuple[float, float]] = [(s[0], 0.0 - s[0] * f.breakpoints[0])]
    betas = [s[i] / s[i + 1] for i in range(len(f.breakpoints))]
    for i in range(1, len(f.breakpoints)):
        steps.append((s[i] / s[i - 1], float(values[i - 1] - values[i])))
    n = len(f.breakpoints)
    steps.append((s[n] / s[n - 1], float(values[n - 1])))
    return PwlSchedule(tuple(steps), tuple(betas))


def compile_increasing_pwl(f: PwlFunction) -> Network:
    """Width-1 Leaky-ReLU network equal to f; depth = number of breakpoints."""
    schedule = wrap_schedule(f)
    layers = []
    for (scale, offset), beta in zip(schedule.steps, schedule.betas):
        layers.append(Layer(AffineMap([[scale]], [offset]), LeakyRelu(beta)))
    scale, offset = schedule.steps[-1]
    return Network(1, tuple(layers), AffineMap([[scale]], [offset]))


def apply_pwl_on_channel(tape: ChannelTape, k: int, f: PwlFunction) -> ChannelTape:
    """x_k <- f(x_k) on a tape, one layer per breakpoint."""
    schedule = wrap_schedule(f)
    tape.scale_channel(k, *schedule.steps[0])
    for beta, step in zip(schedule.betas, schedule.steps[1:]):
        tape.activate(k, beta)
        tape.scale_channel(k, *step)
    return tape


def broadcast_scalar_network(net: Network, dim: int) -> Network:
    """Apply a width-1 scalar network to each of dim coordinates."""
    if net.input_dim != 1 or net.output_dim != 1 or net.width > 1:
        raise ValueError("broadcast needs a scalar width-1 network")
    eye = np.eye(dim)

    def widen(affine: AffineMap) -> AffineMap:
        return AffineMap(affine.weight[0, 0] * eye, np.full(dim, affine.bias[0]))

    layers = tuple(Layer(widen(layer.affine), layer.activation) for layer in net.layers)
    return Network(dim, layers, widen(net.final))


def _as_vectorized(g: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def call(xs: np.ndarray) -> np.ndarray:
        out = np.asarray(g(xs), dtype=float)
        if out.shape != xs.shape:
            out = np.vectorize(lambda v: float(g(v)))(xs)
        return out
    return call


def pwl_approximate(
    g: Callable,
    a: float,
    b: float,
    tol: float,
    max_knots: Optional[int] = None,
    refine: int = 8,
    initial_knots: Sequence[float] = (),
) -> PwlFunction:
    """Interpolating PWL of an increasing g on [a, b] with sup error <= tol,
    measured on a validation grid `refine` times finer than the knots."""
    if not (np.isfinite(a) and np.isfinite(b) and b > a):
        raise ValueError(f"invalid interval [{a}, {b}]")
    max_knots = max_knots or get_config().pwl_max_knots
    refine = max(refine, 4)
    fn = _as_vectorized(g)
    knots = np.unique(np.concatenate([[a, b], [k for k in initial_knots if a < k < b]]))
    fractions = np.arange(1, refine) / refine
    while True:
        values = fn(knots)
        steps = np.diff(values)
        if np.any(steps <= 0):
            i = int(np.argmax(steps <= 0))
            raise NonMonotoneError(f"g is not strictly increasing near {knots[i]:.6g}", [knots[i]])
        h = np.diff(knots)
        samples = knots[:-1, None] + fractions[None, :] * h[:, None]
        interp = values[:-1, None] + fractions[None, :] * steps[:, None]
        errors = np.abs(fn(samples.ravel()).reshape(samples.shape) - interp)
        seg_err = errors.max(axis=1)
        worst = float(seg_err.max())
        if worst <= tol:
            break
        if knots.size >= max_knots:
            raise ToleranceNotReachedError(
                f"PWL approximation on [{a}, {b}] hit the {max_knots}-knot budget", worst)
        bad = np.nonzero(seg_err > tol)[0][: max_knots - knots.size]
        new = samples[bad, errors[bad].argmax(axis=1)]
        knots = np.unique(np.concatenate([knots, new]))
    slopes = steps / h
    logger.debug(f"PWL approximation on [{a:.4g}, {b:.4g}]: {knots.size} knots, error {worst:.3e}")
    return PwlFunction(tuple(knots[1:-1]), tuple(slopes), (float(a), float(values[0])))


def generalize_activation(net: Network, box: Box, tol: float) -> Network:
    """Replace every custom increasing activation by compiled Leaky-ReLU pieces.

    The budget tol is shared equally between custom layers, each share
    divided by the Lipschitz constant of everything downstream of it.
    """
    tags = net.activations()
    if any(tag.kind == 'relu' for tag in tags):
        raise NonMonotoneError("relu is not strictly increasing")
    custom_layers = [i for i, tag in enumerate(tags) if tag.kind == 'custom']
    if not custom_layers:
        return net
    for i in custom_layers:
        if not get_activation(tags[i].name).increasing:
            raise NonMonotoneError(f"activation '{tags[i].name}' is not increasing")

    bounds = layer_bounds(net, box)
    ranges = [(float(pre.lo.min()), float(pre.hi.max())) for pre, _ in bounds[:-1]]
    if not all(np.isfinite(r).all() for r in ranges):
        raise BudgetSplitError("pre-activation bounds are unbounded")

    # downstream[i]: Lipschitz constant of the map after layer i's activation
    downstream = [0.0] * len(tags)
    lip = net.final.row_norm()
    for i in range(len(tags) - 1, -1, -1):
        downstream[i] = lip
        lip *= lipschitz_on(tags[i], *ranges[i]) * net.layers[i].affine.row_norm()
    if not all(np.isfinite(downstream)):
        raise BudgetSplitError("downstream Lipschitz bound is not finite")

    pieces: List[Network] = []
    for i, layer in enumerate(net.layers):
        if tags[i].kind != 'custom':
            pieces.append(Network(layer.affine.in_dim, (layer,), AffineMap.identity(layer.out_dim)))
            continue
        share = 0.5 * tol / (len(custom_layers) * max(downstream[i], 1e-300))
        lo, hi = ranges[i]
        pad = tol + 1e-9 * (1.0 + hi - lo)
        act = get_activation(tags[i].name)
        pwl = pwl_approximate(act.fn, lo - pad, hi + pad, share)
        logger.info(f"Layer {i}: '{act.name}' on [{lo:.4g}, {hi:.4g}] -> "
                    f"{len(pwl.breakpoints)} breakpoints (share {share:.2e})")
        pieces.append(Network.from_affine(layer.affine))
        pieces.append(broadcast_scalar_network(compile_increasing_pwl(pwl), layer.out_dim))
    pieces.append(Network.from_affine(net.final))
    return compose_all(pieces)
