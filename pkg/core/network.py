"""
Network Model
=============

Feed-forward networks as immutable values.

This module contains:
- AffineMap: x -> W x + b
- Layer: affine map followed by a componentwise activation
- Network: input dimension, layers, final affine map
- evaluate / compose / invert_evaluate / invert_network
- propagate_intervals / layer_bounds: sound interval enclosures
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .activations import (
    ActivationTag, activation_interval, apply_activation, inverse_tag,
    invert_activation, is_invertible,
)
from .errors import DimensionMismatchError, NotInvertibleError
from .intervals import Box, affine_interval

logger = logging.getLogger(__name__)

DEFAULT_DET_THRESHOLD = 1e-12


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> weight @ x + bias, weight of shape (out_dim, in_dim)."""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weight = _frozen_array(self.weight, 2)
        bias = _frozen_array(self.bias, 1)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.shape[0]:
            raise DimensionMismatchError(
                f"weight {weight.shape} and bias {bias.shape} do not match")
        object.__setattr__(self, 'weight', weight)
        object.__setattr__(self, 'bias', bias)

    @classmethod
    def identity(cls, dim: int) -> 'AffineMap':
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def translation(cls, shift: np.ndarray) -> 'AffineMap':
        shift = np.asarray(shift, dtype=float)
        return cls(np.eye(shift.shape[0]), shift)

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply to a point (in_dim,) or a batch (k, in_dim)."""
        return x @ self.weight.T + self.bias

    def then(self, outer: 'AffineMap') -> 'AffineMap':
        """outer o self."""
        if outer.in_dim != self.out_dim:
            raise DimensionMismatchError(
                f"cannot chain {self.out_dim}-dim output into {outer.in_dim}-dim input")
        return AffineMap(outer.weight @ self.weight, outer.weight @ self.bias + outer.bias)

    def smallest_singular_value(self) -> float:
        if self.in_dim != self.out_dim:
            return 0.0
        if self.in_dim == 0:
            return np.inf
        return float(np.linalg.svd(self.weight, compute_uv=False)[-1])

    def is_invertible(self, threshold: float = DEFAULT_DET_THRESHOLD) -> bool:
        return self.smallest_singular_value() > threshold

    def inverse(self, threshold: float = DEFAULT_DET_THRESHOLD) -> 'AffineMap':
        if not self.is_invertible(threshold):
            raise NotInvertibleError(
                f"affine map {self.out_dim}x{self.in_dim} is singular "
                f"(smallest singular value {self.smallest_singular_value():.3e})")
        inv = np.linalg.inv(self.weight)
        return AffineMap(inv, -inv @ self.bias)

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Inverse image of a point or batch."""
        rhs = np.atleast_2d(y) - self.bias
        x = np.linalg.solve(self.weight, rhs.T).T
        return x if np.ndim(y) > 1 else x[0]

    def row_norm(self) -> float:
        """Operator norm induced by the max norm."""
        if self.weight.size == 0:
            return 0.0
        return float(np.max(np.sum(np.abs(self.weight), axis=1)))


@dataclass(frozen=True, eq=False)
class Layer:
    affine: AffineMap
    activation: ActivationTag

    @property
    def out_dim(self) -> int:
        return self.affine.out_dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_activation(self.activation, self.affine.apply(x))


@dataclass(frozen=True, eq=False)
class Network:
    """input_dim, a sequence of layers and the final (non-activated) affine map."""
    input_dim: int
    layers: Tuple[Layer, ...]
    final: AffineMap

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, 'layers', layers)
        dim = self.input_dim
        for index, layer in enumerate(layers):
            if layer.affine.in_dim != dim:
                raise DimensionMismatchError(
                    f"expects input of dim {layer.affine.in_dim}, got {dim}", index)
            dim = layer.affine.out_dim
        if self.final.in_dim != dim:
            raise DimensionMismatchError(
                f"final affine expects {self.final.in_dim}, got {dim}", len(layers))

    @classmethod
    def from_affine(cls, affine: AffineMap) -> 'Network':
        return cls(affine.in_dim, (), affine)

    @classmethod
    def identity(cls, dim: int) -> 'Network':
        return cls.from_affine(AffineMap.identity(dim))

    @property
    def output_dim(self) -> int:
        return self.final.out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        """Max intermediate dimension; 0 for an affine-only network."""
        return max((layer.out_dim for layer in self.layers), default=0)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return evaluate(self, x)

    def activations(self) -> List[ActivationTag]:
        return [layer.activation for layer in self.layers]

    def output_box(self, box: Box) -> Box:
        return layer_bounds(self, box)[-1][1]

    def summary(self) -> dict:
        return {
            'input_dim': self.input_dim,
            'output_dim': self.output_dim,
            'width': self.width,
            'depth': self.depth,
        }


def evaluate(net: Network, x: np.ndarray) -> np.ndarray:
    """Evaluate on a point (input_dim,) or a batch (k, input_dim)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    z = np.atleast_2d(arr)
    if z.shape[1] != net.input_dim:
        raise DimensionMismatchError(
            f"input has dim {z.shape[1]}, network expects {net.input_dim}", 0)
    for layer in net.layers:
        z = apply_activation(layer.activation, z @ layer.affine.weight.T + layer.affine.bias)
    z = z @ net.final.weight.T + net.final.bias
    return z[0] if single else z


def compose(outer: Network, inner: Network) -> Network:
    """Network for outer o inner; inner's final affine is fused into outer's first."""
    if outer.input_dim != inner.output_dim:
        raise DimensionMismatchError(
            f"inner output dim {inner.output_dim} != outer input dim {outer.input_dim}")
    if not outer.layers:
        return Network(inner.input_dim, inner.layers, inner.final.then(outer.final))
    first = outer.layers[0]
    fused = Layer(inner.final.then(first.affine), first.activation)
    return Network(inner.input_dim, inner.layers + (fused,) + outer.layers[1:], outer.final)


def compose_all(networks: Sequence[Network]) -> Network:
    """Compose a pipeline given in application order."""
    result = networks[0]
    for net in networks[1:]:
        result = compose(net, result)
    return result


def _check_invertible(net: Network, threshold: float) -> None:
    for index, layer in enumerate(net.layers):
        if layer.affine.in_dim != layer.affine.out_dim:
            raise NotInvertibleError("affine map is not square", index)
        if not layer.affine.is_invertible(threshold):
            raise NotInvertibleError("affine map is singular", index)
        if not is_invertible(layer.activation):
            raise NotInvertibleError(f"{layer.activation.describe()} is not invertible", index)
    if net.final.in_dim != net.final.out_dim or not net.final.is_invertible(threshold):
        raise NotInvertibleError("final affine map is not invertible", len(net.layers))


def invert_evaluate(net: Network, y: np.ndarray, threshold: float = DEFAULT_DET_THRESHOLD) -> np.ndarray:
    """x with evaluate(net, x) = y, peeling layers from the output side."""
    _check_invertible(net, threshold)
    z = net.final.solve(np.asarray(y, dtype=float))
    for layer in reversed(net.layers):
        z = layer.affine.solve(invert_activation(layer.activation, z))
    return z


def invert_network(net: Network, threshold: float = DEFAULT_DET_THRESHOLD) -> Network:
    """Explicit inverse network (LeakyRelu / Identity activations only)."""
    _check_invertible(net, threshold)
    affines = [layer.affine for layer in net.layers] + [net.final]
    tags = [inverse_tag(layer.activation) for layer in net.layers]
    inv_affines = [a.inverse(threshold) for a in reversed(affines)]
    # inverse: A_final^-1, act^-1, A_L^-1, ..., act^-1, A_1^-1
    layers = tuple(Layer(inv_affines[i], tags[len(tags) - 1 - i]) for i in range(len(tags)))
    return Network(net.output_dim, layers, inv_affines[-1])


def layer_bounds(net: Network, box: Box) -> List[Tuple[Box, Box]]:
    """(pre-activation, post-activation) boxes per layer, then the output box
    as the last entry (pre = post)."""
    if box.dim != net.input_dim:
        raise DimensionMismatchError(f"box has dim {box.dim}, network expects {net.input_dim}", 0)
    lo, hi = box.lo, box.hi
    bounds: List[Tuple[Box, Box]] = []
    for layer in net.layers:
        pre_lo, pre_hi = affine_interval(layer.affine.weight, layer.affine.bias, lo, hi)
        lo, hi = activation_interval(layer.activation, pre_lo, pre_hi)
        bounds.append((Box(pre_lo, pre_hi), Box(lo, hi)))
    out_lo, out_hi = affine_interval(net.final.weight, net.final.bias, lo, hi)
    out = Box(out_lo, out_hi)
    bounds.append((out, out))
    return bounds


def propagate_intervals(net: Network, box: Box) -> List[Box]:
    """Post-activation enclosure of every intermediate layer."""
    return [post for _, post in layer_bounds(net, box)[:-1]]
