"""
Channel Tape
============

Builds narrow networks one logical coordinate operation at a time.

A tape tracks the logical vector x in R^d produced so far, a sound Box
for it, the layers already emitted and the pending affine map from the
physical channels of the last layer to x. Affine operations fold into the
pending map. activate(k, beta) applies lr_beta to x_k alone: every other
channel is shifted by M_j so it is >= margin on the tracked box, which
makes the activation the identity there; the shift is undone in the next
pending map.

Modes:
- 'leaky': width d, LeakyRelu layers
- 'relu': width d+1, ReLU layers; the extra channel holds relu(-x_k) so
  lr_beta(x_k) = relu(x_k) - beta * relu(-x_k) is recovered exactly
"""

import logging
from typing import List, Optional

import numpy as np

from config import get_config
from .activations import RELU, LeakyRelu, leaky_relu
from .intervals import Box, affine_interval
from .network import AffineMap, Layer, Network

logger = logging.getLogger(__name__)

TAPE_MODES = ('leaky', 'relu')


class ChannelTape:
    """Mutable builder for single-active-channel networks."""

    def __init__(self, box: Box, mode: str = 'leaky', margin: Optional[float] = None):
        if mode not in TAPE_MODES:
            raise ValueError(f"Unknown tape mode '{mode}', expected one of {TAPE_MODES}")
        if not box.is_finite():
            raise ValueError("ChannelTape needs a bounded box")
        self.mode = mode
        self.dim = box.dim
        self.box = box
        self.margin = get_config().positivity_margin if margin is None else float(margin)
        self.input_dim = box.dim
        self._layers: List[Layer] = []
        self._pending = AffineMap.identity(box.dim)

    @classmethod
    def resume(cls, network: Network, box: Box, mode: str = 'leaky',
               margin: Optional[float] = None) -> 'ChannelTape':
        """Continue appending to an emitted network whose output lies in box."""
        tape = cls(box, mode, margin)
        tape.input_dim = network.input_dim
        tape._layers = list(network.layers)
        tape._pending = network.final
        return tape

    @property
    def depth(self) -> int:
        return len(self._layers)

    def network(self) -> Network:
        return Network(self.input_dim, tuple(self._layers), self._pending)

    # ------------------------------------------------------------------
    # Affine operations
    # ------------------------------------------------------------------

    def affine(self, op: AffineMap, out_box: Optional[Box] = None) -> 'ChannelTape':
        """x <- op(x). out_box overrides the interval enclosure when known."""
        if op.in_dim != self.dim or op.out_dim != self.dim:
            raise ValueError(f"tape operations must map R^{self.dim} to itself")
        self._pending = self._pending.then(op)
        if out_box is None:
            lo, hi = affine_interval(op.weight, op.bias, self.box.lo, self.box.hi)
            out_box = Box(lo, hi)
        self.box = out_box
        return self

    def scale_channel(self, k: int, scale: float, offset: float = 0.0) -> 'ChannelTape':
        """x_k <- scale * x_k + offset."""
        weight = np.eye(self.dim)
        weight[k, k] = scale
        bias = np.zeros(self.dim)
        bias[k] = offset
        ends = sorted((scale * self.box.lo[k] + offset, scale * self.box.hi[k] + offset))
        return self.affine(AffineMap(weight, bias), self.box.replace(k, ends[0], ends[1]))

    # ------------------------------------------------------------------
    # Activation on a single channel
    # ------------------------------------------------------------------

    def activate(self, k: int, beta: float) -> 'ChannelTape':
        """x_k <- lr_beta(x_k); all other coordinates unchanged."""
        if beta <= 0 or not np.isfinite(beta):
            raise ValueError(f"slope must be positive, got {beta}")
        if beta == 1.0:
            return self
        shifts = np.maximum(0.0, self.margin - self.box.lo)
        shifts[k] = 0.0
        d = self.dim
        if self.mode == 'leaky':
            layer_affine = AffineMap(self._pending.weight, self._pending.bias + shifts)
            self._layers.append(Layer(layer_affine, LeakyRelu(beta)))
            self._pending = AffineMap(np.eye(d), -shifts)
        else:
            weight = np.vstack([self._pending.weight, -self._pending.weight[k:k + 1]])
            bias = np.append(self._pending.bias + shifts, -self._pending.bias[k])
            self._layers.append(Layer(AffineMap(weight, bias), RELU))
            readout = np.hstack([np.eye(d), np.zeros((d, 1))])
            readout[k, d] = -beta
            self._pending = AffineMap(readout, -shifts)
        lo_k, hi_k = leaky_relu(beta, np.array([self.box.lo[k], self.box.hi[k]]))
        self.box = self.box.replace(k, lo_k, hi_k)
        return self
