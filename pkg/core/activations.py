"""
Activations
===========

Activation tags and the registry of named scalar activations.

- ActivationTag: LeakyRelu(beta), Relu, Identity or Custom(name)
- register_activation / get_activation: registry of custom activations,
  each with its registered point alpha and optional derivative / inverse
- apply_activation / invert_activation / activation_interval
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import NotInvertibleError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ActivationTag:
    """Which activation a layer applies componentwise.

    kind is one of 'leaky_relu', 'relu', 'identity', 'custom'.
    """
    kind: str
    beta: Optional[float] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ('leaky_relu', 'relu', 'identity', 'custom'):
            raise ValueError(f"Unknown activation kind: {self.kind}")
        if self.kind == 'leaky_relu':
            if self.beta is None or not np.isfinite(self.beta) or self.beta <= 0:
                raise ValueError(f"LeakyRelu slope must be positive, got {self.beta}")
        if self.kind == 'custom' and not self.name:
            raise ValueError("Custom activation needs a name")

    @property
    def is_leaky(self) -> bool:
        return self.kind == 'leaky_relu'

    def describe(self) -> str:
        if self.kind == 'leaky_relu':
            return f"leaky_relu({self.beta!r})"
        if self.kind == 'custom':
            return f"custom({self.name})"
        return self.kind


def LeakyRelu(beta: float) -> ActivationTag:
    return ActivationTag('leaky_relu', beta=float(beta))


RELU = ActivationTag('relu')
IDENTITY = ActivationTag('identity')


def Custom(name: str) -> ActivationTag:
    return ActivationTag('custom', name=name)


def leaky_relu(beta: float, z: np.ndarray) -> np.ndarray:
    """lr_beta(z) = z for z >= 0, beta*z otherwise."""
    z = np.asarray(z, dtype=float)
    return np.where(z >= 0, z, beta * z)


@dataclass(frozen=True)
class CustomActivation:
    """A registered scalar activation."""
    name: str
    fn: ArrayFn
    alpha: float = 0.0
    derivative: Optional[ArrayFn] = None
    inverse: Optional[ArrayFn] = None
    increasing: bool = True

    def slope_at(self, x: float, h: float = 1e-5) -> float:
        """sigma'(x), from the registered derivative or a central difference."""
        if self.derivative is not None:
            return float(self.derivative(np.array([x]))[0])
        pts = np.array([x - h, x + h])
        vals = self.fn(pts)
        return float((vals[1] - vals[0]) / (2 * h))


_REGISTRY: Dict[str, CustomActivation] = {}


def register_activation(
    name: str,
    fn: ArrayFn,
    alpha: float = 0.0,
    derivative: Optional[ArrayFn] = None,
    inverse: Optional[ArrayFn] = None,
    increasing: bool = True,
) -> CustomActivation:
    """Register (or replace) a named activation."""
    act = CustomActivation(name, fn, float(alpha), derivative, inverse, increasing)
    if name in _REGISTRY:
        logger.info(f"Replacing registered activation '{name}'")
    _REGISTRY[name] = act
    return act


def get_activation(name: str) -> CustomActivation:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"No activation registered under '{name}'") from None


def registered_activations() -> Tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


register_activation(
    'tanh', np.tanh, alpha=0.0,
    derivative=lambda z: 1.0 - np.tanh(z) ** 2,
    inverse=np.arctanh,
)
register_activation(
    'sigmoid', _sigmoid, alpha=0.0,
    derivative=lambda z: _sigmoid(z) * (1.0 - _sigmoid(z)),
    inverse=lambda y: np.log(y) - np.log1p(-y),
)
register_activation(
    'softplus', lambda z: np.logaddexp(0.0, z), alpha=0.0,
    derivative=_sigmoid,
    inverse=lambda y: y + np.log(-np.expm1(-y)),
)
register_activation(
    'linear', lambda z: np.asarray(z, dtype=float), alpha=0.0,
    derivative=lambda z: np.ones_like(np.asarray(z, dtype=float)),
    inverse=lambda y: np.asarray(y, dtype=float),
)


def apply_activation(tag: ActivationTag, z: np.ndarray) -> np.ndarray:
    if tag.kind == 'leaky_relu':
        return leaky_relu(tag.beta, z)
    if tag.kind == 'relu':
        return np.maximum(z, 0.0)
    if tag.kind == 'identity':
        return np.asarray(z, dtype=float)
    return np.asarray(get_activation(tag.name).fn(z), dtype=float)


def is_invertible(tag: ActivationTag) -> bool:
    if tag.kind in ('leaky_relu', 'identity'):
        return True
    if tag.kind == 'relu':
        return False
    return get_activation(tag.name).increasing


def inverse_tag(tag: ActivationTag) -> ActivationTag:
    """Tag of the inverse activation (only defined for LeakyRelu / Identity)."""
    if tag.kind == 'leaky_relu':
        return LeakyRelu(1.0 / tag.beta)
    if tag.kind == 'identity':
        return tag
    raise NotInvertibleError(f"{tag.describe()} has no activation-tag inverse")


def invert_activation(tag: ActivationTag, y: np.ndarray) -> np.ndarray:
    """Componentwise inverse; custom activations fall back to root finding."""
    y = np.asarray(y, dtype=float)
    if tag.kind == 'leaky_relu':
        return leaky_relu(1.0 / tag.beta, y)
    if tag.kind == 'identity':
        return y
    if tag.kind == 'relu':
        raise NotInvertibleError("relu is not invertible")
    act = get_activation(tag.name)
    if not act.increasing:
        raise NotInvertibleError(f"activation '{act.name}' is not monotone")
    if act.inverse is not None:
        return np.asarray(act.inverse(y), dtype=float)
    return np.vectorize(lambda v: _solve_scalar(act, v))(y)


def _solve_scalar(act: CustomActivation, target: float) -> float:
    lo, hi = -1.0, 1.0
    f = lambda t: float(act.fn(np.array([t]))[0]) - target
    for _ in range(200):
        if f(lo) <= 0 <= f(hi):
            return optimize.brentq(f, lo, hi, xtol=1e-15)
        lo, hi = 2 * lo, 2 * hi
    raise NotInvertibleError(f"value {target} outside range of '{act.name}'")


def activation_interval(tag: ActivationTag, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Image of the box [lo, hi] under the componentwise activation."""
    if tag.kind == 'custom':
        act = get_activation(tag.name)
        if not act.increasing:
            # dense samples, padded by slope * half spacing per coordinate
            ts = np.linspace(0.0, 1.0, 257)[:, None]
            samples = act.fn(lo[None, :] + ts * (hi - lo)[None, :])
            pad = np.array([lipschitz_on(tag, l, h) * (h - l) / 512.0 for l, h in zip(lo, hi)])
            return samples.min(axis=0) - pad, samples.max(axis=0) + pad
    return apply_activation(tag, lo), apply_activation(tag, hi)


def lipschitz_on(tag: ActivationTag, lo: float, hi: float, samples: int = 513) -> float:
    """Largest slope of the activation on [lo, hi] (sampled for custom ones)."""
    if tag.kind == 'leaky_relu':
        return max(1.0, tag.beta)
    if tag.kind in ('relu', 'identity'):
        return 1.0
    act = get_activation(tag.name)
    xs = np.linspace(lo, hi, samples)
    if act.derivative is not None:
        return float(np.max(np.abs(act.derivative(xs))))
    ys = act.fn(xs)
    return float(np.max(np.abs(np.diff(ys) / np.diff(xs)))) if hi > lo else act.slope_at(lo)
