"""
Core Package
============
Network model shared by every compiler.

This package contains:
- activations: activation tags and the custom activation registry
- network: AffineMap / Layer / Network, evaluate, compose, inversion
- intervals: Box and interval enclosures
- tape: ChannelTape, the single-active-channel network builder
- serializer: pydantic schemas and the network JSON format
- errors: the NarrowForgeError hierarchy
"""

from .activations import (
    IDENTITY, RELU, ActivationTag, Custom, LeakyRelu, apply_activation,
    get_activation, leaky_relu, register_activation,
)
from .errors import (
    BudgetSplitError, CompileTimeoutError, DimensionMismatchError, NarrowForgeError,
    NetworkFormatError, NonMonotoneError, NotInvertibleError, RidgeFitError,
    SharpenFitError, StageCompileError, ToleranceNotReachedError, WidthBudgetError,
)
from .intervals import Box, affine_interval
from .network import (
    AffineMap, Layer, Network, compose, compose_all, evaluate, invert_evaluate,
    invert_network, layer_bounds, propagate_intervals,
)
from .serializer import deserialize, load_network, save_network, serialize
from .tape import ChannelTape

__all__ = [
    'ActivationTag', 'LeakyRelu', 'RELU', 'IDENTITY', 'Custom',
    'apply_activation', 'leaky_relu', 'register_activation', 'get_activation',
    'NarrowForgeError', 'DimensionMismatchError', 'NotInvertibleError',
    'NonMonotoneError', 'NetworkFormatError', 'ToleranceNotReachedError',
    'RidgeFitError', 'BudgetSplitError', 'SharpenFitError', 'StageCompileError',
    'WidthBudgetError', 'CompileTimeoutError',
    'Box', 'affine_interval',
    'AffineMap', 'Layer', 'Network', 'evaluate', 'compose', 'compose_all',
    'invert_evaluate', 'invert_network', 'propagate_intervals', 'layer_bounds',
    'serialize', 'deserialize', 'save_network', 'load_network',
    'ChannelTape',
]
