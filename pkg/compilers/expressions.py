"""
Expression Oracles
==================

Vectorised numpy expressions in x1..xn, used by program files and the CLI
to describe oracles. Only whitelisted numpy names may appear.
"""

import logging
from typing import Dict, List, Sequence

import numpy as np

from core.errors import NetworkFormatError

logger = logging.getLogger(__name__)

ALLOWED_FUNCTIONS: Dict[str, object] = {
    'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp, 'log': np.log,
    'log1p': np.log1p, 'expm1': np.expm1, 'sqrt': np.sqrt, 'tanh': np.tanh,
    'arctan': np.arctan, 'sinh': np.sinh, 'cosh': np.cosh, 'abs': np.abs,
    'minimum': np.minimum, 'maximum': np.maximum, 'where': np.where,
    'pi': np.pi, 'e': np.e,
}


class ExpressionOracle:
    """Scalar field given by one expression in x1..xdim."""

    def __init__(self, expression: str, dim: int):
        self.expression = expression
        self.dim = dim
        variables = {f"x{i + 1}" for i in range(dim)}
        try:
            self._code = compile(expression, '<expression>', 'eval')
        except SyntaxError as e:
            raise NetworkFormatError(f"invalid expression: {e.msg}", f"column {e.offset}") from e
        unknown = set(self._code.co_names) - variables - set(ALLOWED_FUNCTIONS)
        if unknown:
            raise NetworkFormatError(f"unknown names {sorted(unknown)} in '{expression}'", "expression")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scope = dict(ALLOWED_FUNCTIONS)
        scope.update({f"x{i + 1}": pts[:, i] for i in range(self.dim)})
        value = eval(self._code, {'__builtins__': {}}, scope)
        return np.broadcast_to(np.asarray(value, dtype=float), (pts.shape[0],)).copy()

    def __repr__(self) -> str:
        return f"ExpressionOracle({self.expression!r}, dim={self.dim})"


class VectorExpressionOracle:
    """Vector field R^n -> R^m given by one expression per output."""

    def __init__(self, outputs: Sequence[str], dim: int):
        if not outputs:
            raise NetworkFormatError("need at least one output expression", "outputs")
        self.components: List[ExpressionOracle] = [ExpressionOracle(e, dim) for e in outputs]
        self.dim = dim

    @property
    def output_dim(self) -> int:
        return len(self.components)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        arr = np.asarray(points, dtype=float)
        out = np.column_stack([c(arr) for c in self.components])
        return out if arr.ndim > 1 else out[0]
