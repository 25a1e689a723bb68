"""
JSON Serialization
==================

pydantic schemas for every document the compilers read or write, and the
Network <-> JSON conversion.

Network format:
    {"input_dim": n,
     "layers": [{"weight": [[...]], "bias": [...],
                 "activation": {"leaky_relu": beta} | "relu" | "identity" | {"custom": name}}],
     "final": {"weight": [[...]], "bias": [...]}}

Floats are written with the shortest round-trip repr, so a value read back
is bit-identical to the value written.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveFloat, PositiveInt, ValidationError

from .activations import IDENTITY, RELU, ActivationTag, Custom, LeakyRelu, registered_activations
from .errors import DimensionMismatchError, NarrowForgeError, NetworkFormatError
from .network import AffineMap, Layer, Network

logger = logging.getLogger(__name__)

ModelT = TypeVar('ModelT', bound=BaseModel)


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid')


# =================
# NETWORK
# =================

class LeakyReluDoc(_Strict):
    leaky_relu: PositiveFloat


class CustomDoc(_Strict):
    custom: str = Field(min_length=1)


ActivationDoc = Union[Literal['relu', 'identity'], LeakyReluDoc, CustomDoc]


class AffineDoc(_Strict):
    weight: List[List[float]]
    bias: List[float]


class LayerDoc(AffineDoc):
    activation: ActivationDoc


class NetworkDoc(_Strict):
    input_dim: NonNegativeInt
    layers: List[LayerDoc]
    final: AffineDoc


# =================
# COMPILER INPUTS
# =================

class PwlDoc(_Strict):
    breakpoints: List[float]
    slopes: List[float]
    anchor: List[float] = Field(min_length=2, max_length=2)


class RidgeTermDoc(_Strict):
    a: float
    b: List[float]
    c: float
    beta: PositiveFloat = 0.01


class RidgeSumDoc(_Strict):
    terms: List[RidgeTermDoc] = Field(default_factory=list)
    constant: float = 0.0
    activation: Optional[str] = None
    seed: Optional[int] = None
    fit_error: Optional[float] = None


class AcfDoc(_Strict):
    d: PositiveInt
    s: RidgeSumDoc
    t: RidgeSumDoc


class SctDoc(_Strict):
    expression: str
    slices: PositiveInt = 8


class StageDoc(_Strict):
    affine: Optional[AffineDoc] = None
    acf: Optional[AcfDoc] = None
    sct: Optional[SctDoc] = None


class InnProgramDoc(_Strict):
    d: PositiveInt
    stages: List[StageDoc]


class DiffeoTargetDoc(_Strict):
    n: PositiveInt
    m: PositiveInt
    program: InnProgramDoc


class OracleDoc(_Strict):
    kind: Literal['network', 'expression', 'pwl', 'acf', 'inn', 'pipeline']
    path: Optional[str] = None
    outputs: Optional[List[str]] = None


class SliceTableDoc(_Strict):
    slices: PositiveInt
    box: List[List[float]]
    prefix_grid: List[List[float]]
    values: List[List[float]]


# =================
# HELPERS
# =================

def _location(err: ValidationError) -> str:
    first = err.errors()[0]
    return '.'.join(str(part) for part in first.get('loc', ())) or '<root>'


def parse_document(text: str, model: Type[ModelT]) -> ModelT:
    """Parse JSON text into a pydantic model, mapping failures to NetworkFormatError."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(e.msg, f"line {e.lineno} column {e.colno}") from e
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise NetworkFormatError(e.errors()[0].get('msg', str(e)), _location(e)) from e


def load_document(path: Union[str, Path], model: Type[ModelT]) -> ModelT:
    return parse_document(Path(path).read_text(), model)


def dump_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload) + "\n"


def _matrix(rows: List[List[float]], cols: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, cols))
    return np.array(rows, dtype=float).reshape(len(rows), -1)


def affine_to_dict(affine: AffineMap) -> Dict[str, Any]:
    return {'weight': affine.weight.tolist(), 'bias': affine.bias.tolist()}


def affine_from_doc(doc: AffineDoc, in_dim: int) -> AffineMap:
    weight = _matrix(doc.weight, in_dim)
    if weight.shape[1] != in_dim:
        raise DimensionMismatchError(f"weight has {weight.shape[1]} columns, expected {in_dim}")
    return AffineMap(weight, np.array(doc.bias, dtype=float))


def activation_to_json(tag: ActivationTag) -> Any:
    if tag.kind == 'leaky_relu':
        return {'leaky_relu': float(tag.beta)}
    if tag.kind == 'custom':
        return {'custom': tag.name}
    return tag.kind


def activation_from_doc(doc: ActivationDoc) -> ActivationTag:
    if doc == 'relu':
        return RELU
    if doc == 'identity':
        return IDENTITY
    if isinstance(doc, LeakyReluDoc):
        return LeakyRelu(doc.leaky_relu)
    if doc.custom not in registered_activations():
        raise NetworkFormatError(f"no activation registered under '{doc.custom}'")
    return Custom(doc.custom)


# =================
# NETWORK I/O
# =================

def network_to_dict(net: Network) -> Dict[str, Any]:
    layers = []
    for layer in net.layers:
        entry = affine_to_dict(layer.affine)
        entry['activation'] = activation_to_json(layer.activation)
        layers.append(entry)
    return {'input_dim': net.input_dim, 'layers': layers, 'final': affine_to_dict(net.final)}


def serialize(net: Network) -> bytes:
    """Network -> UTF-8 JSON bytes (deterministic, bit-exact floats)."""
    return dump_json(network_to_dict(net)).encode('utf-8')


def network_from_doc(doc: NetworkDoc) -> Network:
    dim = doc.input_dim
    layers = []
    for index, layer_doc in enumerate(doc.layers):
        try:
            affine = affine_from_doc(layer_doc, dim)
            layers.append(Layer(affine, activation_from_doc(layer_doc.activation)))
        except (ValueError, NarrowForgeError) as e:
            raise NetworkFormatError(str(e), f"layers.{index}") from e
        dim = affine.out_dim
    try:
        return Network(doc.input_dim, tuple(layers), affine_from_doc(doc.final, dim))
    except (ValueError, NarrowForgeError) as e:
        raise NetworkFormatError(str(e), 'final') from e


def deserialize(data: Union[bytes, str]) -> Network:
    """JSON bytes or text -> Network; malformed input raises NetworkFormatError with its location."""
    if isinstance(data, bytes):
        try:
            data = data.decode('utf-8')
        except UnicodeDecodeError as e:
            raise NetworkFormatError("network document is not UTF-8", f"byte {e.start}") from e
    return network_from_doc(parse_document(data, NetworkDoc))


def save_network(net: Network, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(serialize(net))
    logger.info(f"Wrote network ({net.width=} {net.depth=}) to {path}")
    return path


def load_network(path: Union[str, Path]) -> Network:
    return deserialize(Path(path).read_bytes())
