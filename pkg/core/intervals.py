"""
Interval Arithmetic
===================

Axis-aligned boxes and sound interval enclosures of affine maps.
Affine images use the center/radius form: center W c + b, radius |W| r.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class Box:
    """Product of closed intervals [lo_j, hi_j]."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"Box bounds must be matching vectors, got {lo.shape} and {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("Box lower bound exceeds upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    @classmethod
    def unit(cls, dim: int) -> 'Box':
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def from_intervals(cls, intervals: Iterable[Tuple[float, float]]) -> 'Box':
        pairs = list(intervals)
        return cls(np.array([p[0] for p in pairs], dtype=float).reshape(-1),
                   np.array([p[1] for p in pairs], dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return int(self.lo.shape[0])

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def product(self, other: 'Box') -> 'Box':
        return Box(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def prefix(self) -> 'Box':
        """Box of the first dim-1 coordinates."""
        return Box(self.lo[:-1], self.hi[:-1])

    def with_last(self, lo: float, hi: float) -> 'Box':
        return Box(np.append(self.lo[:-1], lo), np.append(self.hi[:-1], hi))

    def replace(self, index: int, lo: float, hi: float) -> 'Box':
        new_lo, new_hi = self.lo.copy(), self.hi.copy()
        new_lo[index], new_hi[index] = lo, hi
        return Box(new_lo, new_hi)

    def widen(self, margin: float) -> 'Box':
        return Box(self.lo - margin, self.hi + margin)

    def hull(self, other: 'Box') -> 'Box':
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def grid(self, res: int) -> np.ndarray:
        """Uniform lattice with res points per axis, shape (res**dim, dim)."""
        if self.dim == 0:
            return np.zeros((1, 0))
        axes = [np.linspace(l, h, res) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def midpoint_grid(self, res: int) -> np.ndarray:
        """Cell centres of the res-point lattice, shape ((res-1)**dim, dim)."""
        if self.dim == 0:
            return np.zeros((1, 0))
        axes = []
        for l, h in zip(self.lo, self.hi):
            pts = np.linspace(l, h, res)
            axes.append(0.5 * (pts[:-1] + pts[1:]) if res > 1 else pts)
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.lo + rng.random((count, self.dim)) * self.width

    def contains(self, points: np.ndarray, atol: float = 0.0) -> bool:
        pts = np.atleast_2d(points)
        return bool(np.all(pts >= self.lo - atol) and np.all(pts <= self.hi + atol))

    def to_pairs(self) -> Sequence[Tuple[float, float]]:
        return [(float(l), float(h)) for l, h in zip(self.lo, self.hi)]


def affine_interval(weight: np.ndarray, bias: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Enclosure of {W x + b : lo <= x <= hi}."""
    center = 0.5 * (lo + hi)
    radius = 0.5 * (hi - lo)
    out_center = weight @ center + bias
    out_radius = np.abs(weight) @ radius
    return out_center - out_radius, out_center + out_radius


def linear_form_interval(coeffs: np.ndarray, const: float, box: Box) -> Tuple[float, float]:
    """Range of coeffs . x + const over the box (exact for a single form)."""
    lo, hi = affine_interval(np.atleast_2d(coeffs), np.array([const]), box.lo, box.hi)
    return float(lo[0]), float(hi[0])
