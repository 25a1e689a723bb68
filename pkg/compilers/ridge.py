"""
Ridge Sums
==========

Functions of the form  constant + sum_i a_i * act_i(b_i . x + c_i)  where
act_i is lr_{beta_i} (default) or a registered activation shared by all
terms, plus the least-squares random-feature fitter.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from config import get_config
from core.activations import Custom, get_activation, leaky_relu, lipschitz_on
from core.errors import RidgeFitError
from core.intervals import Box, linear_form_interval
from core.serializer import RidgeSumDoc

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]

SAMPLES = 257


@dataclass(frozen=True)
class RidgeTerm:
    a: float
    b: Tuple[float, ...]
    c: float
    beta: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, 'a', float(self.a))
        object.__setattr__(self, 'b', tuple(float(v) for v in self.b))
        object.__setattr__(self, 'c', float(self.c))
        object.__setattr__(self, 'beta', float(self.beta))
        if self.beta <= 0:
            raise ValueError(f"ridge slope beta must be positive, got {self.beta}")

    @property
    def is_constant(self) -> bool:
        return not any(self.b)

    def to_dict(self) -> dict:
        return {'a': self.a, 'b': list(self.b), 'c': self.c, 'beta': self.beta}


@dataclass(frozen=True)
class RidgeSum:
    """Ridge sum over R^k; activation None means each term uses lr_beta."""
    terms: Tuple[RidgeTerm, ...] = ()
    constant: float = 0.0
    activation: Optional[str] = None
    seed: Optional[int] = None
    fit_error: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        object.__setattr__(self, 'constant', float(self.constant))
        dims = {len(t.b) for t in self.terms}
        if len(dims) > 1:
            raise ValueError(f"ridge terms disagree on input dimension: {sorted(dims)}")

    @property
    def dim(self) -> Optional[int]:
        return len(self.terms[0].b) if self.terms else None

    def _act(self, u: np.ndarray, betas: np.ndarray) -> np.ndarray:
        if self.activation is None:
            return np.where(u >= 0, u, betas * u)
        return get_activation(self.activation).fn(u)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Value at a point (k,) or a batch (n, k)."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr) if arr.size or arr.ndim > 1 else arr.reshape(1, 0)
        if not self.terms:
            out = np.full(pts.shape[0], self.constant)
        else:
            B = np.array([t.b for t in self.terms])
            u = pts @ B.T + np.array([t.c for t in self.terms])
            feats = self._act(u, np.array([t.beta for t in self.terms]))
            out = self.constant + feats @ np.array([t.a for t in self.terms])
        return out[0] if single else out

    __call__ = evaluate

    def negated(self) -> 'RidgeSum':
        return replace(self, terms=tuple(replace(t, a=-t.a) for t in self.terms),
                       constant=-self.constant)

    def plus_constant(self, value: float) -> 'RidgeSum':
        return replace(self, constant=self.constant + value)

    def scaled(self, factor: float) -> 'RidgeSum':
        return replace(self, terms=tuple(replace(t, a=factor * t.a) for t in self.terms),
                       constant=factor * self.constant)

    def term_interval(self, term: RidgeTerm, box: Box) -> Tuple[float, float]:
        ul, uh = linear_form_interval(np.array(term.b), term.c, box)
        if self.activation is None:
            ends = term.a * leaky_relu(term.beta, np.array([ul, uh]))
        else:
            act = get_activation(self.activation)
            if act.increasing:
                ends = term.a * act.fn(np.array([ul, uh]))
            else:
                ends = term.a * act.fn(np.linspace(ul, uh, SAMPLES))
                # between samples the value moves by at most slope * spacing / 2
                pad = abs(term.a) * lipschitz_on(Custom(self.activation), ul, uh) * (uh - ul) / (2 * (SAMPLES - 1))
                return float(ends.min()) - pad, float(ends.max()) + pad
        return float(ends.min()), float(ends.max())

    def interval(self, box: Box) -> Tuple[float, float]:
        """Sound enclosure of the sum over box."""
        lo = hi = self.constant
        for term in self.terms:
            tl, th = self.term_interval(term, box)
            lo, hi = lo + tl, hi + th
        return lo, hi

    def lipschitz(self, box: Box) -> float:
        """Bound on the max-norm-to-abs Lipschitz constant over box."""
        total = 0.0
        for term in self.terms:
            if self.activation is None:
                slope = max(1.0, term.beta)
            else:
                ul, uh = linear_form_interval(np.array(term.b), term.c, box)
                slope = lipschitz_on(Custom(self.activation), ul, uh)
            total += abs(term.a) * slope * float(np.sum(np.abs(term.b)))
        return total

    def to_dict(self) -> dict:
        payload = {'terms': [t.to_dict() for t in self.terms], 'constant': self.constant}
        if self.activation is not None:
            payload['activation'] = self.activation
        if self.seed is not None:
            payload['seed'] = self.seed
        if self.fit_error is not None:
            payload['fit_error'] = self.fit_error
        return payload

    @classmethod
    def from_doc(cls, doc: RidgeSumDoc) -> 'RidgeSum':
        terms = tuple(RidgeTerm(t.a, tuple(t.b), t.c, t.beta) for t in doc.terms)
        return cls(terms, doc.constant, doc.activation, doc.seed, doc.fit_error)


# =================
# FITTING
# =================

def _training_resolution(dim: int, max_terms: int) -> int:
    res = int(np.ceil((4 * max_terms + 1) ** (1.0 / dim))) + 1
    res = max(res, 129 if dim == 1 else 9)
    while res > 3 and res ** dim > 40000:
        res -= 1
    return res


def _random_features(box: Box, count: int, beta: float, activation: Optional[str],
                     seed: int) -> List[RidgeTerm]:
    if count <= 0:
        return []
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(count, box.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    directions /= np.maximum(box.width, 1e-12)
    if activation is not None:
        directions *= rng.uniform(0.5, 6.0, size=(count, 1))
    centres = qmc.Halton(d=box.dim, scramble=True, seed=seed).random(count)
    centres = box.lo + centres * box.width
    offsets = -np.sum(directions * centres, axis=1)
    return [RidgeTerm(0.0, tuple(b), c, beta) for b, c in zip(directions, offsets)]


def _feature_matrix(points: np.ndarray, features: Sequence[RidgeTerm],
                    activation: Optional[str]) -> np.ndarray:
    if not features:
        return np.ones((points.shape[0], 1))
    B = np.array([t.b for t in features])
    u = points @ B.T + np.array([t.c for t in features])
    if activation is None:
        feats = np.where(u >= 0, u, np.array([t.beta for t in features]) * u)
    else:
        feats = get_activation(activation).fn(u)
    return np.hstack([feats, np.ones((points.shape[0], 1))])


def _schedule(max_terms: int, dictionary_size: int) -> List[int]:
    counts = {0, max_terms, min(dictionary_size, max_terms)}
    n = 1
    while n < max_terms:
        counts.add(n)
        n *= 2
    return sorted(counts)


def fit_ridge(
    oracle: Oracle,
    box: Box,
    max_terms: Optional[int] = None,
    tol: float = 1e-3,
    beta: Optional[float] = None,
    seed: Optional[int] = None,
    activation: Optional[str] = None,
    dictionary: Iterable[RidgeTerm] = (),
    train_res: Optional[int] = None,
) -> RidgeSum:
    """Least-squares ridge fit of oracle on box.

    Features are tried in nested prefixes: dictionary terms first (the
    oracle's own terms when it is a RidgeSum), then random directions with
    scrambled-Halton offsets from a fixed seed. Error is the sup over the
    training grid and the shifted (cell-centre) validation grid.

    Raises:
        RidgeFitError: tol not met with max_terms terms; carries the best fit.
    """
    cfg = get_config()
    max_terms = cfg.fit_max_terms if max_terms is None else max_terms
    beta = cfg.fit_beta if beta is None else beta
    seed = cfg.seed if seed is None else seed

    if box.dim == 0:
        value = float(np.asarray(oracle(np.zeros((1, 0))), dtype=float).reshape(-1)[0])
        return RidgeSum((), value, activation, seed, 0.0)

    res = train_res or _training_resolution(box.dim, max_terms)
    train = box.grid(res)
    points = np.vstack([train, box.midpoint_grid(res)])
    values = np.asarray(oracle(points), dtype=float).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise ValueError("oracle returned non-finite values")
    n_train = train.shape[0]

    known = list(dictionary)
    if isinstance(oracle, RidgeSum) and oracle.activation == activation:
        known = list(oracle.terms) + known
    known = known[:max_terms]
    features = known + _random_features(box, max_terms - len(known), beta, activation, seed)
    full = _feature_matrix(points, features, activation)

    best: Optional[RidgeSum] = None
    best_err = np.inf
    for count in _schedule(max_terms, len(known)):
        cols = list(range(count)) + [full.shape[1] - 1]
        phi = full[:, cols]
        coef, *_ = np.linalg.lstsq(phi[:n_train], values[:n_train], rcond=None)
        err = float(np.max(np.abs(phi @ coef - values)))
        if err < best_err:
            terms = tuple(replace(f, a=float(a)) for f, a in zip(features[:count], coef[:-1]) if a != 0.0)
            best = RidgeSum(terms, float(coef[-1]), activation, seed, err)
            best_err = err
        if err <= tol:
            logger.debug(f"fit_ridge: {count} terms, error {err:.3e} <= {tol:.3e}")
            return best
    logger.warning(f"fit_ridge: tol {tol:.3e} not reached with {max_terms} terms (best {best_err:.3e})")
    raise RidgeFitError(f"ridge fit did not reach {tol:.3e}", best, best_err)


def fit_ridge_best_effort(oracle: Oracle, box: Box, tol: float, **kwargs) -> RidgeSum:
    """fit_ridge, returning the best fit instead of raising."""
    try:
        return fit_ridge(oracle, box, tol=tol, **kwargs)
    except RidgeFitError as e:
        return e.best


# =================
# ONE-VARIABLE PROFILES
# =================

def ridge_from_pwl(knots: Sequence[float], values: Sequence[float], b: Sequence[float], c: float,
                   beta: float = 0.5) -> RidgeSum:
    """Leaky-ReLU ridge sum equal to the interpolant of (knots, values) in
    u = b . x + c, for u in [knots[0], knots[-1]].

    Each interior slope change j at knot k becomes j * relu(u - k) and
    relu(z) = (lr_beta(z) - beta * z) / (1 - beta); the collected linear part
    is one term lr_beta(u - knots[0] + 1), which is linear on the range.
    """
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.size < 2 or np.any(np.diff(knots) <= 0):
        raise ValueError("need at least two strictly increasing knots")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    slopes = np.diff(values) / np.diff(knots)
    jumps = np.diff(slopes)
    inner = knots[1:-1]
    ratio = beta / (1.0 - beta)
    linear = float(slopes[0] - ratio * jumps.sum())
    start = float(knots[0])
    constant = float(values[0] - slopes[0] * start + ratio * (jumps @ inner)) + linear * (start - 1.0)
    terms = [RidgeTerm(linear, b, c - start + 1.0, beta)] if linear != 0.0 else []
    terms += [RidgeTerm(j / (1.0 - beta), b, c - k, beta) for j, k in zip(jumps, inner) if j != 0.0]
    return RidgeSum(tuple(terms), constant)


def _kink_features(lo: float, hi: float, kinks: Sequence[float], levels: int = 11) -> List[RidgeTerm]:
    """Features sigma(k (u - kink) - m) with k doubling towards each interior kink."""
    features = []
    for kink in kinks:
        if not lo < kink < hi:
            continue
        for level in range(levels):
            k = 2.0 ** (level + 1) / (hi - lo)
            for m in (-2.0, -1.0, 0.0, 1.0, 2.0):
                features.append(RidgeTerm(0.0, (k,), -k * kink - m))
    return features


def fit_profile(g: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, tol: float,
                activation: str, seed: Optional[int] = None, kinks: Sequence[float] = (),
                max_terms: Optional[int] = None) -> RidgeSum:
    """Best sigma ridge fit of the one-variable g on [lo, hi].

    Kinks of g get graded features around them. The fit stops at the first
    term count under tol; fit_error is its grid error either way.
    """
    seed = get_config().seed if seed is None else seed
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        value = float(np.asarray(g(np.array([lo])), dtype=float).reshape(-1)[0])
        return RidgeSum((), value, activation, seed, 0.0)
    oracle = lambda pts: g(pts[:, 0])
    return fit_ridge_best_effort(oracle, Box([lo], [hi]), tol, max_terms=max_terms, seed=seed,
                                 activation=activation, dictionary=_kink_features(lo, hi, kinks),
                                 train_res=2049)
