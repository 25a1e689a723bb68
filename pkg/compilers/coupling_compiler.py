"""
Coupling Compiler
=================

Width-d constructions for maps that only touch the last coordinate.

- build_ridge_add: x_d <- x_d + a * lr_beta(b . x_{<d} + c), exact, depth 2
- build_translation_add: x_d <- x_d + t(x_{<d}) for a RidgeSum t, depth 2 per term
- compile_acf: x_d <- exp(s(x_{<d})) * x_d + t(x_{<d}), one s term at a time
  through shift -> log -> add term -> exp -> unshift -> add shift correction,
  then t
- shift_correction: the exact ridge form of an interpolated one-variable
  profile, used to undo the shift
- acf_inverse / evaluate_acf: reference inverse and evaluation

The ridge add puts u = b . x + c into the slot i with the largest |b_i|
(an invertible change of coordinates), bends it with lr_beta, adds a
multiple into the last slot, straightens it with lr_{1/beta} and undoes
the change of coordinates.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.intervals import Box, linear_form_interval
from core.network import AffineMap, Network
from core.serializer import AcfDoc
from core.tape import ChannelTape
from core.activations import leaky_relu
from .pwl_compiler import apply_pwl_on_channel, eval_pwl, pwl_approximate
from .ridge import RidgeSum, RidgeTerm, fit_ridge, ridge_from_pwl

logger = logging.getLogger(__name__)


# =================
# RIDGE ADDS
# =================

def _check_prefix(term: RidgeTerm, d: int) -> None:
    if len(term.b) != d - 1:
        raise ValueError(f"ridge term has {len(term.b)} coefficients, expected {d - 1}")


def append_ridge_term(tape: ChannelTape, term: RidgeTerm) -> ChannelTape:
    """x_last <- x_last + a * lr_beta(b . x_prefix + c) on a tape."""
    d = tape.dim
    last = d - 1
    _check_prefix(term, d)
    if term.a == 0.0:
        return tape
    if term.is_constant:
        return tape.scale_channel(last, 1.0, term.a * float(leaky_relu(term.beta, term.c)))

    b = np.array(term.b)
    i = int(np.argmax(np.abs(b)))
    start = tape.box
    ul, uh = linear_form_interval(b, term.c, start.prefix())

    # slot i <- u = b . x_prefix + c
    forward = np.eye(d)
    forward[i, :last] = b
    shift = np.zeros(d)
    shift[i] = term.c
    tape.affine(AffineMap(forward, shift), start.replace(i, ul, uh))

    tape.activate(i, term.beta)

    # last slot <- last + a * slot_i
    add = np.eye(d)
    add[last, i] = term.a
    tape.affine(AffineMap(add, np.zeros(d)))

    tape.activate(i, 1.0 / term.beta)

    # slot i <- (u - c - sum_{j != i} b_j x_j) / b_i
    back = np.eye(d)
    back[i, :last] = -b / b[i]
    back[i, i] = 1.0 / b[i]
    unshift = np.zeros(d)
    unshift[i] = -term.c / b[i]
    restored = start.with_last(tape.box.lo[last], tape.box.hi[last])
    tape.affine(AffineMap(back, unshift), restored)
    return tape


def apply_translation(tape: ChannelTape, t: RidgeSum) -> ChannelTape:
    """x_last <- x_last + t(x_prefix) on a tape."""
    if t.activation is not None:
        raise ValueError(f"translation adds need Leaky-ReLU ridge terms, got '{t.activation}'")
    for term in t.terms:
        append_ridge_term(tape, term)
    if t.constant != 0.0:
        tape.scale_channel(tape.dim - 1, 1.0, t.constant)
    return tape


def build_ridge_add(d: int, term: RidgeTerm, box: Box, mode: str = 'leaky') -> Network:
    """Exact width-d network for x -> (x_prefix, x_d + a lr_beta(b . x_prefix + c))."""
    if box.dim != d:
        raise ValueError(f"box has dim {box.dim}, expected {d}")
    return append_ridge_term(ChannelTape(box, mode), term).network()


def build_translation_add(d: int, t: RidgeSum, box: Box, mode: str = 'leaky') -> Network:
    """Exact width-d network for x -> (x_prefix, x_d + t(x_prefix))."""
    if box.dim != d:
        raise ValueError(f"box has dim {box.dim}, expected {d}")
    return apply_translation(ChannelTape(box, mode), t).network()


# =================
# AFFINE COUPLING FLOWS
# =================

@dataclass(frozen=True)
class AcfSpec:
    """x -> (x_prefix, exp(s(x_prefix)) * x_d + t(x_prefix))."""
    d: int
    s: RidgeSum
    t: RidgeSum

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("ACF dimension must be at least 1")
        for name, part in (('s', self.s), ('t', self.t)):
            if part.dim is not None and part.dim != self.d - 1:
                raise ValueError(f"{name} has input dim {part.dim}, expected {self.d - 1}")

    def to_dict(self) -> dict:
        return {'d': self.d, 's': self.s.to_dict(), 't': self.t.to_dict()}

    @classmethod
    def from_doc(cls, doc: AcfDoc) -> 'AcfSpec':
        return cls(doc.d, RidgeSum.from_doc(doc.s), RidgeSum.from_doc(doc.t))


def evaluate_acf(spec: AcfSpec, x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    pts = np.atleast_2d(arr)
    prefix = pts[:, :-1]
    out = pts.copy()
    out[:, -1] = np.exp(spec.s(prefix)) * pts[:, -1] + spec.t(prefix)
    return out if arr.ndim > 1 else out[0]


def acf_output_box(spec: AcfSpec, box: Box) -> Box:
    """Sound enclosure of the ACF image of box."""
    prefix = box.prefix()
    s_lo, s_hi = spec.s.interval(prefix)
    t_lo, t_hi = spec.t.interval(prefix)
    corners = np.outer([np.exp(s_lo), np.exp(s_hi)], [box.lo[-1], box.hi[-1]])
    return box.with_last(corners.min() + t_lo, corners.max() + t_hi)


def acf_inverse(spec: AcfSpec, box: Box, tol: float, seed: Optional[int] = None) -> AcfSpec:
    """ACF with s' = -s and t' ~ -t exp(-s) fitted on the prefix box."""
    prefix = box.prefix()
    inv_s = spec.s.negated()
    target = lambda p: -spec.t(p) * np.exp(-spec.s(p))
    dictionary = list(spec.s.terms) + list(spec.t.terms)
    inv_t = fit_ridge(target, prefix, tol=tol, seed=seed, dictionary=dictionary)
    return AcfSpec(spec.d, inv_s, inv_t)


def shift_correction(term: RidgeTerm, shift: float, prefix: Box, tol: float) -> RidgeSum:
    """Leaky-ReLU ridge sum within tol of shift * (1 - exp(g)) on prefix, g the
    single term; it varies only along the term's direction, so it is the
    interpolant of a one-variable profile in u = b . x + c."""
    if shift == 0.0 or term.a == 0.0:
        return RidgeSum()
    profile = lambda u: term.a * leaky_relu(term.beta, u)
    ul, uh = linear_form_interval(np.array(term.b), term.c, prefix)
    if uh - ul <= 1e-12 * max(1.0, abs(ul)):
        return RidgeSum((), shift * (1.0 - float(np.exp(profile(ul)))))
    # pwl_approximate wants an increasing function
    sign = 1.0 if term.a > 0 else -1.0
    pwl = pwl_approximate(lambda u: sign * np.exp(profile(u)), ul, uh, tol / abs(shift),
                          initial_knots=(0.0,))
    knots = np.concatenate([[ul], pwl.breakpoints, [uh]])
    ridge = ridge_from_pwl(knots, eval_pwl(pwl, knots), term.b, term.c)
    return ridge.scaled(-sign * shift).plus_constant(shift)


def _append_scale_term(tape: ChannelTape, term: RidgeTerm, g_lo: float, g_hi: float, share: float) -> None:
    """x_last <- exp(g(x_prefix)) * x_last for one ridge term g, within 3 * share."""
    last = tape.dim - 1
    shift = 1.0 - tape.box.lo[last]
    v_max = tape.box.hi[last] + shift
    eps_log = share / (np.exp(g_hi) * v_max)
    log_pwl = pwl_approximate(np.log, 1.0, max(v_max, 1.0 + 1e-6), eps_log)
    # log interpolant stays in [0, log v_max]
    w_lo = g_lo - eps_log
    w_hi = float(np.log(max(v_max, 1.0))) + g_hi + eps_log
    pad = 1e-6 * (1.0 + w_hi - w_lo)
    exp_pwl = pwl_approximate(np.exp, w_lo - pad, w_hi + pad, share)
    correction = shift_correction(term, shift, tape.box.prefix(), share)
    logger.debug(f"compile_acf: log {len(log_pwl.breakpoints)} / exp {len(exp_pwl.breakpoints)} "
                 f"breakpoints, {len(correction.terms)} correction terms")

    tape.scale_channel(last, 1.0, shift)
    apply_pwl_on_channel(tape, last, log_pwl)
    append_ridge_term(tape, term)
    apply_pwl_on_channel(tape, last, exp_pwl)
    tape.scale_channel(last, 1.0, -shift)
    apply_translation(tape, correction)


def compile_acf(spec: AcfSpec, box: Box, tol: float, mode: str = 'leaky') -> Network:
    """Width-d network for the ACF on box with sup error <= tol.

    The constant part of s is an exact scale. Each remaining term g of s is
    applied on its own: x_d is shifted by M = 1 - lo_d so log applies, then
    log, add g, exp and unshift, and the shift error M * (1 - exp(g)) is
    removed by an exact translation add of its interpolant. t is added
    exactly at the end. Every approximation is in one variable, so the
    cost does not grow with d.
    """
    if box.dim != spec.d:
        raise ValueError(f"box has dim {box.dim}, ACF has dim {spec.d}")
    if not box.is_finite():
        raise ValueError("compile_acf needs a bounded box")
    last = spec.d - 1
    tape = ChannelTape(box, mode)

    terms = [t for t in spec.s.terms if not t.is_constant and t.a != 0.0]
    scale = spec.s.constant + sum(t.a * float(leaky_relu(t.beta, t.c)) for t in spec.s.terms if t.is_constant)
    if scale != 0.0:
        tape.scale_channel(last, float(np.exp(scale)), 0.0)

    prefix = box.prefix()
    spans = [RidgeSum((term,)).interval(prefix) for term in terms]
    for i, (term, (g_lo, g_hi)) in enumerate(zip(terms, spans)):
        # error made here is scaled by exp(g_j) for every later term j
        amp = 1.25 ** (len(terms) - i - 1) * float(np.exp(sum(hi for _, hi in spans[i + 1:])))
        _append_scale_term(tape, term, g_lo, g_hi, 0.3 * tol / (len(terms) * amp))

    apply_translation(tape, spec.t)
    logger.info(f"compile_acf: {len(terms)} scale terms, depth {tape.depth}")
    return tape.network()
