"""
Activation Lifts
================

Single-coordinate transformations x -> (x_prefix, tau(x)) for activations
other than Leaky-ReLU.

- lift_relu: width d+1 with ReLU. A RidgeSum tau with at most one term that
  depends on x_d is built exactly (that term is computed in the extra
  channel and folded into x_d's channel, the x_d-free terms are then added
  with scratch-channel ridge adds). Any other tau goes through slice
  induction on a 'relu' tape, and an AcfSpec through compile_acf on one.
- lift_general: width d+2 with a registered activation sigma. Channels are
  carried through sigma by the approximate identity
  (sigma(eps*x + alpha) - sigma(alpha)) / (eps * sigma'(alpha)); one channel
  computes the sigma-ridge terms, one accumulates them.
- lift_acf_general: an AcfSpec as a chain of such accumulations, each a sum
  of one-variable profiles fitted with sigma.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import get_config
from core.activations import RELU, Custom, CustomActivation, get_activation, leaky_relu
from core.errors import ToleranceNotReachedError
from core.intervals import Box, linear_form_interval
from core.network import AffineMap, Layer, Network, compose_all
from core.tape import ChannelTape
from .coupling_compiler import AcfSpec, apply_translation, compile_acf
from .ridge import RidgeSum, RidgeTerm, fit_profile, fit_ridge_best_effort
from .sct_compiler import compile_sct_leakyrelu

logger = logging.getLogger(__name__)

ScalarField = Callable[[np.ndarray], np.ndarray]

MIN_EPS = 1e-30


def _prefix_part(tau: RidgeSum, terms) -> RidgeSum:
    return RidgeSum(tuple(RidgeTerm(t.a, t.b[:-1], t.c, t.beta) for t in terms), 0.0)


def lift_relu(tau: Union[RidgeSum, AcfSpec, ScalarField], d: int, box: Box, tol: float,
              slices: int = 8, seed: Optional[int] = None) -> Network:
    """ReLU network of width d+1 for x -> (x_prefix, tau(x)) on box.

    An AcfSpec is compiled on a 'relu' tape, where each ridge add of the
    coupling flow borrows the extra channel.
    """
    if box.dim != d:
        raise ValueError(f"box has dim {box.dim}, expected {d}")
    if isinstance(tau, AcfSpec):
        if tau.d != d:
            raise ValueError(f"ACF has dim {tau.d}, expected {d}")
        return compile_acf(tau, box, tol, mode='relu')
    if not (isinstance(tau, RidgeSum) and tau.activation is None):
        return compile_sct_leakyrelu(tau, box, slices, tol, mode='relu', seed=seed)
    if tau.dim not in (None, d):
        raise ValueError(f"tau has input dim {tau.dim}, expected {d}")

    dependent = [t for t in tau.terms if t.b[-1] != 0.0]
    if len(dependent) > 1:
        logger.info(f"lift_relu: {len(dependent)} terms depend on x_d, using slice induction")
        return compile_sct_leakyrelu(tau.evaluate, box, slices, tol, mode='relu', seed=seed)
    independent = [t for t in tau.terms if t.b[-1] == 0.0]
    last = d - 1

    if dependent:
        term = dependent[0]
        b = np.array(term.b)
        shifts = np.maximum(0.0, get_config().positivity_margin - box.lo)
        weight = np.vstack([np.eye(d), b])
        bias = np.append(shifts, term.c)
        first = Layer(AffineMap(weight, bias), RELU)
        # last <- const + a*beta*u + a*(1-beta)*relu(u), u read back from the shifted channels
        readout = np.hstack([np.eye(d), np.zeros((d, 1))])
        readout_bias = -shifts
        readout[last, :] = 0.0
        readout[last, :d] = term.a * term.beta * b
        readout[last, d] = term.a * (1.0 - term.beta)
        readout_bias[last] = tau.constant + term.a * term.beta * (term.c - float(b @ shifts))
        start = Network(d, (first,), AffineMap(readout, readout_bias))
        lo, hi = RidgeSum((term,)).interval(box)
        start_box = box.with_last(lo + tau.constant, hi + tau.constant)
    else:
        weight = np.eye(d)
        weight[last, last] = 0.0
        bias = np.zeros(d)
        bias[last] = tau.constant
        start = Network.from_affine(AffineMap(weight, bias))
        start_box = box.with_last(tau.constant, tau.constant)

    tape = ChannelTape.resume(start, start_box, 'relu')
    apply_translation(tape, _prefix_part(tau, independent))
    return tape.network()


# =================
# SIGMA ACCUMULATION
# =================

def identity_error(sigma: str, alpha: float, eps: float, radius: float, samples: int = 2001) -> float:
    """Sup over |x| <= radius of the approximate-identity error."""
    act = get_activation(sigma)
    slope = act.slope_at(alpha)
    xs = np.linspace(-radius, radius, samples)
    carried = (act.fn(eps * xs + alpha) - act.fn(np.array([alpha]))[0]) / (eps * slope)
    return float(np.max(np.abs(carried - xs)))


def _carrier(sigma: str, alpha: Optional[float]) -> Tuple[CustomActivation, float]:
    act = get_activation(sigma)
    alpha = act.alpha if alpha is None else float(alpha)
    slope = act.slope_at(alpha)
    if abs(slope) < 1e-8:
        raise ValueError(f"sigma'({alpha}) = {slope:.3e} is too small to carry channels")
    return act, alpha


def _carry_eps(sigma: str, alpha: float, radius: float, per_layer: float) -> float:
    eps = 1.0
    while identity_error(sigma, alpha, eps, radius) > per_layer:
        eps *= 0.5
        if eps < MIN_EPS:
            raise ToleranceNotReachedError("approximate identity cannot meet the budget",
                                           identity_error(sigma, alpha, eps, radius))
    return eps


def _accumulate(act: CustomActivation, alpha: float, tau: RidgeSum, d: int, box: Box,
                carry_tol: float, last_coef: float = 0.0) -> Network:
    """x -> (x_prefix, last_coef * x_d + tau(x)), one sigma term per layer."""
    last = d - 1
    if not tau.terms:
        weight = np.eye(d)
        weight[last, last] = last_coef
        bias = np.zeros(d)
        bias[last] = tau.constant
        return Network.from_affine(AffineMap(weight, bias))

    # channel magnitudes: inputs and every partial sum
    radius = float(np.max(np.abs(np.concatenate([box.lo, box.hi]))))
    ends = last_coef * np.array([box.lo[last], box.hi[last]]) + tau.constant
    lo, hi = float(ends.min()), float(ends.max())
    for term in tau.terms:
        tl, th = tau.term_interval(term, box)
        lo, hi = lo + tl, hi + th
        radius = max(radius, abs(lo), abs(hi))
    count = len(tau.terms)
    per_layer = carry_tol / (count * (1.0 + abs(last_coef) + tau.lipschitz(box)))
    eps = _carry_eps(act.name, alpha, radius, per_layer)
    logger.debug(f"lift_general: eps {eps:.3e} for radius {radius:.3g}, {count} layers")

    s_alpha = float(act.fn(np.array([alpha]))[0])
    scale = 1.0 / (eps * act.slope_at(alpha))
    tag = Custom(act.name)
    # logical state: (x_0..x_{d-1}, A); pending maps physical channels to it
    pend_w = np.vstack([np.eye(d), np.zeros((1, d))])
    pend_w[d, last] = last_coef
    pend_b = np.append(np.zeros(d), tau.constant)
    layers = []
    for term in tau.terms:
        enc_w = np.zeros((d + 2, d + 1))
        enc_b = np.zeros(d + 2)
        enc_w[:d, :d] = eps * np.eye(d)
        enc_b[:d] = alpha
        enc_w[d, :d] = term.b
        enc_b[d] = term.c
        enc_w[d + 1, d] = eps
        enc_b[d + 1] = alpha
        layers.append(Layer(AffineMap(enc_w @ pend_w, enc_w @ pend_b + enc_b), tag))
        pend_w = np.zeros((d + 1, d + 2))
        pend_b = np.full(d + 1, -s_alpha * scale)
        pend_w[:d, :d] = scale * np.eye(d)
        pend_w[d, d + 1] = scale
        pend_w[d, d] = term.a
    keep = list(range(last)) + [d]
    return Network(d, tuple(layers), AffineMap(pend_w[keep], pend_b[keep]))


def lift_general(sigma: str, tau: Union[RidgeSum, AcfSpec, ScalarField], d: int, box: Box, tol: float,
                 alpha: Optional[float] = None, seed: Optional[int] = None,
                 max_terms: Optional[int] = None) -> Network:
    """Width-(d+2) network with activation sigma for x -> (x_prefix, tau(x)) on box.

    A tau that is not already a sigma ridge sum is fitted first; half of what
    the fit leaves of tol goes to the carried channels.

    Raises:
        ValueError: sigma'(alpha) too small to carry channels.
        ToleranceNotReachedError: the fit or the carried channels miss tol.
    """
    if box.dim != d:
        raise ValueError(f"box has dim {box.dim}, expected {d}")
    act, alpha = _carrier(sigma, alpha)
    if isinstance(tau, AcfSpec):
        if tau.d != d:
            raise ValueError(f"ACF has dim {tau.d}, expected {d}")
        return lift_acf_general(sigma, tau, box, tol, alpha=alpha, seed=seed, max_terms=max_terms)

    fit_error = 0.0
    if not (isinstance(tau, RidgeSum) and tau.activation == sigma):
        target = tau.evaluate if isinstance(tau, RidgeSum) else tau
        tau = fit_ridge_best_effort(target, box, 0.5 * tol, max_terms=max_terms, seed=seed, activation=sigma)
        fit_error = tau.fit_error
        logger.info(f"lift_general: fitted {len(tau.terms)} '{sigma}' ridge terms (error {fit_error:.3e})")
        if fit_error >= tol:
            raise ToleranceNotReachedError(
                f"'{sigma}' ridge fit error {fit_error:.3e} does not fit in {tol:.3e}", fit_error)
    return _accumulate(act, alpha, tau, d, box, 0.5 * (tol - fit_error))


# =================
# AFFINE COUPLING FLOWS
# =================

@dataclass(frozen=True, eq=False)
class _Profile:
    """fn(u), u = direction . x + offset, over [lo, hi]."""
    fn: ScalarField
    direction: np.ndarray
    offset: float
    lo: float
    hi: float
    kinks: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class _Block:
    """x_d <- last_coef * x_d + constant + sum of profiles, errors scaled by amp downstream."""
    profiles: Sequence[_Profile]
    constant: float
    box: Box
    amp: float
    last_coef: float = 0.0


def _ridge_profile(term: RidgeTerm, prefix: Box) -> _Profile:
    direction = np.append(term.b, 0.0)
    lo, hi = linear_form_interval(np.array(term.b), term.c, prefix)
    return _Profile(lambda u: term.a * leaky_relu(term.beta, u), direction, term.c, lo, hi, (0.0,))


def _correction_profile(term: RidgeTerm, shift: float, prefix: Box) -> _Profile:
    base = _ridge_profile(term, prefix)
    return _Profile(lambda u: shift * (1.0 - np.exp(base.fn(u))), base.direction, base.offset,
                    base.lo, base.hi, base.kinks)


def _last_profile(fn: ScalarField, d: int, lo: float, hi: float) -> _Profile:
    direction = np.zeros(d)
    direction[-1] = 1.0
    return _Profile(fn, direction, 0.0, lo, hi)


def _log_shifted(coef: float, shift: float) -> ScalarField:
    return lambda x: np.log(coef * x + shift)


def _lift_fit(fit: RidgeSum, profile: _Profile) -> List[RidgeTerm]:
    """Terms of a one-variable fit rewritten over x."""
    return [RidgeTerm(t.a, tuple(t.b[0] * profile.direction), t.b[0] * profile.offset + t.c, t.beta)
            for t in fit.terms]


def _acf_blocks(spec: AcfSpec, box: Box, margin: float) -> List[_Block]:
    """The accumulation chain for spec on box, intervals widened by margin."""
    d = spec.d
    last = d - 1
    prefix = box.prefix().widen(margin)
    scale = float(np.exp(spec.s.constant + sum(t.a * float(leaky_relu(t.beta, t.c))
                                               for t in spec.s.terms if t.is_constant)))
    terms = [t for t in spec.s.terms if not t.is_constant and t.a != 0.0]
    t_terms = [t for t in spec.t.terms if not t.is_constant and t.a != 0.0]
    t_constant = spec.t.constant + sum(t.a * float(leaky_relu(t.beta, t.c))
                                       for t in spec.t.terms if t.is_constant)
    t_profiles = [_ridge_profile(t, prefix) for t in t_terms]

    x_lo, x_hi = box.lo[last] - margin, box.hi[last] + margin
    if not terms:
        return [_Block(t_profiles, t_constant, prefix.product(Box([x_lo], [x_hi])), 1.0, scale)]

    spans = [RidgeSum((term,)).interval(prefix) for term in terms]
    blocks = []
    for i, (term, (g_lo, g_hi)) in enumerate(zip(terms, spans)):
        amp = 1.25 ** (len(terms) - i - 1) * float(np.exp(sum(hi for _, hi in spans[i + 1:])))
        coef = scale if i == 0 else 1.0
        shift = 1.0 - coef * x_lo
        y_lo = g_lo - margin
        y_hi = float(np.log(coef * x_hi + shift)) + g_hi + margin
        # x_d <- log(coef * x_d + shift) + g(u)
        blocks.append(_Block([_last_profile(_log_shifted(coef, shift), d, x_lo, x_hi),
                              _ridge_profile(term, prefix)],
                             0.0, prefix.product(Box([x_lo], [x_hi])), amp * float(np.exp(y_hi))))
        # x_d <- exp(x_d) - shift + shift * (1 - exp(g(u))) [+ t]
        final = i == len(terms) - 1
        profiles = [_last_profile(np.exp, d, y_lo, y_hi), _correction_profile(term, shift, prefix)]
        blocks.append(_Block(profiles + (t_profiles if final else []),
                             -shift + (t_constant if final else 0.0),
                             prefix.product(Box([y_lo], [y_hi])), amp))
        corners = np.outer([np.exp(g_lo), np.exp(g_hi)], [coef * x_lo, coef * x_hi])
        x_lo, x_hi = float(corners.min()) - margin, float(corners.max()) + margin
    return blocks


def lift_acf_general(sigma: str, spec: AcfSpec, box: Box, tol: float, alpha: Optional[float] = None,
                     seed: Optional[int] = None, max_terms: Optional[int] = None) -> Network:
    """Width-(d+2) sigma network for an affine coupling flow on box.

    Every non-constant s term g is applied by two accumulations,

        x_d <- log(c * x_d + M) + g(u)
        x_d <- exp(x_d) - M + M * (1 - exp(g(u)))

    with c the exponential of the constant part of s on the first term and 1
    after it; t is added in the last one. Each accumulated function is a sum
    of one-variable profiles (log, exp, a ridge term, its shift correction)
    fitted with sigma. The fits run first; whatever their measured errors
    leave of tol, scaled by how much later blocks amplify them, goes to the
    carried channels.

    Raises:
        ToleranceNotReachedError: the profile fits alone use up tol.
    """
    if box.dim != spec.d:
        raise ValueError(f"box has dim {box.dim}, ACF has dim {spec.d}")
    if not box.is_finite():
        raise ValueError("lift_acf_general needs a bounded box")
    act, alpha = _carrier(sigma, alpha)
    seed = get_config().seed if seed is None else seed
    blocks = _acf_blocks(spec, box, tol)

    fits = []
    fit_total = 0.0
    for block in blocks:
        share = 0.5 * tol / (len(blocks) * block.amp * max(1, len(block.profiles)))
        block_fits = [fit_profile(p.fn, p.lo, p.hi, share, sigma, seed, p.kinks, max_terms)
                      for p in block.profiles]
        fit_total += block.amp * sum(f.fit_error for f in block_fits)
        fits.append(block_fits)
    logger.info(f"lift_acf_general: {len(blocks)} blocks, amplified fit error {fit_total:.3e}")
    if fit_total >= 0.9 * tol:
        raise ToleranceNotReachedError(
            f"'{sigma}' profile fits reach {fit_total:.3e}, tolerance is {tol:.3e}", fit_total)

    carry = 0.5 * (tol - fit_total) / len(blocks)
    networks = []
    for block, block_fits in zip(blocks, fits):
        terms = [t for fit, p in zip(block_fits, block.profiles) for t in _lift_fit(fit, p)]
        constant = block.constant + sum(fit.constant for fit in block_fits)
        tau = RidgeSum(tuple(terms), constant, sigma)
        networks.append(_accumulate(act, alpha, tau, spec.d, block.box, carry / block.amp, block.last_coef))
    return compose_all(networks)
