"""
PWL compiler tests.
"""

import time

import numpy as np
import pytest

from compilers.pwl_compiler import (
    PwlFunction, apply_pwl_on_channel, broadcast_scalar_network, compile_increasing_pwl,
    eval_pwl, generalize_activation, pwl_approximate, simplify_pwl, wrap_schedule,
)
from core.activations import Custom, RELU
from core.errors import NonMonotoneError, ToleranceNotReachedError
from core.intervals import Box
from core.network import AffineMap, Layer, Network
from core.tape import ChannelTape


def random_pwl(rng: np.random.Generator, max_breakpoints: int = 20) -> PwlFunction:
    k = int(rng.integers(0, max_breakpoints + 1))
    bps = np.sort(rng.uniform(-8, 8, k))
    while k > 1 and np.min(np.diff(bps)) < 1e-3:
        bps = np.sort(rng.uniform(-8, 8, k))
    slopes = rng.uniform(0.2, 5.0, k + 1)
    return PwlFunction(tuple(bps), tuple(slopes), (float(rng.uniform(-1, 1)), float(rng.normal())))


class TestPwlFunction:

    def test_eval_matches_definition(self):
        f = PwlFunction((-1.0, 1.0), (0.5, 1.0, 2.0), (0.0, 0.0))
        assert np.allclose(eval_pwl(f, [-3.0, -1.0, 0.0, 1.0, 2.0]), [-2.0, -1.0, 0.0, 1.0, 3.0])

    def test_wrong_slope_count(self):
        with pytest.raises(ValueError):
            PwlFunction((0.0,), (1.0,), (0.0, 0.0))

    def test_breakpoints_must_increase(self):
        with pytest.raises(ValueError):
            PwlFunction((1.0, 0.0), (1.0, 1.0, 1.0), (0.0, 0.0))

    def test_simplify_drops_phantom_breakpoints(self):
        f = PwlFunction((-1.0, 0.0, 1.0), (1.0, 1.0, 2.0, 2.0), (0.0, 0.0))
        g = simplify_pwl(f)
        assert g.breakpoints == (0.0,)
        xs = np.linspace(-3, 3, 61)
        assert np.allclose(eval_pwl(g, xs), eval_pwl(f, xs))


class TestCompileIncreasingPwl:

    def test_one_breakpoint(self):
        net = compile_increasing_pwl(PwlFunction((0.0,), (1.0, 2.0), (0.0, 0.0)))
        assert net.depth == 1 and net.width == 1
        assert np.allclose(net.evaluate(np.array([[-1.0], [0.5]]))[:, 0], [-1.0, 1.0])

    def test_no_breakpoints_is_affine(self):
        net = compile_increasing_pwl(PwlFunction((), (3.0,), (1.0, 2.0)))
        assert net.depth == 0
        assert np.allclose(net.evaluate([2.0]), [5.0])

    def test_non_increasing_rejected(self):
        with pytest.raises(NonMonotoneError):
            compile_increasing_pwl(PwlFunction((0.0,), (1.0, -1.0), (0.0, 0.0)))
        with pytest.raises(NonMonotoneError):
            compile_increasing_pwl(PwlFunction((0.0,), (0.0, 1.0), (0.0, 0.0)))

    def test_random_pwls_exact(self):
        rng = np.random.default_rng(0)
        xs = np.linspace(-10, 10, 10_000)
        started = time.perf_counter()
        for _ in range(50):
            f = random_pwl(rng)
            net = compile_increasing_pwl(f)
            want = eval_pwl(f, xs)
            got = net.evaluate(xs[:, None])[:, 0]
            scale = np.maximum(1.0, np.abs(want))
            assert np.max(np.abs(got - want) / scale) < 1e-9
            assert net.depth == len(simplify_pwl(f).breakpoints)
            assert net.width <= 1
        assert time.perf_counter() - started < 5.0

    def test_schedule_betas_are_slope_ratios(self):
        f = PwlFunction((-1.0, 1.0), (0.5, 1.0, 2.0), (0.0, 0.0))
        assert wrap_schedule(f).betas == (0.5, 0.5)


class TestChannelEmbedding:

    def test_pwl_on_one_channel_leaves_others(self):
        f = PwlFunction((-0.5, 0.25), (0.5, 2.0, 1.0), (0.0, 0.0))
        tape = ChannelTape(Box.from_intervals([(-1.0, 1.0), (-2.0, 3.0)]))
        net = apply_pwl_on_channel(tape, 1, f).network()
        assert net.width == 2
        x = np.random.default_rng(3).uniform([-1.0, -2.0], [1.0, 3.0], size=(200, 2))
        y = net.evaluate(x)
        assert np.allclose(y[:, 0], x[:, 0], atol=1e-12)
        assert np.allclose(y[:, 1], eval_pwl(f, x[:, 1]), atol=1e-12)

    def test_relu_tape_uses_one_extra_channel(self):
        f = PwlFunction((0.0,), (0.5, 2.0), (0.0, 0.0))
        tape = ChannelTape(Box.from_intervals([(-1.0, 1.0), (-1.0, 1.0)]), mode='relu')
        net = apply_pwl_on_channel(tape, 1, f).network()
        assert net.width == 3
        assert all(tag == RELU for tag in net.activations())
        x = np.random.default_rng(4).uniform(-1, 1, size=(100, 2))
        assert np.allclose(net.evaluate(x)[:, 1], eval_pwl(f, x[:, 1]), atol=1e-12)

    def test_broadcast(self):
        net = compile_increasing_pwl(PwlFunction((0.0,), (1.0, 2.0), (0.0, 0.0)))
        wide = broadcast_scalar_network(net, 3)
        assert wide.width == 3
        assert np.allclose(wide.evaluate([-1.0, 1.0, 2.0]), [-1.0, 2.0, 4.0])


class TestApproximation:

    def test_log_within_tolerance(self):
        f = pwl_approximate(np.log, 1.0, 10.0, 1e-4)
        xs = np.linspace(1.0, 10.0, 5001)
        assert np.max(np.abs(eval_pwl(f, xs) - np.log(xs))) <= 1.5e-4
        assert f.is_increasing

    def test_decreasing_function_rejected(self):
        with pytest.raises(NonMonotoneError):
            pwl_approximate(lambda x: -x ** 3, 0.0, 1.0, 1e-3)

    def test_knot_budget(self):
        with pytest.raises(ToleranceNotReachedError) as exc:
            pwl_approximate(np.exp, 0.0, 5.0, 1e-10, max_knots=8)
        assert exc.value.best_error > 1e-10

    def test_generalize_tanh_network(self):
        rng = np.random.default_rng(11)
        net = Network(2, (Layer(AffineMap(rng.normal(size=(2, 2)), rng.normal(size=2)), Custom('tanh')),
                          Layer(AffineMap(rng.normal(size=(2, 2)), rng.normal(size=2)), Custom('tanh'))),
                      AffineMap(rng.normal(size=(2, 2)), rng.normal(size=2)))
        box = Box.unit(2)
        pwl_net = generalize_activation(net, box, 1e-2)
        assert pwl_net.width == net.width
        assert all(tag.is_leaky for tag in pwl_net.activations())
        grid = box.grid(50)
        assert np.max(np.abs(pwl_net.evaluate(grid) - net.evaluate(grid))) < 1e-2

    def test_generalize_rejects_relu(self):
        net = Network(1, (Layer(AffineMap([[1.0]], [0.0]), RELU),), AffineMap.identity(1))
        with pytest.raises(NonMonotoneError):
            generalize_activation(net, Box.unit(1), 1e-2)
