"""
Network model tests: shapes, evaluation, composition, inversion and
interval enclosures.
"""

import numpy as np
import pytest

from core.activations import IDENTITY, RELU, Custom, LeakyRelu
from core.errors import DimensionMismatchError, NotInvertibleError
from core.intervals import Box, affine_interval
from core.network import (
    AffineMap, Layer, Network, compose, compose_all, evaluate, invert_evaluate,
    invert_network, layer_bounds, propagate_intervals,
)


def random_invertible_network(rng: np.random.Generator, width: int = 3, depth: int = 10) -> Network:
    """Orthogonal times mild diagonal scaling keeps every layer well conditioned."""
    layers = []
    for _ in range(depth):
        q, _ = np.linalg.qr(rng.normal(size=(width, width)))
        weight = q @ np.diag(rng.uniform(0.8, 1.25, width))
        layers.append(Layer(AffineMap(weight, rng.normal(size=width)), LeakyRelu(rng.uniform(0.5, 1.0))))
    q, _ = np.linalg.qr(rng.normal(size=(width, width)))
    return Network(width, tuple(layers), AffineMap(q, rng.normal(size=width)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def abs_net():
    """|x| as relu(x) + relu(-x)."""
    return Network(1, (Layer(AffineMap([[1.0], [-1.0]], [0.0, 0.0]), RELU),),
                   AffineMap([[1.0, 1.0]], [0.0]))


class TestAffineMap:

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            AffineMap(np.eye(2), np.zeros(3))

    def test_then_applies_inner_first(self):
        inner = AffineMap([[2.0, 0.0], [0.0, 3.0]], [1.0, 0.0])
        outer = AffineMap([[1.0, 1.0]], [-1.0])
        x = np.array([0.5, -2.0])
        assert np.allclose(inner.then(outer).apply(x), outer.apply(inner.apply(x)))

    def test_inverse_of_singular_map_raises(self):
        with pytest.raises(NotInvertibleError):
            AffineMap([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]).inverse()

    def test_row_norm_is_max_abs_row_sum(self):
        assert AffineMap([[1.0, -3.0], [0.5, 0.5]], [0.0, 0.0]).row_norm() == 4.0

    def test_arrays_are_read_only(self):
        affine = AffineMap.identity(2)
        with pytest.raises(ValueError):
            affine.weight[0, 0] = 5.0


class TestNetwork:

    def test_layer_index_in_dimension_error(self):
        with pytest.raises(DimensionMismatchError) as exc:
            Network(2, (Layer(AffineMap(np.eye(2), np.zeros(2)), RELU),
                        Layer(AffineMap(np.eye(3), np.zeros(3)), RELU)),
                    AffineMap.identity(3))
        assert exc.value.layer_index == 1

    def test_evaluate_point_and_batch(self, abs_net):
        assert np.allclose(evaluate(abs_net, [-2.5]), [2.5])
        batch = evaluate(abs_net, np.array([[-1.0], [0.0], [3.0]]))
        assert batch.shape == (3, 1)
        assert np.allclose(batch[:, 0], [1.0, 0.0, 3.0])

    def test_input_dimension_checked(self, abs_net):
        with pytest.raises(DimensionMismatchError):
            abs_net.evaluate(np.zeros((4, 2)))

    def test_width_and_depth(self, abs_net):
        assert abs_net.width == 2
        assert abs_net.depth == 1
        affine_only = Network.identity(3)
        assert affine_only.width == 0
        assert affine_only.depth == 0

    def test_identity_activation_is_affine(self):
        net = Network(2, (Layer(AffineMap([[1.0, 2.0], [0.0, 1.0]], [1.0, -1.0]), IDENTITY),),
                      AffineMap.identity(2))
        assert np.allclose(net.evaluate([1.0, 1.0]), [4.0, 0.0])

    def test_custom_activation_uses_registry(self):
        net = Network(1, (Layer(AffineMap([[1.0]], [0.0]), Custom('tanh')),), AffineMap.identity(1))
        assert np.isclose(net.evaluate([0.5])[0], np.tanh(0.5))


class TestCompose:

    def test_compose_matches_sequential_evaluation(self, rng):
        inner = random_invertible_network(rng, width=3, depth=2)
        outer = random_invertible_network(rng, width=3, depth=3)
        x = rng.normal(size=(20, 3))
        composed = compose(outer, inner)
        assert composed.depth == 5
        assert np.allclose(composed.evaluate(x), outer.evaluate(inner.evaluate(x)), atol=1e-12)

    def test_compose_all_is_application_order(self):
        shift = Network.from_affine(AffineMap.translation([1.0]))
        double = Network.from_affine(AffineMap([[2.0]], [0.0]))
        assert np.allclose(compose_all([shift, double]).evaluate([1.0]), [4.0])
        assert np.allclose(compose_all([double, shift]).evaluate([1.0]), [3.0])

    def test_compose_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            compose(Network.identity(2), Network.identity(3))


class TestInversion:

    def test_random_networks_round_trip(self, rng):
        for _ in range(100):
            net = random_invertible_network(rng)
            x = rng.uniform(-1.0, 1.0, size=(50, 3))
            back = invert_evaluate(net, net.evaluate(x))
            assert np.max(np.abs(back - x)) < 1e-8

    def test_inverse_network_swaps_slopes(self, rng):
        net = random_invertible_network(rng, depth=4)
        inverse = invert_network(net)
        betas = [tag.beta for tag in net.activations()]
        inv_betas = [tag.beta for tag in inverse.activations()]
        assert np.allclose(inv_betas, [1.0 / b for b in reversed(betas)])
        x = rng.uniform(-1.0, 1.0, size=(30, 3))
        assert np.max(np.abs(inverse.evaluate(net.evaluate(x)) - x)) < 1e-9

    def test_rank_deficient_layer_reported(self):
        net = Network(2, (Layer(AffineMap(np.eye(2), np.zeros(2)), LeakyRelu(0.5)),
                          Layer(AffineMap([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0]), LeakyRelu(0.5))),
                      AffineMap.identity(2))
        with pytest.raises(NotInvertibleError) as exc:
            invert_evaluate(net, np.zeros(2))
        assert exc.value.layer_index == 1

    def test_relu_is_not_invertible(self, abs_net):
        with pytest.raises(NotInvertibleError):
            invert_network(abs_net)


class TestIntervals:

    def test_grid_shapes(self):
        box = Box.from_intervals([(0.0, 1.0), (-1.0, 1.0)])
        assert box.grid(5).shape == (25, 2)
        assert box.midpoint_grid(5).shape == (16, 2)
        assert Box.unit(0).grid(7).shape == (1, 0)

    def test_affine_interval_is_sound(self, rng):
        weight = rng.normal(size=(3, 2))
        bias = rng.normal(size=3)
        box = Box.from_intervals([(-1.0, 2.0), (0.0, 0.5)])
        lo, hi = affine_interval(weight, bias, box.lo, box.hi)
        images = box.sample(500, rng) @ weight.T + bias
        assert np.all(images >= lo - 1e-12) and np.all(images <= hi + 1e-12)

    def test_layer_bounds_enclose_samples(self, rng):
        net = random_invertible_network(rng, depth=4)
        box = Box.unit(3)
        bounds = layer_bounds(net, box)
        assert len(bounds) == net.depth + 1
        out = net.output_box(box)
        assert out.contains(net.evaluate(box.sample(500, rng)), atol=1e-9)
        assert len(propagate_intervals(net, box)) == net.depth

    def test_box_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            Box([1.0], [0.0])
