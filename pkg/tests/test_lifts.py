import numpy as np
import pytest

from compilers.coupling_compiler import AcfSpec, evaluate_acf
from compilers.lifts import identity_error, lift_acf_general, lift_general, lift_relu
from compilers.ridge import RidgeSum, RidgeTerm
from core.activations import RELU, Custom, register_activation
from core.errors import ToleranceNotReachedError
from core.intervals import Box


@pytest.fixture
def one_dependent_term():
    return RidgeSum((RidgeTerm(2.0, (0.5, -1.0, 1.5), 0.2, 0.3),
                     RidgeTerm(-1.0, (1.0, 0.5, 0.0), 0.1, 0.5)), 0.4)


@pytest.fixture
def acf_spec():
    return AcfSpec(2, RidgeSum((RidgeTerm(0.4, (1.0,), 0.1, 0.5),), 0.05),
                   RidgeSum((RidgeTerm(0.5, (1.0,), -0.2, 0.25),), 0.1))


@pytest.fixture
def tanh_ridge():
    return RidgeSum((RidgeTerm(1.0, (1.0, 0.5), 0.0), RidgeTerm(-0.5, (0.2, 1.0), 0.3)), 0.1,
                    activation='tanh')


class TestLiftRelu:

    def test_single_dependent_term_is_exact(self, one_dependent_term):
        box = Box.from_intervals([(-1.0, 1.0)] * 3)
        net = lift_relu(one_dependent_term, 3, box, 1e-6)
        assert net.width == 4
        assert all(tag == RELU for tag in net.activations())
        grid = box.grid(9)
        out = net.evaluate(grid)
        assert np.max(np.abs(out[:, -1] - one_dependent_term(grid))) < 1e-9
        assert np.max(np.abs(out[:, :-1] - grid[:, :-1])) < 1e-12

    def test_prefix_only_tau(self):
        tau = RidgeSum((RidgeTerm(1.5, (1.0, 0.0), -0.2, 0.1),), -0.3)
        box = Box.unit(2)
        net = lift_relu(tau, 2, box, 1e-6)
        assert net.width <= 3
        grid = box.grid(11)
        assert np.max(np.abs(net.evaluate(grid)[:, -1] - tau(grid))) < 1e-9

    def test_several_dependent_terms_use_slices(self):
        tau = RidgeSum((RidgeTerm(1.0, (1.0,), 0.0, 0.5), RidgeTerm(0.5, (1.0,), -0.5, 0.5)))
        box = Box.unit(1)
        net = lift_relu(tau, 1, box, 1e-2, slices=8, seed=0)
        assert net.width == 2
        knots = np.linspace(0.0, 1.0, 9)[:, None]
        assert np.max(np.abs(net.evaluate(knots)[:, 0] - tau(knots))) <= 1e-2

    def test_coupling_flow(self, acf_spec):
        box = Box.unit(2)
        net = lift_relu(acf_spec, 2, box, 1e-2)
        assert net.width == 3
        assert all(tag == RELU for tag in net.activations())
        grid = box.grid(21)
        assert np.max(np.abs(net.evaluate(grid) - evaluate_acf(acf_spec, grid))) < 1e-2

    def test_box_dimension_checked(self, one_dependent_term):
        with pytest.raises(ValueError):
            lift_relu(one_dependent_term, 3, Box.unit(2), 1e-6)


class TestApproximateIdentity:

    def test_error_shrinks_with_eps(self):
        assert identity_error('tanh', 0.0, 0.1, 1.0) < identity_error('tanh', 0.0, 0.5, 1.0)
        assert identity_error('tanh', 0.0, 0.01, 1.0) < 1e-4

    def test_linear_activation_is_exact(self):
        assert identity_error('linear', 0.0, 1.0, 5.0) < 1e-9


class TestLiftGeneral:

    def test_sigma_ridge_tau(self, tanh_ridge):
        box = Box.unit(2)
        net = lift_general('tanh', tanh_ridge, 2, box, 1e-2)
        assert net.width == 4
        assert all(tag == Custom('tanh') for tag in net.activations())
        grid = box.grid(11)
        out = net.evaluate(grid)
        assert np.max(np.abs(out[:, -1] - tanh_ridge(grid))) < 1e-2
        assert np.max(np.abs(out[:, 0] - grid[:, 0])) < 1e-2

    def test_fitted_tau(self):
        box = Box.unit(1)
        net = lift_general('tanh', lambda x: x[:, 0] ** 2, 1, box, 5e-2, seed=0)
        assert net.width == 3
        xs = box.grid(101)
        assert np.max(np.abs(net.evaluate(xs)[:, 0] - xs[:, 0] ** 2)) < 5e-2

    def test_constant_tau_is_affine(self):
        net = lift_general('sigmoid', RidgeSum((), 0.7, activation='sigmoid'), 2, Box.unit(2), 1e-3)
        assert net.depth == 0
        assert np.allclose(net.evaluate([0.2, 0.9]), [0.2, 0.7])

    def test_flat_activation_rejected(self, tanh_ridge):
        register_activation('flat_cube', lambda z: np.asarray(z) ** 3, alpha=0.0)
        with pytest.raises(ValueError):
            lift_general('flat_cube', tanh_ridge, 2, Box.unit(2), 1e-2)

    def test_linear_activation_is_exact(self):
        tau = RidgeSum((RidgeTerm(1.5, (1.0, -0.5, 2.0), 0.3), RidgeTerm(-0.75, (0.2, 1.0, 0.0), -0.1)), 0.4,
                       activation='linear')
        box = Box.from_intervals([(-1.0, 1.0)] * 3)
        net = lift_general('linear', tau, 3, box, 1e-6)
        assert net.width == 5
        grid = box.grid(9)
        out = net.evaluate(grid)
        assert np.max(np.abs(out[:, -1] - tau(grid))) <= 1e-9
        assert np.max(np.abs(out[:, :-1] - grid[:, :-1])) <= 1e-9

    def test_fit_beyond_tolerance_rejected(self):
        with pytest.raises(ToleranceNotReachedError):
            lift_general('linear', lambda x: np.abs(x[:, 0] - 0.5), 1, Box.unit(1), 1e-3)


class TestLiftCouplingFlow:

    def test_constant_flow_is_affine(self):
        spec = AcfSpec(2, RidgeSum((), 0.3), RidgeSum((), -0.2))
        net = lift_general('tanh', spec, 2, Box.unit(2), 1e-3)
        assert net.depth == 0
        grid = Box.unit(2).grid(5)
        assert np.max(np.abs(net.evaluate(grid) - evaluate_acf(spec, grid))) < 1e-12

    def test_dimension_checked(self, acf_spec):
        with pytest.raises(ValueError):
            lift_general('tanh', acf_spec, 3, Box.unit(3), 1e-2)

    def test_log_and_exp_need_a_curved_activation(self, acf_spec):
        with pytest.raises(ToleranceNotReachedError):
            lift_acf_general('linear', acf_spec, Box.unit(2), 1e-2)

    @pytest.mark.slow
    def test_tanh_flow_within_tolerance(self, acf_spec):
        box = Box.unit(2)
        net = lift_general('tanh', acf_spec, 2, box, 5e-2, seed=0)
        assert net.width == 4
        assert all(tag == Custom('tanh') for tag in net.activations())
        grid = box.grid(21)
        out = net.evaluate(grid)
        assert np.max(np.abs(out - evaluate_acf(acf_spec, grid))) < 5e-2
