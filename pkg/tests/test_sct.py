"""
Single-coordinate transformation tests: sharpening steps and slice
induction in one and two dimensions.
"""

import numpy as np
import pytest

from compilers.sct_compiler import (
    SharpenState, compile_sct_leakyrelu, compile_sct_with_report, predicted_iterations,
    sharpen_step, sharpen_until, slice_values,
)
from core.errors import NonMonotoneError
from core.intervals import Box
from core.network import Network
from verify.verifier import check_monotone_last


def tau_1d(x):
    return x[:, 0] + 0.3 * x[:, 0] ** 2


def tau_2d(x):
    return x[:, 1] * (1.0 + 0.5 * np.sin(3.0 * x[:, 0])) + 0.2 * x[:, 0]


def lattice(box: Box, slices: int, grid_res: int) -> np.ndarray:
    prefix = box.prefix().grid(grid_res)
    rows = []
    for i in range(slices + 1):
        alpha = box.lo[-1] + i / slices * box.width[-1]
        rows.append(np.column_stack([prefix, np.full(prefix.shape[0], alpha)]))
    return np.vstack(rows)


@pytest.fixture
def ramp_state():
    """g = x_2 on the unit square, wanted ratio 1 + x_1 at x_2 = 1/2."""
    return SharpenState.initial(Network.identity(2), lambda p: 1.0 + p[:, 0], 0.0, 0.5, Box.unit(2))


class TestPredictedIterations:

    def test_already_sharp(self):
        assert predicted_iterations(1.0, 0.1) == 0
        assert predicted_iterations(1.05, 0.1) == 0

    def test_known_value(self):
        assert predicted_iterations(8.0, 0.01) == 14

    @pytest.mark.parametrize("gamma0,delta", [(8.0, 0.01), (2.0, 1e-3), (1.5, 0.1)])
    def test_is_smallest_sufficient_count(self, gamma0, delta):
        k = predicted_iterations(gamma0, delta)
        assert gamma0 ** ((2.0 / 3.0) ** k) < 1.0 + delta
        assert gamma0 ** ((2.0 / 3.0) ** (k - 1)) >= 1.0 + delta


class TestSharpenStep:

    def test_gamma_contracts(self, ramp_state):
        assert np.isclose(ramp_state.gamma, 2.0)
        after = sharpen_step(ramp_state, seed=0)
        assert after.gamma < ramp_state.gamma
        assert after.gamma <= 2.0 ** (2.0 / 3.0) + 0.05
        assert after.step == 1
        assert after.history == (ramp_state.gamma, after.gamma)
        assert after.network.width == 2

    def test_values_below_alpha1_unchanged(self, ramp_state):
        after = sharpen_step(ramp_state, seed=0)
        prefix = Box.unit(1).grid(17)
        assert np.max(np.abs(slice_values(after.network, prefix, 0.0))) < 1e-2

    def test_ratio_never_drops_below_one(self, ramp_state):
        after = sharpen_step(ramp_state, seed=0)
        assert np.min(after.ratio()) > 1.0 - 1e-2

    def test_refused_when_already_sharp(self):
        state = SharpenState.initial(Network.identity(2), lambda p: np.ones(p.shape[0]), 0.0, 0.5, Box.unit(2))
        assert state.gamma == 1.0
        assert sharpen_step(state) is state

    def test_ratio_below_one_rejected(self):
        with pytest.raises(ValueError):
            SharpenState.initial(Network.identity(2), lambda p: np.full(p.shape[0], 0.5), 0.0, 0.5,
                                 Box.unit(2))

    def test_until_threshold(self, ramp_state):
        state = sharpen_until(ramp_state, 0.05, seed=0)
        assert state.gamma - 1.0 < 0.05
        assert len(state.history) == state.step + 1
        assert state.step <= predicted_iterations(2.0, 0.05) + 5

    @pytest.mark.parametrize("gamma0", [2.0, 3.5, 5.0, 7.5, 10.0])
    def test_contraction_rate(self, gamma0):
        state = SharpenState.initial(Network.identity(2), lambda p: 1.0 + (gamma0 - 1.0) * p[:, 0],
                                     0.0, 0.5, Box.unit(2))
        assert np.isclose(state.gamma, gamma0)
        final = sharpen_until(state, 0.01, seed=0)
        assert final.gamma < 1.01
        assert final.step <= predicted_iterations(gamma0, 0.01) + 2
        for before, after in zip(final.history, final.history[1:]):
            assert after <= before ** (2.0 / 3.0) + 0.05


class TestCompileSct:

    def test_one_dimension(self):
        box = Box.unit(1)
        result = compile_sct_with_report(tau_1d, box, 8, 1e-2, seed=0)
        assert result.network.width == 1
        points = lattice(box, 8, 1)
        assert np.max(np.abs(result.network.evaluate(points)[:, 0] - tau_1d(points))) <= 1e-2
        assert result.slice_table.values.shape == (9, 1)
        assert result.max_slice_error <= 1e-2

    def test_one_dimension_relu_tape(self):
        net = compile_sct_leakyrelu(tau_1d, Box.unit(1), 8, 1e-2, mode='relu', seed=0)
        assert net.width == 2
        points = lattice(Box.unit(1), 8, 1)
        assert np.max(np.abs(net.evaluate(points)[:, 0] - tau_1d(points))) <= 1e-2

    def test_rescaled_box(self):
        box = Box.from_intervals([(2.0, 4.0)])
        net = compile_sct_leakyrelu(lambda x: np.log(x[:, 0]), box, 8, 1e-2, seed=0)
        points = lattice(box, 8, 1)
        assert np.max(np.abs(net.evaluate(points)[:, 0] - np.log(points[:, 0]))) <= 1e-2

    def test_decreasing_oracle_rejected(self):
        with pytest.raises(NonMonotoneError):
            compile_sct_leakyrelu(lambda x: -x[:, 0], Box.unit(1), 4, 1e-2)

    def test_needs_a_slice(self):
        with pytest.raises(ValueError):
            compile_sct_leakyrelu(tau_1d, Box.unit(1), 0, 1e-2)

    @pytest.mark.slow
    def test_two_dimensions(self):
        box = Box.unit(2)
        result = compile_sct_with_report(tau_2d, box, 8, 1e-2, seed=0)
        net = result.network
        assert net.width == 2
        points = lattice(box, 8, 9)
        out = net.evaluate(points)
        assert np.max(np.abs(out[:, 1] - tau_2d(points))) <= 1e-2
        assert np.max(np.abs(out[:, 0] - points[:, 0])) < 1e-9
        assert len(result.gamma_histories) == 8

    @pytest.mark.slow
    def test_two_dimensions_bumped_identity(self):
        def tau(x):
            return x[:, 1] + 0.25 * np.sin(np.pi * x[:, 0]) * x[:, 1] * (1.0 - x[:, 1])

        box = Box.unit(2)
        result = compile_sct_with_report(tau, box, 8, 1e-2, seed=0)
        assert result.network.width == 2
        points = lattice(box, 8, 33)
        assert np.max(np.abs(result.network.evaluate(points)[:, 1] - tau(points))) < 1e-2
        assert all(error < 1e-2 for error in result.slice_errors)
        assert check_monotone_last(result.network, box, samples=1000, seed=0).ok
