import numpy as np
import pytest

from core.activations import leaky_relu
from core.intervals import Box
from core.tape import ChannelTape


@pytest.fixture
def box():
    return Box.from_intervals([(-1.0, 1.0), (-2.0, 0.5)])


def reference(points, k, beta):
    expected = points.copy()
    expected[:, k] = leaky_relu(beta, points[:, k])
    return expected


class TestActivate:

    @pytest.mark.parametrize("mode,width", [("leaky", 2), ("relu", 3)])
    def test_single_channel_activation(self, box, mode, width):
        net = ChannelTape(box, mode).activate(0, 0.5).activate(1, 3.0).network()
        points = box.grid(11)
        expected = reference(reference(points, 0, 0.5), 1, 3.0)
        assert net.width == width
        assert net.depth == 2
        assert np.allclose(net.evaluate(points), expected, atol=1e-12)

    def test_box_tracks_activation(self, box):
        tape = ChannelTape(box).activate(1, 0.25)
        assert tape.box.lo[1] == pytest.approx(-0.5)
        assert tape.box.hi[1] == pytest.approx(0.5)
        assert tape.box.lo[0] == -1.0

    def test_unit_slope_emits_nothing(self, box):
        assert ChannelTape(box).activate(0, 1.0).depth == 0

    @pytest.mark.parametrize("beta", [0.0, -1.0, float("inf")])
    def test_bad_slope(self, box, beta):
        with pytest.raises(ValueError):
            ChannelTape(box).activate(0, beta)


class TestAffineOperations:

    def test_scale_channel_folds_into_pending_map(self, box):
        tape = ChannelTape(box).scale_channel(1, -2.0, 1.0)
        net = tape.network()
        assert net.depth == 0
        points = box.grid(5)
        assert np.allclose(net.evaluate(points)[:, 1], -2.0 * points[:, 1] + 1.0)
        assert tape.box.lo[1] == pytest.approx(0.0)
        assert tape.box.hi[1] == pytest.approx(5.0)

    def test_scale_then_activate(self, box):
        net = ChannelTape(box).scale_channel(0, 3.0, -1.0).activate(0, 0.1).network()
        points = box.grid(9)
        shifted = points.copy()
        shifted[:, 0] = 3.0 * points[:, 0] - 1.0
        assert np.allclose(net.evaluate(points), reference(shifted, 0, 0.1), atol=1e-12)


class TestResume:

    def test_resume_continues_the_network(self, box):
        first = ChannelTape(box).activate(0, 0.5)
        resumed = ChannelTape.resume(first.network(), first.box).activate(1, 2.0)
        points = box.grid(7)
        expected = reference(reference(points, 0, 0.5), 1, 2.0)
        net = resumed.network()
        assert net.depth == 2
        assert np.allclose(net.evaluate(points), expected, atol=1e-12)


class TestConstruction:

    def test_unknown_mode(self, box):
        with pytest.raises(ValueError):
            ChannelTape(box, "sigmoid")

    def test_unbounded_box(self):
        with pytest.raises(ValueError):
            ChannelTape(Box.from_intervals([(0.0, np.inf)]))
