import numpy as np
import pytest

from compilers.ridge import RidgeSum, RidgeTerm, fit_profile, fit_ridge, fit_ridge_best_effort, ridge_from_pwl
from core.activations import register_activation
from core.errors import RidgeFitError
from core.intervals import Box


@pytest.fixture
def two_terms():
    return RidgeSum((RidgeTerm(1.5, (1.0, -2.0), 0.3, 0.1), RidgeTerm(-0.5, (0.5, 0.5), -0.2, 0.5)), 0.25)


class TestRidgeSum:

    def test_evaluate_matches_formula(self, two_terms):
        x = np.array([[0.2, 0.7], [0.9, 0.1]])
        u1 = x @ np.array([1.0, -2.0]) + 0.3
        u2 = x @ np.array([0.5, 0.5]) - 0.2
        lr = lambda beta, u: np.where(u >= 0, u, beta * u)
        want = 0.25 + 1.5 * lr(0.1, u1) - 0.5 * lr(0.5, u2)
        assert np.allclose(two_terms(x), want)
        assert np.isclose(two_terms.evaluate(x[0]), want[0])

    def test_interval_is_sound(self, two_terms):
        box = Box.from_intervals([(-1.0, 1.0), (0.0, 2.0)])
        lo, hi = two_terms.interval(box)
        values = two_terms(box.sample(2000, np.random.default_rng(0)))
        assert lo <= values.min() and values.max() <= hi

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ValueError):
            RidgeSum((RidgeTerm(1.0, (1.0,), 0.0), RidgeTerm(1.0, (1.0, 2.0), 0.0)))

    def test_negated(self, two_terms):
        x = np.random.default_rng(1).normal(size=(10, 2))
        assert np.allclose(two_terms.negated()(x), -two_terms(x))

    def test_empty_sum_is_constant(self):
        assert np.allclose(RidgeSum((), 2.0)(np.zeros((3, 0))), [2.0, 2.0, 2.0])

    def test_sigma_ridge_sum(self):
        t = RidgeSum((RidgeTerm(2.0, (1.0,), 0.5),), 0.0, activation='tanh')
        assert np.isclose(t(np.array([[0.25]]))[0], 2.0 * np.tanh(0.75))


class TestFitRidge:

    def test_recovers_own_terms(self, two_terms):
        box = Box.unit(2)
        fit = fit_ridge(two_terms, box, max_terms=8, tol=1e-9, seed=0)
        grid = box.grid(21)
        assert np.max(np.abs(fit(grid) - two_terms(grid))) < 1e-9
        assert fit.fit_error is not None and fit.fit_error <= 1e-9

    def test_smooth_target(self):
        box = Box.unit(1)
        fit = fit_ridge(lambda p: np.sin(3 * p[:, 0]), box, max_terms=128, tol=1e-3, seed=0)
        xs = np.linspace(0, 1, 1001)[:, None]
        assert np.max(np.abs(fit(xs) - np.sin(3 * xs[:, 0]))) < 2e-3
        assert fit.seed == 0

    def test_deterministic_for_seed(self):
        box = Box.unit(2)
        target = lambda p: np.exp(p[:, 0]) * np.cos(p[:, 1])
        first = fit_ridge_best_effort(target, box, 1e-3, max_terms=32, seed=5)
        second = fit_ridge_best_effort(target, box, 1e-3, max_terms=32, seed=5)
        assert first == second

    def test_failure_carries_best_fit(self):
        box = Box.unit(2)
        target = lambda p: np.sin(40 * p[:, 0]) * np.cos(40 * p[:, 1])
        with pytest.raises(RidgeFitError) as exc:
            fit_ridge(target, box, max_terms=4, tol=1e-6, seed=0)
        assert isinstance(exc.value.best, RidgeSum)
        assert exc.value.best_error > 1e-6
        assert isinstance(fit_ridge_best_effort(target, box, 1e-6, max_terms=4, seed=0), RidgeSum)

    def test_constant_on_empty_box(self):
        fit = fit_ridge(lambda p: np.full(p.shape[0], 3.5), Box.unit(0))
        assert fit.terms == () and fit.constant == 3.5

    def test_sampled_interval_is_sound_for_non_monotone_activation(self):
        centre, width = 1.0 / 256.0, 0.01
        register_activation('narrow_bump', lambda z: np.exp(-((np.asarray(z) - centre) / width) ** 2),
                            increasing=False)
        t = RidgeSum((RidgeTerm(2.0, (1.0,), 0.0),), 0.0, activation='narrow_bump')
        lo, hi = t.interval(Box([-1.0], [1.0]))
        dense = t(np.linspace(-1.0, 1.0, 100001)[:, None])
        assert lo <= dense.min() and dense.max() <= hi


class TestProfiles:

    def test_ridge_from_pwl_reproduces_interpolant(self):
        knots = [-1.0, -0.2, 0.5, 2.0]
        values = [0.3, -1.0, 2.0, 1.5]
        ridge = ridge_from_pwl(knots, values, (1.0, 2.0), 0.1)
        assert ridge.activation is None
        p = Box.from_intervals([(-0.5, 0.5), (-0.3, 0.3)]).grid(41)
        u = p @ np.array([1.0, 2.0]) + 0.1
        assert np.max(np.abs(ridge(p) - np.interp(u, knots, values))) < 1e-12

    def test_ridge_from_pwl_checks_inputs(self):
        with pytest.raises(ValueError):
            ridge_from_pwl([0.0, 1.0], [0.0, 1.0], (1.0,), 0.0, beta=1.0)
        with pytest.raises(ValueError):
            ridge_from_pwl([1.0, 0.0], [0.0, 1.0], (1.0,), 0.0)

    def test_kinked_profile_fits_better_with_kink_features(self):
        relu = lambda u: np.maximum(u, 0.0)
        graded = fit_profile(relu, -1.0, 1.0, 1e-6, 'tanh', seed=0, kinks=(0.0,))
        plain = fit_profile(relu, -1.0, 1.0, 1e-6, 'tanh', seed=0)
        assert graded.fit_error < plain.fit_error
        assert graded.fit_error < 1e-2
        xs = np.linspace(-1.0, 1.0, 4001)[:, None]
        assert np.max(np.abs(graded(xs) - relu(xs[:, 0]))) < 2e-2

    def test_degenerate_range_is_constant(self):
        fit = fit_profile(np.exp, 0.5, 0.5, 1e-6, 'tanh')
        assert fit.terms == ()
        assert fit.constant == pytest.approx(np.exp(0.5))
        assert fit.fit_error == 0.0
