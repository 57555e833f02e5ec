from fractions import Fraction

import numpy as np
import pytest

from terrawind import Conditioning, Field2D, NormStats, forward_sample, iterated_forward, make_linear_schedule
from terrawind import reverse_step, sample, training_loss
from terrawind.exceptions import InvalidSchedule, ShapeMismatch, StepOutOfRange


class GaussianOracle:
    """Exact noise predictor for data drawn i.i.d. from N(mean, std**2) per pixel."""

    norm_stats = NormStats()
    use_terrain = False

    def __init__(self, sched, mean, std):
        self.sched = sched
        self.mean = mean
        self.var = std**2

    def predict_noise(self, xt, cond, t):
        ab = self.sched.alpha_bar[t - 1]
        return np.sqrt(1 - ab) * (xt - np.sqrt(ab) * self.mean) / (ab * self.var + 1 - ab)


def exact_alpha_bar(beta):
    """Cumulative product of (1 - beta) in exact rational arithmetic."""
    product = Fraction(1)
    out = []
    for b in beta:
        product *= 1 - Fraction(float(b))
        out.append(float(product))
    return np.array(out)


def returns(values):
    return lambda xt, cond, t: np.array(values, dtype=np.float64)


def zero_cond(shape):
    return Conditioning(np.zeros(shape))


class TestSchedule:
    def test_linear_schedule(self):
        sched = make_linear_schedule(10)
        assert sched.T == 10
        assert sched.beta[0] == pytest.approx(1e-4)
        assert sched.beta[-1] == pytest.approx(0.02)
        np.testing.assert_allclose(sched.alpha_bar, np.cumprod(1 - sched.beta))
        assert np.all(np.diff(sched.alpha_bar) < 0)
        assert sched.posterior_var[0] == 0.0
        assert np.all(sched.posterior_var[1:] < sched.beta[1:])

    def test_four_step_values(self):
        sched = make_linear_schedule(4, 0.1, 0.4)
        np.testing.assert_allclose(sched.beta, [0.1, 0.2, 0.3, 0.4], atol=1e-12)
        np.testing.assert_allclose(sched.alpha_bar, [0.9, 0.72, 0.504, 0.3024], atol=1e-12)

    def test_constant_beta(self):
        sched = make_linear_schedule(2, 0.5, 0.5)
        np.testing.assert_allclose(sched.alpha_bar, [0.5, 0.25], atol=1e-12)
        assert sched.posterior_var[1] == pytest.approx(0.5 * 0.5 / 0.75)

    def test_long_schedule_matches_exact_product(self):
        sched = make_linear_schedule(1000, 1e-4, 0.02)
        assert sched.alpha_bar[-1] < 0.001
        np.testing.assert_allclose(sched.alpha_bar, exact_alpha_bar(sched.beta), rtol=1e-10, atol=0)

    def test_arrays_are_read_only(self):
        sched = make_linear_schedule(5)
        with pytest.raises(ValueError):
            sched.beta[0] = 0.5

    @pytest.mark.parametrize("T,start,end", [(1, 1e-4, 0.02), (10, 0.0, 0.02), (10, 0.03, 0.02), (10, 1e-4, 1.0)])
    def test_invalid(self, T, start, end):
        with pytest.raises(InvalidSchedule):
            make_linear_schedule(T, start, end)

    @pytest.mark.parametrize("t", [0, 11])
    def test_step_range(self, tiny_schedule, t):
        with pytest.raises(StepOutOfRange):
            forward_sample(np.zeros((2, 2)), t, np.zeros((2, 2)), tiny_schedule)


class TestForward:
    def test_closed_form(self, tiny_schedule):
        x0 = np.full((3, 3), 2.0)
        eps = np.ones((3, 3))
        ab = tiny_schedule.alpha_bar[4]
        out = forward_sample(x0, 5, eps, tiny_schedule)
        np.testing.assert_allclose(out, np.sqrt(ab) * 2.0 + np.sqrt(1 - ab))

    def test_field_in_field_out(self, tiny_schedule):
        x0 = Field2D(np.ones((2, 2)), 3.0)
        out = forward_sample(x0, 1, np.zeros((2, 2)), tiny_schedule)
        assert isinstance(out, Field2D) and out.cell_size_km == 3.0

    def test_per_sample_steps(self, tiny_schedule):
        x0 = np.ones((2, 4, 4))
        eps = np.zeros((2, 4, 4))
        out = forward_sample(x0, np.array([1, 10]), eps, tiny_schedule)
        assert out[0, 0, 0] == pytest.approx(np.sqrt(tiny_schedule.alpha_bar[0]))
        assert out[1, 0, 0] == pytest.approx(np.sqrt(tiny_schedule.alpha_bar[9]))

    def test_per_pixel_moments(self):
        sched = make_linear_schedule(4, 0.1, 0.4)
        n = 100_000
        x0 = np.array([[1.5, -2.0], [0.0, 4.0]])
        eps = np.random.default_rng(7).standard_normal((n, 2, 2))
        xt = forward_sample(np.broadcast_to(x0, eps.shape), 2, eps, sched)
        assert sched.alpha_bar[1] == pytest.approx(0.72)
        tolerance = 3 * np.sqrt(0.28) / np.sqrt(n)
        assert np.all(np.abs(xt.mean(axis=0) - np.sqrt(0.72) * x0) <= tolerance)
        np.testing.assert_allclose(xt.var(axis=0), 0.28, rtol=0.05)

    def test_eps_shape_mismatch(self, tiny_schedule):
        with pytest.raises(ShapeMismatch):
            forward_sample(np.zeros((2, 2)), 1, np.zeros((3, 3)), tiny_schedule)

    def test_iterated_with_injected_noise(self, tiny_schedule):
        x0 = np.full((2, 2), 1.0)
        draws = [np.full((2, 2), 0.5)] * 3
        expected = x0
        for s in range(3):
            beta = tiny_schedule.beta[s]
            expected = np.sqrt(1 - beta) * expected + np.sqrt(beta) * 0.5
        np.testing.assert_allclose(iterated_forward(x0, 3, draws, tiny_schedule), expected)

    def test_iterated_matches_closed_form_marginal(self):
        sched = make_linear_schedule(10)
        x0 = np.full(100_000, 1.5)
        xt = iterated_forward(x0, 10, np.random.default_rng(0), sched)
        ab = sched.alpha_bar[9]
        assert xt.mean() == pytest.approx(np.sqrt(ab) * 1.5, rel=0.02)
        assert xt.var() == pytest.approx(1 - ab, rel=0.02)


class TestReverse:
    def test_mean_with_zero_prediction(self, stub_predictor, tiny_schedule):
        xt = np.full((4, 4), 2.0)
        out = reverse_step(stub_predictor, xt, 5, zero_cond((4, 4)), None, tiny_schedule)
        np.testing.assert_allclose(out, 2.0 / np.sqrt(1 - tiny_schedule.beta[4]))

    def test_noise_scaled_by_posterior_std(self, stub_predictor, tiny_schedule):
        xt = np.zeros((4, 4))
        z = np.ones((4, 4))
        out = reverse_step(stub_predictor, xt, 5, zero_cond((4, 4)), z, tiny_schedule)
        np.testing.assert_allclose(out, np.sqrt(tiny_schedule.posterior_var[4]))

    @pytest.mark.parametrize("T,start,end", [(4, 0.1, 0.4), (1000, 1e-4, 0.02)])
    def test_first_step_inverts_forward_noise(self, stub_predictor, rng, T, start, end):
        sched = make_linear_schedule(T, start, end)
        x0 = rng.uniform(-3, 3, size=(6, 6))
        eps = rng.standard_normal((6, 6))
        xt = forward_sample(x0, 1, eps, sched)
        stub_predictor.predict_noise.side_effect = returns(eps)
        np.testing.assert_allclose(reverse_step(stub_predictor, xt, 1, zero_cond((6, 6)), None, sched), x0, atol=1e-13)

    def test_constant_prediction_matches_hand_formula(self, stub_predictor, rng):
        sched = make_linear_schedule(4, 0.1, 0.4)
        stub_predictor.predict_noise.side_effect = returns(np.full((3, 3), 0.25))
        xt = rng.standard_normal((3, 3))
        z = rng.standard_normal((3, 3))
        # t = 3: beta 0.3, alpha_bar 0.9 * 0.8 * 0.7 = 0.504, previous alpha_bar 0.72
        mu = (xt - 0.3 / np.sqrt(1 - 0.504) * 0.25) / np.sqrt(0.7)
        sigma = np.sqrt(0.3 * (1 - 0.72) / (1 - 0.504))
        np.testing.assert_allclose(reverse_step(stub_predictor, xt, 3, zero_cond((3, 3)), None, sched), mu, atol=1e-12)
        np.testing.assert_allclose(
            reverse_step(stub_predictor, xt, 3, zero_cond((3, 3)), z, sched), mu + sigma * z, atol=1e-12
        )


class TestTrainingLoss:
    def test_zero_predictor(self, stub_predictor, tiny_schedule, rng):
        eps = rng.standard_normal((8, 8))
        loss = training_loss(stub_predictor, np.zeros((8, 8)), zero_cond((8, 8)), 3, eps, tiny_schedule)
        assert loss == pytest.approx(np.mean(eps**2))
        stub_predictor.predict_noise.assert_called_once()

    def test_unit_noise_costs_one(self, stub_predictor, tiny_schedule, rng):
        eps = rng.choice([-1.0, 1.0], size=(8, 8))
        assert training_loss(stub_predictor, rng.uniform(size=(8, 8)), zero_cond((8, 8)), 4, eps, tiny_schedule) == 1.0

    def test_exact_prediction_costs_nothing(self, stub_predictor, tiny_schedule, rng):
        eps = rng.standard_normal((8, 8))
        stub_predictor.predict_noise.side_effect = returns(eps)
        assert training_loss(stub_predictor, rng.uniform(size=(8, 8)), zero_cond((8, 8)), 7, eps, tiny_schedule) == 0.0

    def test_matches_elementwise_oracle(self, tiny_model, tiny_schedule, rng):
        x0 = rng.standard_normal((8, 8))
        eps = rng.standard_normal((8, 8))
        cond = Conditioning(rng.standard_normal((8, 8)), rng.standard_normal((8, 8)))
        ab = tiny_schedule.alpha_bar[5]
        predicted = tiny_model.predict_noise(np.sqrt(ab) * x0 + np.sqrt(1 - ab) * eps, cond, 6)
        squared = [(eps[i, j] - predicted[i, j]) ** 2 for i in range(8) for j in range(8)]
        expected = sum(squared) / len(squared)
        assert training_loss(tiny_model, x0, cond, 6, eps, tiny_schedule) == pytest.approx(expected, abs=1e-10)


class TestSample:
    def test_reproducible_per_patch(self, stub_predictor, tiny_schedule):
        cond = Conditioning(np.zeros((8, 8)), cell_size_km=0.5)
        first = sample(stub_predictor, cond, tiny_schedule, seed=4, patch_id=1)
        again = sample(stub_predictor, cond, tiny_schedule, seed=4, patch_id=1)
        other = sample(stub_predictor, cond, tiny_schedule, seed=4, patch_id=2)
        np.testing.assert_array_equal(first.values, again.values)
        assert not np.array_equal(first.values, other.values)
        assert first.cell_size_km == 0.5
        assert first.values.min() >= 0.0
        assert stub_predictor.predict_noise.call_count == 3 * tiny_schedule.T

    def test_denormalizes_with_model_stats(self, stub_predictor, tiny_schedule):
        stub_predictor.norm_stats = NormStats(wind_mean=100.0, wind_std=0.001)
        out = sample(stub_predictor, Conditioning(np.zeros((4, 4))), tiny_schedule, seed=0)
        np.testing.assert_allclose(out.values, 100.0, atol=0.1)

    def test_gaussian_toy_problem(self):
        sched = make_linear_schedule(1000)
        oracle = GaussianOracle(sched, mean=5.0, std=1.0)
        out = sample(oracle, zero_cond((100, 100)), sched, seed=0)
        assert out.values.mean() == pytest.approx(5.0, rel=0.05)
        assert out.values.var() == pytest.approx(1.0, rel=0.05)
