import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advice_exchange.mlp import (BackpropParams, BackpropTrainer, NetworkWeights, backprop_step, forward, gradient,
                                 hidden_activations, init_weights, zero_weights)


def loss(w, x, target):
    return 0.5 * (forward(w, x) - target) ** 2


def numeric_gradient(w, x, target, h=1e-5):
    flat = w.to_flat()
    out = np.empty_like(flat)
    for k in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[k] += h
        down[k] -= h
        out[k] = (loss(NetworkWeights.from_flat(up, w.n_inputs), x, target)
                  - loss(NetworkWeights.from_flat(down, w.n_inputs), x, target)) / (2 * h)
    return out


def max_relative_error(analytic, numeric):
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / scale))


class TestInit:
    @pytest.mark.parametrize("n_inputs", [4, 8])
    def test_range(self, n_inputs):
        flat = init_weights(n_inputs, np.random.default_rng(0)).to_flat()
        assert flat.size == 4 * n_inputs + 4 + 4 + 1
        assert np.all((flat >= -0.5) & (flat <= 0.5))

    def test_same_seed_same_weights(self):
        a = init_weights(4, np.random.default_rng(11))
        b = init_weights(4, np.random.default_rng(11))
        assert a.equals(b)

    def test_sample_mean(self):
        rng = np.random.default_rng(3)
        draws = np.concatenate([init_weights(4, rng).to_flat() for _ in range(400)])[:10_000]
        assert abs(draws.mean()) < 0.02

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            init_weights(5, np.random.default_rng(0))


class TestFlatLayout:
    def test_documented_order(self):
        w = NetworkWeights.from_flat(np.arange(25.0), 4)
        np.testing.assert_array_equal(w.hidden_w, np.arange(16.0).reshape(4, 4))
        np.testing.assert_array_equal(w.hidden_b, [16, 17, 18, 19])
        np.testing.assert_array_equal(w.out_w, [20, 21, 22, 23])
        assert w.out_b == 24.0

    def test_round_trip(self):
        w = init_weights(8, np.random.default_rng(2))
        assert NetworkWeights.from_flat(w.to_flat(), 8).equals(w)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            NetworkWeights.from_flat(np.zeros(24), 4)


class TestForward:
    def test_zero_net(self):
        assert forward(zero_weights(4), [0.1, 0.2, 0.3, 0.4]) == 0.5

    def test_hand_built_single_hidden_unit(self):
        # one live hidden unit: z = 2*x0 - 1, h = 2*sig(z) - 1, y = sig(1.5*h + 0.25)
        w = zero_weights(4)
        w.hidden_w[0, 0] = 2.0
        w.hidden_b[0] = -1.0
        w.out_w[0] = 1.5
        w.out_b = 0.25
        x = [0.7, 0.1, 0.1, 0.1]
        z = 2.0 * 0.7 - 1.0
        h = 2.0 / (1.0 + math.exp(-z)) - 1.0
        expected = 1.0 / (1.0 + math.exp(-(1.5 * h + 0.25)))
        assert forward(w, x) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(zero_weights(4), np.zeros(8))

    @settings(max_examples=200)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8]), st.floats(-5, 5))
    def test_ranges(self, seed, n, scale):
        rng = np.random.default_rng(seed)
        w = NetworkWeights.from_flat(rng.normal(0, 3, 4 * n + 9), n)
        x = rng.random(n) * scale
        assert 0 < forward(w, x) < 1
        h = hidden_activations(w, x)
        assert np.all((h >= -1) & (h <= 1))

    def test_pure(self):
        w = init_weights(4, np.random.default_rng(0))
        x = np.array([0.1, 0.2, 0.3, 0.4])
        before = w.to_flat()
        assert forward(w, x) == forward(w, x)
        np.testing.assert_array_equal(before, w.to_flat())


class TestBackprop:
    def test_zero_error_leaves_weights(self):
        w = init_weights(4, np.random.default_rng(5))
        x = np.array([0.4, 0.1, 0.3, 0.2])
        new = backprop_step(w, x, forward(w, x), BackpropParams(0.05, 0.5))
        assert new.equals(w)

    def test_small_step_descends(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            w = init_weights(4, rng)
            x = rng.dirichlet(np.ones(4))
            t = float(rng.random())
            if abs(forward(w, x) - t) < 1e-6:
                continue
            new = backprop_step(w, x, t, BackpropParams(0.001, 0.0))
            assert loss(new, x, t) < loss(w, x, t)

    @pytest.mark.parametrize("n_inputs", [4, 8])
    def test_finite_differences(self, n_inputs):
        rng = np.random.default_rng(n_inputs)
        for _ in range(100):
            w = init_weights(n_inputs, rng)
            x = rng.random(n_inputs)
            t = float(rng.random())
            err = max_relative_error(gradient(w, x, t).to_flat(), numeric_gradient(w, x, t))
            assert err < 1e-4

    def test_momentum_reuses_previous_update(self):
        w = init_weights(4, np.random.default_rng(1))
        x = np.array([0.25, 0.25, 0.25, 0.25])
        tr = BackpropTrainer(BackpropParams(0.01, 0.5))
        w1 = tr.step(w, x, 1.0)
        first = w1.to_flat() - w.to_flat()
        w2 = tr.step(w1, x, 1.0)
        expected = -0.01 * gradient(w1, x, 1.0).to_flat() + 0.5 * first
        np.testing.assert_allclose(w2.to_flat() - w1.to_flat(), expected, atol=1e-15)

    def test_repeated_steps_reach_target(self):
        w = init_weights(4, np.random.default_rng(4))
        x = np.array([0.6, 0.2, 0.1, 0.1])
        tr = BackpropTrainer(BackpropParams(0.01, 0.5))
        for _ in range(10_000):
            w = tr.step(w, x, 0.85)
            if abs(forward(w, x) - 0.85) < 0.01:
                break
        assert abs(forward(w, x) - 0.85) < 0.01

    def test_rejects_out_of_range_target(self):
        with pytest.raises(ValueError):
            backprop_step(zero_weights(4), np.zeros(4), 1.5, BackpropParams())

    @pytest.mark.parametrize("kw", [dict(learning_rate=0.0), dict(momentum=1.0), dict(momentum=-0.1)])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            BackpropParams(**kw)
