import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    highprec_xent,
    naive_conv,
    scalar_adam,
    scalar_batchnorm_eval,
    scalar_batchnorm_train,
)
from questkit import nn
from questkit.errors import NumericError


# ---------------------------------------------------------------------------
# convolution

class TestConv:
    def test_output_length(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(1, 1, 10, 4))
        w = rng.normal(size=(3, 1, 3, 4))
        out = nn.conv_raw(x, w, np.zeros(3))
        assert out.shape == (1, 3, 8)

    def test_hand_arithmetic_all_ones(self):
        # single channel, all-one weights and input, n=3, h=3, k=2 -> 6
        filt = nn.ConvFilter(window=3, weights=np.ones((1, 3, 2)), bias=0.0)
        out = nn.conv_forward([np.ones((3, 2))], filt)
        npt.assert_allclose(out, [6.0])

    def test_matches_naive_oracle_two_channels(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            n, h, k, t = 7, 3, 4, 2
            chans = [rng.normal(size=(n, k)) for _ in range(2)]
            w = rng.normal(size=(t, 2, h, k))
            b = rng.normal(size=t)
            expected = naive_conv(chans, w, b)
            got = nn.conv_raw(np.stack(chans)[None], w, b)[0]
            npt.assert_allclose(got, expected, atol=1e-12, rtol=0)

    def test_window_longer_than_input_raises(self):
        with pytest.raises(NumericError):
            nn.conv_raw(np.zeros((1, 1, 2, 3)), np.zeros((1, 1, 5, 3)),
                        np.zeros(1))

    def test_filter_weight_shape_validated(self):
        with pytest.raises(NumericError):
            nn.ConvFilter(window=3, weights=np.ones((1, 2, 4)))

    def test_channel_count_mismatch_raises(self):
        with pytest.raises(NumericError):
            nn.conv_raw(np.zeros((1, 2, 5, 3)), np.zeros((1, 1, 2, 3)),
                        np.zeros(1))

    def test_channel_additivity_bias_once(self):
        # conv over C channels = sum of per-channel raw convs + bias once
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 3, 8, 5))
        w = rng.normal(size=(4, 3, 2, 5))
        b = rng.normal(size=4)
        combined = nn.conv_raw(x, w, b)
        summed = np.zeros_like(combined)
        for c in range(3):
            summed += nn.conv_raw(x[:, c:c + 1], w[:, c:c + 1], np.zeros(4))
        summed += b[None, :, None]
        npt.assert_allclose(combined, summed, atol=1e-12)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(2, 2, 6, 3))
        w = rng.normal(size=(2, 2, 3, 3))
        b = rng.normal(size=2)
        target = rng.normal(size=(2, 2, 4))

        def loss():
            return 0.5 * float(((nn.conv_raw(x, w, b) - target) ** 2).sum())

        grad_out = nn.conv_raw(x, w, b) - target
        dx, dw, db = nn.conv_backward(grad_out, x, w)
        step = 1e-6
        for arr, grad in ((x, dx), (w, dw), (b, db)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + step
                plus = loss()
                arr[ix] = orig - step
                minus = loss()
                arr[ix] = orig
                npt.assert_allclose(grad[ix], (plus - minus) / (2 * step),
                                    atol=1e-4)


# ---------------------------------------------------------------------------
# max pooling

class TestMaxPool:
    def test_simple(self):
        assert nn.maxpool_time(np.array([1.0, 5.0, 3.0])) == 5.0

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            fm = rng.normal(size=rng.integers(1, 30))
            assert nn.maxpool_time(fm) == max(float(v) for v in fm)

    def test_tie_routes_gradient_to_first_index(self):
        maps = np.array([[[2.0, 2.0, 2.0]]])
        vals, idx = nn.maxpool_batch(maps)
        assert vals[0, 0] == 2.0
        grad = nn.maxpool_backward(np.array([[1.0]]), maps.shape, idx)
        npt.assert_allclose(grad, [[[1.0, 0.0, 0.0]]])

    def test_empty_map_raises(self):
        with pytest.raises(NumericError):
            nn.maxpool_time(np.array([]))


# ---------------------------------------------------------------------------
# dense / softmax cross-entropy

class TestSoftmaxXent:
    def test_uniform_logits_loss_is_ln3(self):
        loss, _ = nn.softmax_xent(np.zeros(3), 0)
        npt.assert_allclose(loss, math.log(3.0), rtol=1e-12)

    def test_huge_margin_loss_tends_to_zero(self):
        loss, _ = nn.softmax_xent(np.array([100.0, 0.0, 0.0]), 0)
        assert loss < 1e-40

    def test_matches_highprecision_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            logits = rng.normal(scale=3.0, size=4)
            label = int(rng.integers(4))
            loss, _ = nn.softmax_xent(logits, label)
            npt.assert_allclose(loss, highprec_xent(logits, label),
                                rtol=1e-10, atol=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(NumericError):
            nn.softmax_xent(np.zeros(3), 3)

    def test_gradient_is_probs_minus_onehot(self):
        logits = np.array([[1.0, 2.0, 0.5]])
        _, grad = nn.softmax_xent(logits, np.array([1]))
        probs = nn.softmax(logits)
        expected = probs.copy()
        expected[0, 1] -= 1.0
        npt.assert_allclose(grad, expected, atol=1e-14)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
    def test_softmax_sums_to_one(self, logits):
        p = nn.softmax(np.array(logits))
        assert abs(p.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# dropout

class TestDropout:
    def test_rate_zero_is_identity(self):
        x = np.arange(12.0).reshape(3, 4)
        out, mask = nn.dropout(x, 0.0, training=True,
                               rng=np.random.default_rng(0))
        npt.assert_array_equal(out, x)
        assert mask is None
        out, _ = nn.dropout(x, 0.5, training=False)
        npt.assert_array_equal(out, x)

    def test_rate_one_rejected(self):
        with pytest.raises(NumericError):
            nn.dropout(np.zeros(3), 1.0, training=True,
                       rng=np.random.default_rng(0))

    def test_embedding_dropout_zeroes_rows_across_channels(self):
        rng = np.random.default_rng(12)
        x = np.ones((1, 3, 4, 5))
        out, mask = nn.embedding_dropout(x, 0.5, training=True, rng=rng)
        assert mask.shape == (1, 4)
        for pos in range(4):
            if mask[0, pos] == 0.0:
                npt.assert_array_equal(out[0, :, pos, :], 0.0)
            else:
                npt.assert_allclose(out[0, :, pos, :], 2.0)

    def test_embedding_dropout_rate_one_rejected(self):
        with pytest.raises(NumericError):
            nn.embedding_dropout(np.zeros((1, 1, 2, 2)), 1.0, training=True,
                                 rng=np.random.default_rng(0))

    def test_training_mode_without_generator_rejected(self):
        with pytest.raises(NumericError):
            nn.dropout(np.zeros(3), 0.5, training=True)

    def test_monte_carlo_expectation(self):
        rng = np.random.default_rng(99)
        x = np.full((1, 2, 3, 2), 4.0)
        total = np.zeros_like(x)
        n = 100_000
        for _ in range(n):
            out, _ = nn.embedding_dropout(x, 0.3, training=True, rng=rng)
            total += out
        npt.assert_allclose(total / n, x, rtol=0.02)


# ---------------------------------------------------------------------------
# batch norm

class TestBatchNorm:
    def test_definitional_mean_and_variance(self):
        rng = np.random.default_rng(2)
        x = rng.normal(loc=3.0, scale=2.0, size=(64, 5))
        state = nn.BatchNormState.create(5, eps=1e-12)
        out, _ = nn.batchnorm_forward(x, state, training=True)
        npt.assert_allclose(out.mean(axis=0), 0.0, atol=1e-10)
        npt.assert_allclose(out.var(axis=0), 1.0, atol=1e-6)

    def test_scale_shift(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(16, 4))
        state = nn.BatchNormState.create(4)
        base, _ = nn.batchnorm_forward(x, state, training=True,
                                       update_running=False)
        state.gamma[...] = 2.0
        state.beta[...] = 3.0
        out, _ = nn.batchnorm_forward(x, state, training=True,
                                      update_running=False)
        npt.assert_allclose(out, 2.0 * base + 3.0, atol=1e-12)

    def test_training_matches_scalar_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            x = rng.normal(size=(rng.integers(2, 10), 3))
            state = nn.BatchNormState.create(3)
            state.gamma[...] = rng.normal(size=3)
            state.beta[...] = rng.normal(size=3)
            out, _ = nn.batchnorm_forward(x, state, training=True,
                                          update_running=False)
            expected = scalar_batchnorm_train(x, state.gamma, state.beta,
                                              state.eps)
            npt.assert_allclose(out, expected, atol=1e-10)

    def test_eval_matches_hand_formula(self):
        rng = np.random.default_rng(5)
        state = nn.BatchNormState.create(3)
        state.gamma[...] = rng.normal(size=3)
        state.beta[...] = rng.normal(size=3)
        state.running_mean = rng.normal(size=3)
        state.running_var = rng.uniform(0.5, 2.0, size=3)
        x = rng.normal(size=(7, 3))
        out, cache = nn.batchnorm_forward(x, state, training=False)
        assert cache is None
        expected = scalar_batchnorm_eval(
            x, state.gamma, state.beta, state.running_mean,
            state.running_var, state.eps,
        )
        npt.assert_allclose(out, expected, atol=1e-12)

    def test_batch_of_one_raises_in_training(self):
        state = nn.BatchNormState.create(3)
        with pytest.raises(NumericError):
            nn.batchnorm_forward(np.zeros((1, 3)), state, training=True)

    def test_spatial_normalizes_per_filter_over_batch_and_time(self):
        rng = np.random.default_rng(6)
        x = rng.normal(loc=5.0, size=(4, 3, 10))
        state = nn.BatchNormState.create(3, eps=1e-12)
        out, _ = nn.spatial_batchnorm_forward(x, state, training=True)
        # each filter's values, pooled over batch x time, are standardized
        npt.assert_allclose(out.transpose(1, 0, 2).reshape(3, -1).mean(axis=1),
                            0.0, atol=1e-10)
        npt.assert_allclose(out.transpose(1, 0, 2).reshape(3, -1).var(axis=1),
                            1.0, atol=1e-6)

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(6, 3))
        state = nn.BatchNormState.create(3)
        state.gamma[...] = rng.normal(size=3)
        target = rng.normal(size=(6, 3))

        def loss():
            out, _ = nn.batchnorm_forward(x, state, training=True,
                                          update_running=False)
            return 0.5 * float(((out - target) ** 2).sum())

        out, cache = nn.batchnorm_forward(x, state, training=True,
                                          update_running=False)
        dx, dgamma, dbeta = nn.batchnorm_backward(out - target, cache)
        step = 1e-6
        for arr, grad in ((x, dx), (state.gamma, dgamma), (state.beta, dbeta)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + step
                plus = loss()
                arr[ix] = orig - step
                minus = loss()
                arr[ix] = orig
                npt.assert_allclose(grad[ix], (plus - minus) / (2 * step),
                                    atol=1e-5)


# ---------------------------------------------------------------------------
# Adam

class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        p = {"w": np.array([1.0, -2.0, 3.0])}
        state = nn.AdamState(lr=0.1)
        nn.adam_step(p, {"w": np.zeros(3)}, state)
        npt.assert_array_equal(p["w"], [1.0, -2.0, 3.0])

    def test_first_step_magnitude_is_lr_times_sign(self):
        # at t=1, m_hat / sqrt(v_hat) = g/|g| exactly, so the update is
        # lr * sign(g) up to the eps in the denominator
        g = np.array([0.05, -3.0, 7.5])
        p = {"w": np.zeros(3)}
        state = nn.AdamState(lr=0.01)
        nn.adam_step(p, {"w": g.copy()}, state)
        npt.assert_allclose(p["w"], -0.01 * np.sign(g), rtol=1e-6)

    def test_two_steps_match_scalar_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            p0 = rng.normal(size=4)
            g1, g2 = rng.normal(size=4), rng.normal(size=4)
            p = {"w": p0.copy()}
            state = nn.AdamState(lr=0.05)
            nn.adam_step(p, {"w": g1}, state)
            nn.adam_step(p, {"w": g2}, state)
            expected = scalar_adam(p0, [g1, g2], lr=0.05)
            npt.assert_allclose(p["w"], expected, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        state = nn.AdamState()
        with pytest.raises(NumericError):
            nn.adam_step({"w": np.zeros(3)}, {"w": np.zeros(4)}, state)


# ---------------------------------------------------------------------------
# gradient checker

class TestGradCheck:
    def test_linear_model_is_exact(self):
        x = np.array([1.5, -2.0, 0.5])
        w = np.array([0.3, 0.7, -1.2])

        def closure():
            return float(w @ x), {"w": x.copy()}

        errs = nn.grad_check(closure, {"w": w})
        assert errs["w"] <= 1e-9

    def test_corrupted_backward_is_caught(self):
        x = np.array([1.5, -2.0, 0.5])
        w = np.array([0.3, 0.7, -1.2])

        def closure():
            return float(w @ x), {"w": x + 0.5}  # deliberately wrong

        errs = nn.grad_check(closure, {"w": w})
        assert errs["w"] > 1e-2

    def test_nonfinite_loss_raises(self):
        def closure():
            return float("nan"), {"w": np.zeros(1)}

        with pytest.raises(NumericError):
            nn.grad_check(closure, {"w": np.zeros(1)})


@settings(max_examples=25)
@given(st.integers(1, 64), st.integers(1, 64))
def test_feature_map_length_property(n, h):
    if h > n:
        return
    x = np.zeros((1, 1, n, 2))
    w = np.zeros((1, 1, h, 2))
    out = nn.conv_raw(x, w, np.zeros(1))
    assert out.shape[-1] == n - h + 1
