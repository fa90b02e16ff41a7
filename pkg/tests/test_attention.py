import numpy as np
import pytest

from bilinear_retrieval import attention as att
from bilinear_retrieval import autodiff as ad
from bilinear_retrieval.errors import ConfigError, ShapeError

from oracles import numeric_grad


def make_params(c_a=6, c_l=4, seed=0, **kwargs):
    # explicit bottleneck: the size-1 default for tiny channel counts can
    # leave the single hidden relu dead, which makes sensitivity tests moot
    kwargs.setdefault("k_a", 3)
    kwargs.setdefault("k_l", 3)
    return att.init_co_attention(c_a, c_l, seed=seed, **kwargs)


class TestWeights:
    def test_zero_maps_give_half(self):
        params = make_params()
        alpha_a, alpha_l = att.co_attention_weights(
            np.zeros((6, 4, 4)), np.zeros((4, 8, 8)), params
        )
        np.testing.assert_allclose(alpha_a, np.full(6, 0.5), atol=1e-12)
        np.testing.assert_allclose(alpha_l, np.full(4, 0.5), atol=1e-12)

    def test_softmax_zero_maps_uniform(self):
        params = make_params(c_a=4, weight_mode="softmax")
        alpha_a, _ = att.co_attention_weights(np.zeros((4, 2, 2)), np.zeros((4, 2, 2)), params)
        np.testing.assert_allclose(alpha_a, np.full(4, 0.25), atol=1e-12)

    def test_sigmoid_weights_open_interval(self):
        rng = np.random.default_rng(1)
        params = make_params(seed=3)
        alpha_a, alpha_l = att.co_attention_weights(
            rng.standard_normal((6, 4, 4)), rng.standard_normal((4, 8, 8)), params
        )
        for alpha in (alpha_a, alpha_l):
            assert np.all(alpha > 0) and np.all(alpha < 1)

    def test_softmax_weights_sum_to_one_per_branch(self):
        rng = np.random.default_rng(2)
        params = make_params(weight_mode="softmax", seed=4)
        alpha_a, alpha_l = att.co_attention_weights(
            rng.standard_normal((6, 4, 4)), rng.standard_normal((4, 8, 8)), params
        )
        assert alpha_a.sum() == pytest.approx(1.0, abs=1e-12)
        assert alpha_l.sum() == pytest.approx(1.0, abs=1e-12)

    def test_joint_mode_reacts_to_other_branch(self):
        rng = np.random.default_rng(3)
        params = make_params(seed=5)
        va = rng.standard_normal((6, 4, 4))
        vl = rng.standard_normal((4, 8, 8))
        base_a, _ = att.co_attention_weights(va, vl, params)
        moved_a, _ = att.co_attention_weights(va, vl + 0.5, params)
        assert np.abs(base_a - moved_a).max() > 1e-9

    def test_separate_mode_ignores_other_branch(self):
        rng = np.random.default_rng(4)
        params = make_params(guidance_mode="separate", seed=6)
        va = rng.standard_normal((6, 4, 4))
        vl = rng.standard_normal((4, 8, 8))
        base_a, base_l = att.co_attention_weights(va, vl, params)
        moved_a, moved_l = att.co_attention_weights(va, vl + 1.0, params)
        np.testing.assert_array_equal(base_a, moved_a)  # exact invariance
        assert np.abs(base_l - moved_l).max() > 1e-9

    def test_shape_mismatch(self):
        params = make_params()
        with pytest.raises(ShapeError):
            att.co_attention_weights(np.zeros((5, 4, 4)), np.zeros((4, 4, 4)), params)

    def test_bad_modes_rejected(self):
        with pytest.raises(ConfigError):
            make_params(weight_mode="tanh")
        with pytest.raises(ConfigError):
            make_params(guidance_mode="both")

    def test_default_bottleneck(self):
        assert att.default_bottleneck(64, 32) == 6
        assert att.default_bottleneck(1, 1) == 1


class TestApplyWeights:
    def test_ones_identity(self):
        v = np.random.default_rng(5).standard_normal((3, 2, 2))
        np.testing.assert_array_equal(att.apply_channel_weights(v, np.ones(3)), v)

    def test_zeros(self):
        v = np.random.default_rng(6).standard_normal((3, 2, 2))
        np.testing.assert_array_equal(att.apply_channel_weights(v, np.zeros(3)), np.zeros_like(v))

    def test_per_channel_scaling(self):
        v = np.ones((2, 2, 2))
        out = att.apply_channel_weights(v, np.array([2.0, 0.5]))
        np.testing.assert_array_equal(out[0], np.full((2, 2), 2.0))
        np.testing.assert_array_equal(out[1], np.full((2, 2), 0.5))

    def test_linear_in_inputs(self):
        rng = np.random.default_rng(7)
        v, w = rng.standard_normal((2, 3, 2, 2))
        alpha = rng.standard_normal(3)
        np.testing.assert_allclose(
            att.apply_channel_weights(v + w, alpha),
            att.apply_channel_weights(v, alpha) + att.apply_channel_weights(w, alpha),
            atol=1e-12,
        )
        np.testing.assert_allclose(
            att.apply_channel_weights(v, 2.0 * alpha),
            2.0 * att.apply_channel_weights(v, alpha),
            atol=1e-12,
        )

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            att.apply_channel_weights(np.zeros((3, 2, 2)), np.ones(4))


class TestGradients:
    def test_weights_grad_matches_fd(self):
        rng = np.random.default_rng(8)
        params = make_params(c_a=4, c_l=3, seed=9)
        va = rng.standard_normal((4, 2, 2))
        vl = rng.standard_normal((3, 4, 4))
        wa = rng.standard_normal(4)

        def scalar_out(v):
            alpha_a, _ = att.co_attention_graph(v, vl, params)
            return ad.mean_all(ad.mul(alpha_a, ad.lift(wa)))

        var = ad.Var(va)
        ad.backward(scalar_out(var))
        numeric = numeric_grad(lambda v: float(scalar_out(ad.Var(v)).value), va)
        np.testing.assert_allclose(var.grad, numeric, rtol=1e-5, atol=1e-9)

    def test_grad_through_other_branch_in_joint_mode(self):
        rng = np.random.default_rng(9)
        params = make_params(c_a=4, c_l=3, seed=10)
        va = rng.standard_normal((4, 2, 2))
        vl = rng.standard_normal((3, 4, 4))
        wa = rng.standard_normal(4)
        var = ad.Var(vl)
        alpha_a, _ = att.co_attention_graph(va, var, params)
        ad.backward(ad.mean_all(ad.mul(alpha_a, ad.lift(wa))))
        def f(v):
            a, _ = att.co_attention_graph(va, ad.Var(v), params)
            return float(ad.mean_all(ad.mul(a, ad.lift(wa))).value)
        np.testing.assert_allclose(var.grad, numeric_grad(f, vl), rtol=1e-5, atol=1e-9)
        assert np.abs(var.grad).max() > 0
