import numpy as np
import pytest

from bilinear_retrieval import tensor_ops as T
from bilinear_retrieval.errors import ShapeError

from oracles import naive_circular_convolve, naive_dft


class TestAvgPool:
    def test_mean_of_quad(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2)
        np.testing.assert_allclose(T.avg_pool2d(x, (2, 2), (2, 2)), [[[2.5]]])

    def test_constant_map_preserved(self):
        x = np.full((3, 8, 8), 3.5)
        out = T.avg_pool2d(x, (4, 4), (4, 4))
        np.testing.assert_array_equal(out, np.full((3, 2, 2), 3.5))

    def test_landmark_map_shape(self):
        x = np.random.default_rng(0).random((256, 64, 64))
        assert T.avg_pool2d(x, (8, 8), (8, 8)).shape == (256, 8, 8)

    def test_overlapping_windows(self):
        x = np.arange(16.0).reshape(1, 4, 4)
        out = T.avg_pool2d(x, (2, 2), (1, 1))
        assert out.shape == (1, 3, 3)
        assert out[0, 0, 0] == pytest.approx((0 + 1 + 4 + 5) / 4)

    def test_window_too_large(self):
        with pytest.raises(ShapeError):
            T.avg_pool2d(np.zeros((1, 4, 4)), (5, 5), (1, 1))

    def test_non_tiling_rejected(self):
        with pytest.raises(ShapeError):
            T.avg_pool2d(np.zeros((1, 5, 5)), (2, 2), (2, 2))

    def test_nan_rejected(self):
        x = np.zeros((1, 2, 2))
        x[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            T.avg_pool2d(x, (2, 2), (2, 2))


class TestResample:
    def test_downsample_to_grid(self):
        x = np.random.default_rng(1).random((256, 64, 64))
        out = T.resample_spatial(x, (8, 8))
        assert out.shape == (256, 8, 8)
        np.testing.assert_allclose(out, T.avg_pool2d(x, (8, 8), (8, 8)))

    def test_identity(self):
        x = np.random.default_rng(2).random((4, 6, 6))
        np.testing.assert_array_equal(T.resample_spatial(x, (6, 6)), x)

    def test_replicates_constants(self):
        x = np.ones((4, 2, 2))
        np.testing.assert_array_equal(T.resample_spatial(x, (4, 4)), np.ones((4, 4, 4)))

    def test_global_pool_case(self):
        x = np.random.default_rng(3).random((5, 4, 4))
        out = T.resample_spatial(x, (1, 1))
        np.testing.assert_allclose(out[:, 0, 0], x.mean(axis=(1, 2)))

    def test_non_divisible_rejected(self):
        with pytest.raises(ShapeError):
            T.resample_spatial(np.zeros((1, 6, 6)), (4, 4))

    def test_mixed_axes(self):
        x = np.random.default_rng(4).random((2, 4, 2))
        out = T.resample_spatial(x, (2, 4))
        assert out.shape == (2, 2, 4)


class TestDft:
    def test_delta(self):
        cv = T.dft(np.array([1.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(cv.re, np.ones(4), atol=1e-12)
        np.testing.assert_allclose(cv.im, np.zeros(4), atol=1e-12)

    def test_constant_is_dc(self):
        c = 2.25
        cv = T.dft(np.full(6, c))
        np.testing.assert_allclose(cv.re[0], 6 * c)
        np.testing.assert_allclose(cv.re[1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(cv.im, 0.0, atol=1e-12)

    def test_matches_naive_definition(self):
        rng = np.random.default_rng(5)
        for n in (1, 2, 3, 5, 7, 12, 16, 23):
            v = rng.standard_normal(n)
            ref = naive_dft(v)
            cv = T.dft(v)
            np.testing.assert_allclose(cv.re, ref.real, atol=1e-9)
            np.testing.assert_allclose(cv.im, ref.imag, atol=1e-9)

    def test_round_trip_all_lengths(self):
        rng = np.random.default_rng(6)
        for n in range(1, 65):
            v = rng.standard_normal(n)
            back = T.idft(T.dft(v))
            np.testing.assert_allclose(back, v, rtol=1e-10, atol=1e-12)

    def test_length_seven_round_trip(self):
        v = np.random.default_rng(7).standard_normal(7)
        np.testing.assert_allclose(T.idft(T.dft(v)), v, rtol=1e-10, atol=1e-13)


class TestCircularConvolve:
    def test_delta_identity(self):
        b = np.array([4.0, -1.0, 2.5, 0.25])
        np.testing.assert_allclose(T.circular_convolve([1, 0, 0, 0], b), b, atol=1e-12)

    def test_shift(self):
        np.testing.assert_allclose(
            T.circular_convolve([0, 1, 0], [1, 2, 3]), [3, 1, 2], atol=1e-12
        )

    def test_matches_naive(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            d = int(rng.integers(1, 33))
            a, b = rng.standard_normal((2, d))
            np.testing.assert_allclose(
                T.circular_convolve(a, b), naive_circular_convolve(a, b), atol=1e-10
            )

    def test_commutative_and_bilinear(self):
        rng = np.random.default_rng(9)
        a, b, c = rng.standard_normal((3, 16))
        np.testing.assert_allclose(
            T.circular_convolve(a, b), T.circular_convolve(b, a), atol=1e-12
        )
        np.testing.assert_allclose(
            T.circular_convolve(a + c, b),
            T.circular_convolve(a, b) + T.circular_convolve(c, b),
            atol=1e-12,
        )

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            T.circular_convolve([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_correlate_is_convolution_adjoint(self):
        rng = np.random.default_rng(10)
        a, b, u = rng.standard_normal((3, 12))
        # <u, a*b> == <corr(u, b), a>
        lhs = float(u @ T.circular_convolve(a, b))
        rhs = float(T.circular_correlate(u, b) @ a)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestLinearActivations:
    def test_linear_identity(self):
        x = np.array([1.5, -2.0])
        np.testing.assert_array_equal(T.linear_apply(np.eye(2), None, x), x)

    def test_linear_zero_weight(self):
        v = np.array([3.0, 4.0, 5.0])
        np.testing.assert_array_equal(T.linear_apply(np.zeros((3, 2)), v, [1.0, 1.0]), v)

    def test_linear_arithmetic(self):
        out = T.linear_apply(np.array([[1.0, 2.0], [3.0, 4.0]]), None, [1.0, 1.0])
        np.testing.assert_array_equal(out, [3.0, 7.0])

    def test_linear_shape_error(self):
        with pytest.raises(ShapeError):
            T.linear_apply(np.eye(2), None, [1.0, 2.0, 3.0])

    def test_relu(self):
        np.testing.assert_array_equal(T.activate(np.array([-1.0, 2.0]), "relu"), [0.0, 2.0])

    def test_sigmoid_center_and_range(self):
        # strictly inside (0, 1) over the float64-representable range;
        # beyond |x| ~ 36.7 the quotient rounds to exactly 1.0
        assert T.activate(np.array([0.0]), "sigmoid")[0] == pytest.approx(0.5)
        x = np.linspace(-36, 36, 1001)
        s = T.activate(x, "sigmoid")
        assert np.all(s > 0) and np.all(s < 1)

    def test_softmax_symmetry_and_sum(self):
        s = T.activate(np.array([1.7, 1.7, 1.7]), "softmax")
        np.testing.assert_allclose(s, np.full(3, 1 / 3), atol=1e-12)
        rows = T.activate(np.random.default_rng(11).standard_normal((5, 9)), "softmax")
        np.testing.assert_allclose(rows.sum(axis=-1), np.ones(5), atol=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            T.activate(np.zeros(3), "tanh")


class TestNormalization:
    def test_signed_sqrt_values(self):
        np.testing.assert_allclose(
            T.signed_sqrt(np.array([4.0, -4.0, 0.0])), [2.0, -2.0, 0.0]
        )
        assert T.signed_sqrt(T.signed_sqrt(np.array([16.0])))[0] == pytest.approx(2.0)

    def test_l2_normalize_345(self):
        np.testing.assert_allclose(T.l2_normalize(np.array([3.0, 4.0])), [0.6, 0.8])

    def test_l2_normalize_zero_guarded(self):
        out = T.l2_normalize(np.zeros(4), eps=1e-12)
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_l2_norm_is_one(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            v = rng.standard_normal(int(rng.integers(2, 50)))
            assert np.linalg.norm(T.l2_normalize(v)) == pytest.approx(1.0, abs=1e-12)
