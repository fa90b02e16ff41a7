import numpy as np
import pytest

from bilinear_retrieval import sketch as sk
from bilinear_retrieval.errors import ShapeError

from oracles import numeric_grad


def project_by_loop(x, params):
    """Direct recomputation of the bucket sums, one coordinate at a time."""
    y = np.zeros(params.dim_out)
    for l in range(params.dim_in):
        y[params.buckets[l]] += params.signs[l] * x[l]
    return y


class TestParams:
    def test_determinism(self):
        a = sk.make_sketch_params(4, 4, 7)
        b = sk.make_sketch_params(4, 4, 7)
        assert np.array_equal(a.signs, b.signs)
        assert np.array_equal(a.buckets, b.buckets)

    def test_ranges(self):
        p = sk.make_sketch_params(100, 13, 3)
        assert set(np.unique(p.signs)) <= {-1.0, 1.0}
        assert p.buckets.min() >= 0 and p.buckets.max() < 13

    def test_sign_balance_law_of_large_numbers(self):
        p = sk.make_sketch_params(100_000, 8, 123)
        assert abs(p.signs.mean()) < 0.02

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            sk.make_sketch_params(0, 4, 1)
        with pytest.raises(ValueError):
            sk.make_sketch_params(4, 0, 1)

    def test_different_seeds_differ(self):
        a = sk.make_sketch_params(64, 64, 1)
        b = sk.make_sketch_params(64, 64, 2)
        assert not (np.array_equal(a.signs, b.signs) and np.array_equal(a.buckets, b.buckets))


class TestProject:
    def test_one_hot_lands_in_its_bucket(self):
        p = sk.make_sketch_params(8, 5, 11)
        x = np.zeros(8)
        x[3] = 1.0
        y = sk.project(x, p)
        expected = np.zeros(5)
        expected[p.buckets[3]] = p.signs[3]
        np.testing.assert_array_equal(y, expected)

    def test_zero_maps_to_zero(self):
        p = sk.make_sketch_params(6, 4, 0)
        np.testing.assert_array_equal(sk.project(np.zeros(6), p), np.zeros(4))

    def test_matches_loop_recompute(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            c, d = int(rng.integers(1, 40)), int(rng.integers(1, 20))
            p = sk.make_sketch_params(c, d, int(rng.integers(0, 1000)))
            x = rng.standard_normal(c)
            np.testing.assert_allclose(sk.project(x, p), project_by_loop(x, p), atol=1e-12)

    def test_length_mismatch(self):
        p = sk.make_sketch_params(4, 4, 0)
        with pytest.raises(ShapeError):
            sk.project(np.zeros(5), p)

    def test_project_columns_matches_per_column(self):
        rng = np.random.default_rng(2)
        p = sk.make_sketch_params(10, 6, 5)
        x = rng.standard_normal((10, 7))
        cols = sk.project_columns(x, p)
        for j in range(7):
            np.testing.assert_allclose(cols[:, j], sk.project(x[:, j], p), atol=1e-12)

    def test_adjoint_identity(self):
        # <project(x), u> == <x, adjoint(u)>
        rng = np.random.default_rng(3)
        p = sk.make_sketch_params(12, 8, 9)
        x, u = rng.standard_normal(12), rng.standard_normal(8)
        assert float(sk.project(x, p) @ u) == pytest.approx(float(x @ sk.project_adjoint(u, p)))


class TestCbp:
    def test_zero_factor_gives_zero(self):
        p1 = sk.make_sketch_params(8, 16, 1)
        p2 = sk.make_sketch_params(6, 16, 2)
        x2 = np.random.default_rng(4).standard_normal(6)
        np.testing.assert_array_equal(sk.cbp_vector(np.zeros(8), x2, p1, p2), np.zeros(16))

    def test_scaling_in_first_argument(self):
        rng = np.random.default_rng(5)
        p1 = sk.make_sketch_params(8, 16, 1)
        p2 = sk.make_sketch_params(6, 16, 2)
        x1, x2 = rng.standard_normal(8), rng.standard_normal(6)
        np.testing.assert_allclose(
            sk.cbp_vector(2.5 * x1, x2, p1, p2),
            2.5 * sk.cbp_vector(x1, x2, p1, p2),
            rtol=0, atol=1e-12,
        )

    def test_bilinearity_additive(self):
        rng = np.random.default_rng(6)
        p1 = sk.make_sketch_params(5, 8, 3)
        p2 = sk.make_sketch_params(7, 8, 4)
        a, b = rng.standard_normal((2, 5))
        y = rng.standard_normal(7)
        np.testing.assert_allclose(
            sk.cbp_vector(a + b, y, p1, p2),
            sk.cbp_vector(a, y, p1, p2) + sk.cbp_vector(b, y, p1, p2),
            atol=1e-12,
        )

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(7)
        x1 = rng.standard_normal(8)
        x2 = rng.standard_normal(6)
        p1 = sk.make_sketch_params(8, 16, 10)
        p2 = sk.make_sketch_params(6, 16, 20)
        np.testing.assert_allclose(
            sk.cbp_vector(x1, x2, p1, p2),
            sk.outer_sketch_oracle(x1, x2, p1, p2),
            atol=1e-10,
        )

    def test_matches_oracle_hundred_cases(self):
        rng = np.random.default_rng(8)
        for trial in range(100):
            c1, c2 = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            d = int(rng.integers(1, 24))
            p1 = sk.make_sketch_params(c1, d, trial)
            p2 = sk.make_sketch_params(c2, d, 1000 + trial)
            x1, x2 = rng.standard_normal(c1), rng.standard_normal(c2)
            np.testing.assert_allclose(
                sk.cbp_vector(x1, x2, p1, p2),
                sk.outer_sketch_oracle(x1, x2, p1, p2),
                atol=1e-10,
            )

    def test_d_mismatch(self):
        p1 = sk.make_sketch_params(4, 8, 0)
        p2 = sk.make_sketch_params(4, 9, 0)
        with pytest.raises(ShapeError):
            sk.cbp_vector(np.ones(4), np.ones(4), p1, p2)


class TestOracle:
    def test_single_product_placement(self):
        p1 = sk.make_sketch_params(5, 7, 31)
        p2 = sk.make_sketch_params(4, 7, 32)
        i, j = 2, 3
        x1, x2 = np.zeros(5), np.zeros(4)
        x1[i] = x2[j] = 1.0
        out = sk.outer_sketch_oracle(x1, x2, p1, p2)
        expected = np.zeros(7)
        expected[(p1.buckets[i] + p2.buckets[j]) % 7] = p1.signs[i] * p2.signs[j]
        np.testing.assert_array_equal(out, expected)

    def test_argument_symmetry(self):
        rng = np.random.default_rng(9)
        p1 = sk.make_sketch_params(6, 10, 1)
        p2 = sk.make_sketch_params(9, 10, 2)
        x1, x2 = rng.standard_normal(6), rng.standard_normal(9)
        np.testing.assert_allclose(
            sk.outer_sketch_oracle(x1, x2, p1, p2),
            sk.outer_sketch_oracle(x2, x1, p2, p1),
            atol=1e-12,
        )


class TestGradient:
    def test_zero_upstream(self):
        p1 = sk.make_sketch_params(4, 8, 0)
        p2 = sk.make_sketch_params(3, 8, 1)
        g1, g2 = sk.cbp_gradient(np.zeros(8), np.ones(4), np.ones(3), p1, p2)
        np.testing.assert_array_equal(g1, np.zeros(4))
        np.testing.assert_array_equal(g2, np.zeros(3))

    def test_zero_partner_kills_gradient(self):
        rng = np.random.default_rng(10)
        p1 = sk.make_sketch_params(4, 8, 0)
        p2 = sk.make_sketch_params(3, 8, 1)
        g1, _ = sk.cbp_gradient(rng.standard_normal(8), rng.standard_normal(4), np.zeros(3), p1, p2)
        np.testing.assert_array_equal(g1, np.zeros(4))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p1 = sk.make_sketch_params(6, 8, 2)
        p2 = sk.make_sketch_params(5, 8, 3)
        x1, x2 = rng.standard_normal(6), rng.standard_normal(5)
        up = rng.standard_normal(8)
        g1, g2 = sk.cbp_gradient(up, x1, x2, p1, p2)
        num1 = numeric_grad(lambda a: float(sk.cbp_vector(a, x2, p1, p2) @ up), x1)
        num2 = numeric_grad(lambda a: float(sk.cbp_vector(x1, a, p1, p2) @ up), x2)
        np.testing.assert_allclose(g1, num1, rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(g2, num2, rtol=1e-5, atol=1e-8)


class TestUnbiasedness:
    def test_inner_product_estimator_mean(self):
        """Averaged over fresh hashes, <sketch(x), sketch(y)> estimates <x, y>."""
        rng = np.random.default_rng(12)
        x = rng.standard_normal(64)
        y = rng.standard_normal(64)
        exact = float(x @ y)
        trials = 2000
        estimates = np.empty(trials)
        for t in range(trials):
            p = sk.make_sketch_params(64, 64, 50_000 + t)
            estimates[t] = float(sk.project(x, p) @ sk.project(y, p))
        stderr = estimates.std(ddof=1) / np.sqrt(trials)
        assert abs(estimates.mean() - exact) < 3 * stderr
