import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from coreg.exceptions import DecompositionError, DegenerateVarianceError, DimensionError
from coreg.numerics import (RngStream, mvn_sample, nearest_psd_correlation, sample_covariance,
                            to_correlation)


class TestSampleCovariance:
    def test_hand_computed(self):
        S = sample_covariance([[1, -1], [-1, 1]])
        np.testing.assert_array_equal(S, [[2, -2], [-2, 2]])

    def test_constant_rows_give_zero(self):
        E = np.tile([[3.0], [-1.0], [0.5]], (1, 7))
        np.testing.assert_array_equal(sample_covariance(E), np.zeros((3, 3)))

    def test_monte_carlo_identity(self):
        E = np.random.default_rng(1).standard_normal((3, 10000))
        assert np.abs(sample_covariance(E) - np.eye(3)).max() < 0.1

    def test_matches_numpy_cov(self, rng):
        E = rng.normal(size=(6, 15))
        np.testing.assert_allclose(sample_covariance(E), np.cov(E), atol=1e-13)

    def test_needs_two_samples(self):
        with pytest.raises(DimensionError):
            sample_covariance(np.ones((3, 1)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 12)),
                  elements=st.floats(-1e3, 1e3)))
    def test_symmetric_psd(self, E):
        S = sample_covariance(E)
        np.testing.assert_array_equal(S, S.T)
        tol = 1e-9 * max(1.0, np.abs(S).max())
        assert np.linalg.eigvalsh(S).min() >= -tol


class TestToCorrelation:
    def test_hand_computed(self):
        np.testing.assert_allclose(to_correlation([[4, 2], [2, 1]]), np.ones((2, 2)))

    def test_identity(self):
        np.testing.assert_array_equal(to_correlation(np.eye(4)), np.eye(4))

    def test_diagonal_input(self):
        np.testing.assert_array_equal(to_correlation([[2, 0], [0, 3]]), np.eye(2))

    def test_degenerate_variance_names_index(self):
        with pytest.raises(DegenerateVarianceError) as info:
            to_correlation([[1, 0, 0], [0, 2, 0], [0, 0, 0]])
        assert info.value.index == 2
        assert "variable 2" in str(info.value)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (4, 9), elements=st.floats(-10, 10)))
    def test_unit_diagonal_and_range(self, E):
        S = sample_covariance(E)
        if np.diag(S).min() < 1e-6:
            return
        R = to_correlation(S)
        np.testing.assert_array_equal(np.diag(R), 1.0)
        assert np.abs(R).max() <= 1.0


class TestNearestPSD:
    def test_psd_input_unchanged(self, rng):
        A = rng.normal(size=(5, 30))
        R = to_correlation(np.cov(A))
        np.testing.assert_allclose(nearest_psd_correlation(R), R, atol=1e-12, rtol=0)

    def test_two_by_two_hand_case(self):
        np.testing.assert_allclose(nearest_psd_correlation([[1, 1.2], [1.2, 1]]),
                                   np.ones((2, 2)), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_symmetric_becomes_psd(self, seed):
        g = np.random.default_rng(seed)
        A = np.triu(g.uniform(-1, 1, size=(10, 10)), 1)
        R = A + A.T + np.eye(10)
        out = nearest_psd_correlation(R)
        assert np.linalg.eigvalsh(out).min() >= -1e-10
        np.testing.assert_allclose(np.diag(out), 1.0)


class TestMvnSample:
    def test_identity_covariance(self):
        Z = mvn_sample(np.zeros(3), np.eye(3), 10000, RngStream(3))
        assert Z.shape == (3, 10000)
        assert np.abs(np.cov(Z) - np.eye(3)).max() < 0.1

    def test_same_stream_identical(self):
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        a = mvn_sample([1.0, -1.0], sigma, 50, RngStream(9, 4))
        b = mvn_sample([1.0, -1.0], sigma, 50, RngStream(9, 4))
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = mvn_sample([0.0], [[1.0]], 20, RngStream(9, 0))
        b = mvn_sample([0.0], [[1.0]], 20, RngStream(9, 1))
        assert not np.array_equal(a, b)

    def test_univariate_variance(self):
        z = mvn_sample([0.0], [[4.0]], 10000, RngStream(5))
        assert 3.6 <= z.var(ddof=1) <= 4.4

    def test_singular_psd_allowed(self):
        Z = mvn_sample(np.zeros(2), np.ones((2, 2)), 100, RngStream(1))
        np.testing.assert_allclose(Z[0], Z[1], atol=1e-10)

    def test_rejects_non_psd(self):
        with pytest.raises(DecompositionError):
            mvn_sample(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]], 10, RngStream(0))

    def test_mean_length_checked(self):
        with pytest.raises(DimensionError):
            mvn_sample(np.zeros(3), np.eye(2), 10, RngStream(0))
