import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsc import numerics as nx


def test_spectral_norm_examples():
    assert nx.spectral_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    assert nx.spectral_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0, rel=1e-12)
    assert nx.spectral_norm([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(1.0, rel=1e-12)


def test_spectral_norm_rejects_non_finite():
    with pytest.raises(nx.InvalidInputError):
        nx.spectral_norm([[1.0, np.nan]])
    with pytest.raises(nx.InvalidInputError):
        nx.spectral_norm([[np.inf]])
    with pytest.raises(nx.InvalidInputError):
        nx.spectral_norm(np.zeros((0, 0)))


def test_spectral_norm_matches_power_iteration(gen):
    # independent oracle: power iteration on M^T M
    M = gen.normal(size=(5, 4))
    v = np.ones(4)
    for _ in range(2000):
        v = M.T @ (M @ v)
        v /= np.linalg.norm(v)
    assert nx.spectral_norm(M) == pytest.approx(np.linalg.norm(M @ v), rel=1e-10)


def test_sigma_min_examples():
    assert nx.sigma_min(np.eye(2)) == pytest.approx(1.0)
    assert nx.sigma_min(np.diag([3.0, 0.5])) == pytest.approx(0.5)
    assert nx.sigma_min([[1.0, 0, 0], [0, 1.0, 0]]) == pytest.approx(1.0)


def test_sigma_min_inverse_gram_identity(gen):
    for _ in range(20):
        M = gen.normal(size=(3, 7))
        s = nx.sigma_min(M)
        assert s**2 * np.linalg.norm(np.linalg.inv(M @ M.T), 2) == pytest.approx(1.0, rel=1e-10)


def test_solve_least_squares_examples(gen):
    B = gen.normal(size=(3, 3))
    np.testing.assert_allclose(nx.solve_least_squares(np.eye(3), B), B, atol=1e-14)
    np.testing.assert_allclose(nx.solve_least_squares(2 * np.eye(2), np.eye(2)), 0.5 * np.eye(2),
                               atol=1e-14)
    A = gen.normal(size=(3, 6))
    X0 = gen.normal(size=(2, 3))
    np.testing.assert_allclose(nx.solve_least_squares(A, X0 @ A), X0, atol=1e-8)


def test_solve_least_squares_normal_equations(gen):
    A = gen.normal(size=(3, 8))
    B = gen.normal(size=(4, 8))
    X = nx.solve_least_squares(A, B)
    np.testing.assert_allclose(X, B @ A.T @ np.linalg.inv(A @ A.T), atol=1e-10)
    np.testing.assert_allclose((X @ A - B) @ A.T, 0, atol=1e-8)


def test_solve_least_squares_rank_deficient_carries_sigma():
    A = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(nx.RankDeficiencyError) as info:
        nx.solve_least_squares(A, np.ones((1, 3)))
    assert info.value.sigma < 1e-8
    assert isinstance(info.value, np.linalg.LinAlgError)


def test_project_spectral_ball_examples():
    M = np.array([[0.1, 0.2], [0.0, 0.3]])
    np.testing.assert_array_equal(nx.project_spectral_ball(M, 1.0), M)
    assert nx.project_spectral_ball(5.0, 0.5)[0, 0] == pytest.approx(0.5)
    np.testing.assert_allclose(nx.project_spectral_ball(np.diag([3.0, 1.0]), 2.0),
                               np.diag([2.0, 1.0]), atol=1e-14)
    with pytest.raises(nx.InvalidInputError):
        nx.project_spectral_ball(M, -1.0)


matrices = arrays(np.float64, (3, 2), elements=st.floats(-10, 10))


@settings(max_examples=60, deadline=None)
@given(matrices, matrices, st.floats(0, 5))
def test_projection_idempotent_and_nonexpansive(M, N, r):
    P = nx.project_spectral_ball(M, r)
    assert nx.spectral_norm(P) <= r + 1e-9
    np.testing.assert_allclose(nx.project_spectral_ball(P, r), P, atol=1e-9)
    PN = nx.project_spectral_ball(N, r)
    assert np.linalg.norm(P - PN) <= np.linalg.norm(M - N) + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-1e3, 1e3)))
def test_norm_dominates_sigma_min(M):
    assert nx.spectral_norm(M) >= nx.sigma_min(M) >= 0


def test_mat_power_examples(gen):
    np.testing.assert_array_equal(nx.mat_power(gen.normal(size=(3, 3)), 0), np.eye(3))
    np.testing.assert_array_equal(nx.mat_power([[0.0, 1.0], [0.0, 0.0]], 2), np.zeros((2, 2)))
    np.testing.assert_allclose(nx.mat_power(np.diag([0.5]), 3), np.diag([0.125]))
    with pytest.raises(nx.ShapeError):
        nx.mat_power(np.ones((2, 3)), 2)
