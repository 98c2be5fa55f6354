import numpy as np
import pytest

from nsc import lds, sysid


def test_exploration_signs_and_determinism(instance):
    sys, cert = instance
    dist = lds.make_disturbance("sinusoid", 1.0, 3)
    traj, eta = sysid.explore(sys, cert.K, 300, 3, dist, seed=5)
    assert set(np.unique(eta)) == {-1.0, 1.0} and eta.shape == (301, 2)
    traj2, eta2 = sysid.explore(sys, cert.K, 300, 3, dist, seed=5)
    np.testing.assert_array_equal(eta, eta2)
    np.testing.assert_array_equal(traj.states, traj2.states)
    assert traj.replay_residual(sys) < 1e-14
    scaled = sysid.exploration_signs(5, 10, 2, scale=3.0)
    assert set(np.unique(np.abs(scaled))) == {3.0}


def test_explore_rejects_short_horizon(instance):
    sys, cert = instance
    with pytest.raises(lds.ConfigError):
        sysid.explore(sys, cert.K, 3, 3, lds.make_disturbance("zero", 0, 3), 0)


def test_dynamics_collapse_without_feedback():
    g = np.random.default_rng(0)
    B = g.normal(size=(3, 2))
    sys = lds.LinSystem(np.zeros((3, 3)), B)
    traj, eta = sysid.explore(sys, np.zeros((2, 3)), 50, 2, lds.make_disturbance("zero", 0, 3), 1)
    np.testing.assert_allclose(traj.states[1:], eta @ B.T, atol=1e-15)


def test_single_input_moment_is_exact():
    B = np.array([[0.7], [-0.2]])
    sys = lds.LinSystem(np.zeros((2, 2)), B)
    for T0 in (5, 50, 500):
        for seed in range(3):
            traj, eta = sysid.explore(sys, np.zeros((1, 2)), T0, 2,
                                      lds.make_disturbance("zero", 0, 2), seed)
            N = sysid.estimate_moments(traj.states, eta, 2, T0)
            np.testing.assert_allclose(N[0], B, atol=1e-15)


def test_cross_moment_shrinks():
    B = np.array([[0.7], [-0.2]])
    sys = lds.LinSystem(np.zeros((2, 2)), B)
    means = []
    for T0 in (100, 10000):
        errs = []
        for seed in range(20):
            traj, eta = sysid.explore(sys, np.zeros((1, 2)), T0, 2,
                                      lds.make_disturbance("zero", 0, 2), seed)
            errs.append(np.linalg.norm(sysid.estimate_moments(traj.states, eta, 2, T0)[1]))
        means.append(np.mean(errs))
    assert means[1] < means[0] / 5


def test_moments_match_double_loop(instance):
    sys, cert = instance
    dist = lds.make_disturbance("uniform-bounded", 1.0, 3, seed=2)
    T0, k = 200, 3
    traj, eta = sysid.explore(sys, cert.K, T0, k, dist, 2)
    N = sysid.estimate_moments(traj.states, eta, k, T0)
    assert len(N) == k + 1
    for j in range(k + 1):
        acc = np.zeros((3, 2))
        for t in range(T0 - k):
            for a in range(3):
                for b in range(2):
                    acc[a, b] += traj.states[t + j + 1, a] * eta[t, b]
        np.testing.assert_allclose(N[j], acc / (T0 - k), atol=1e-13)


def test_exact_moment_recovery():
    for seed in range(50):
        d_x, d_u = ((3, 2), (2, 1), (3, 3), (2, 2))[seed % 4]
        sys, cert = lds.synth_stable_instance(d_x, d_u, 2.0, 0.3, seed)
        Ap = sys.closed_loop(cert.K)
        N = [np.linalg.matrix_power(Ap, j) @ sys.B for j in range(d_x + 1)]
        est = sysid.recover_system(N, cert.K)
        eps_A, eps_B = sysid.recovery_error(est, sys)
        assert eps_A <= 1e-8 and eps_B <= 1e-8
        np.testing.assert_array_equal(est.C0, np.hstack(N[:-1]))
        np.testing.assert_array_equal(est.C1, np.hstack(N[1:]))


def test_recover_without_feedback_and_rank_failure(instance):
    sys, cert = instance
    N = [np.linalg.matrix_power(sys.A, j) @ sys.B for j in range(4)]
    est = sysid.recover_system(N, np.zeros((2, 3)))
    np.testing.assert_allclose(est.A_hat, est.A_prime_hat)
    with pytest.raises(sysid.RecoveryError) as info:
        sysid.recover_system([np.zeros((3, 2))] * 4, cert.K)
    assert info.value.sigma == 0.0


def test_estimate_disturbance_examples(instance):
    sys, cert = instance
    g = np.random.default_rng(0)
    x, u, w = g.normal(size=3), g.normal(size=2), g.normal(size=3)
    xn = lds.step(sys, x, u, w)
    np.testing.assert_allclose(sysid.estimate_disturbance(xn, x, u, sys.A, sys.B), w, atol=1e-14)
    np.testing.assert_array_equal(
        sysid.estimate_disturbance(xn, np.zeros(3), np.zeros(2), sys.A, sys.B), xn)
    E = 0.01 * g.normal(size=(3, 3))
    np.testing.assert_allclose(sysid.estimate_disturbance(xn, x, u, sys.A + E, sys.B) - w, -E @ x,
                               atol=1e-14)


def test_recovery_error_examples(instance):
    sys, cert = instance
    est = sysid.SysIdEstimate([], None, None, sys.A.copy(), sys.B.copy(), None)
    assert sysid.recovery_error(est, sys) == (0.0, 0.0)
    E = np.zeros_like(sys.B)
    E[0, 0] = 1.0
    est.B_hat = sys.B + E
    assert sysid.recovery_error(est, sys)[1] == pytest.approx(1.0)


def test_scaled_exploration_is_consistent(instance):
    sys, cert = instance
    dist = lds.make_disturbance("sinusoid", 3.0, 3)
    est, _, eta = sysid.identify(sys, cert.K, 20000, 3, dist, 0, scale=3.0)
    assert set(np.unique(np.abs(eta))) == {3.0}
    assert est.eps_report["eps_A"] < 0.2 and est.eps_report["eps_B"] < 0.1
