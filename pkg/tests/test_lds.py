import math

import numpy as np
import pytest

from nsc import lds
from nsc.numerics import ShapeError, spectral_norm


def test_step_examples():
    sys = lds.LinSystem([[0.0, 1.0], [0.0, 0.0]], np.eye(2))
    np.testing.assert_allclose(lds.step(sys, [1, 2], [0, 0], [0.1, -0.1]), [2.1, -0.1])
    z = lds.LinSystem(np.zeros((2, 2)), np.eye(2))
    np.testing.assert_allclose(lds.step(z, [5, 7], [1, 2], [0.5, 0.5]), [1.5, 2.5])
    ident = lds.LinSystem(np.eye(2), np.zeros((2, 1)))
    np.testing.assert_allclose(lds.step(ident, [3, 4], [9], [0, 0]), [3, 4])
    with pytest.raises(ShapeError):
        lds.step(sys, [1, 2, 3], [0, 0], [0, 0])


def test_linsystem_validates_shapes():
    with pytest.raises(ShapeError):
        lds.LinSystem(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(ShapeError):
        lds.LinSystem(np.eye(2), np.ones((3, 1)))


def test_rollout_zero_disturbance_is_zero(instance):
    sys, cert = instance
    costs = lds.make_costs("quadratic", 3, 2)
    traj = lds.rollout(sys, lambda x: -cert.K @ x, lds.make_disturbance("zero", 0, 3), costs, 50)
    assert np.all(traj.states == 0) and traj.total_cost == 0


def test_rollout_constant_disturbance_deadbeat():
    sys = lds.LinSystem(np.zeros((2, 2)), np.eye(2))
    dist = lds.make_disturbance("constant", 1.0, 2, {"direction": [3, 4]})
    costs = lds.make_costs("quadratic", 2, 2)
    traj = lds.rollout(sys, lambda x: np.zeros(2), dist, costs, 10)
    np.testing.assert_allclose(traj.states[1:], np.tile([0.6, 0.8], (10, 1)))


def test_rollout_cost_matches_stepwise_replay(instance):
    sys, cert = instance
    dist = lds.make_disturbance("sinusoid", 1.0, 3)
    costs = lds.make_costs("time-varying-quadratic", 3, 2)
    traj = lds.rollout(sys, lambda x: -cert.K @ x, dist, costs, 200)
    x, total = np.zeros(3), 0.0
    for t in range(200):
        u = -cert.K @ x
        total += costs(t, x, u)
        x = sys.A @ x + sys.B @ u + dist.at(t)
    assert traj.total_cost == pytest.approx(total, rel=1e-12)
    assert traj.replay_residual(sys) < 1e-14
    fast = lds.rollout_linear(sys, cert.K, dist, costs, 200)
    np.testing.assert_allclose(fast.states, traj.states, atol=1e-12)
    assert fast.total_cost == pytest.approx(total, rel=1e-12)


def test_unrolled_state_examples(gen):
    Ap, B = gen.normal(size=(3, 3)) * 0.3, gen.normal(size=(3, 2))
    zero = lds.unrolled_state(Ap, B, np.zeros((5, 3)), np.zeros((5, 2)), 4)
    np.testing.assert_array_equal(zero, 0)
    w, ut = gen.normal(size=(5, 3)), gen.normal(size=(5, 2))
    np.testing.assert_allclose(lds.unrolled_state(np.zeros((3, 3)), B, w, ut, 4), w[4] + B @ ut[4])


def test_unrolled_state_matches_rollout():
    for seed in range(100):
        sys, cert = lds.synth_stable_instance(3, 2, 2.0, 0.3, seed) if seed % 2 else \
            lds.synth_stable_instance(2, 2, 2.0, 0.3, seed)
        g = np.random.default_rng(seed)
        w = g.normal(size=(51, sys.d_x))
        ut = g.normal(size=(51, sys.d_u))
        x = np.zeros(sys.d_x)
        Ap = sys.closed_loop(cert.K)
        for t in range(51):
            x = lds.step(sys, x, -cert.K @ x + ut[t], w[t])
            if t in (0, 10, 25, 50):
                y = lds.unrolled_state(Ap, sys.B, w, ut, t)
                assert np.linalg.norm(y - x) <= 1e-9 * max(1.0, np.linalg.norm(x))


def test_synth_scalar_and_determinism():
    sys, cert = lds.synth_stable_instance(1, 1, 2.0, 0.5, 3)
    assert abs(sys.A[0, 0] - sys.B[0, 0] * cert.K[0, 0]) <= 0.5 + 1e-12
    again = lds.synth_stable_instance(1, 1, 2.0, 0.5, 3)
    np.testing.assert_array_equal(sys.A, again[0].A)
    np.testing.assert_array_equal(cert.Q, again[1].Q)


def test_synth_outputs_pass_certificate():
    for seed in range(30):
        sys, cert = lds.synth_stable_instance(3, 2, 2.0, 0.3, seed)
        assert lds.check_strong_stability(sys, cert)
        assert lds.check_strong_controllability(sys.closed_loop(cert.K), sys.B, 3, 2.0)


def test_synth_budget_exhaustion():
    with pytest.raises(lds.GenerationError):
        lds.synth_stable_instance(3, 1, 1.0, 0.9, 0, kappa_c=1e-3, max_tries=5)


def test_check_strong_stability_violation_named(instance):
    sys, cert = instance
    r = 1 - cert.gamma + 0.1
    L = cert.L * (r / spectral_norm(cert.L))
    bad = lds.StabilityCertificate(cert.K, cert.Q, L, cert.kappa, cert.gamma)
    rep = lds.check_strong_stability(lds.LinSystem(cert.Q @ L @ np.linalg.inv(cert.Q)
                                                   + sys.B @ cert.K, sys.B), bad)
    assert not rep and "L" in rep.violated
    assert rep.margins["L"] == pytest.approx(-0.1)


def test_check_strong_stability_trivial():
    sys = lds.LinSystem(np.zeros((2, 2)), np.zeros((2, 1)))
    cert = lds.StabilityCertificate(np.zeros((1, 2)), np.eye(2), np.zeros((2, 2)), 1.0, 0.4)
    assert lds.check_strong_stability(sys, cert)


def test_controllability_matrix_examples(gen):
    B = gen.normal(size=(3, 2))
    np.testing.assert_array_equal(lds.controllability_matrix(gen.normal(size=(3, 3)), B, 1), B)
    C = lds.controllability_matrix(np.zeros((3, 3)), B, 3)
    np.testing.assert_array_equal(C, np.hstack([B, np.zeros((3, 4))]))
    np.testing.assert_allclose(lds.controllability_matrix(np.eye(3), B, 3), np.hstack([B] * 3))
    assert C.shape == (3, 6)


def test_check_strong_controllability_examples(instance):
    rep = lds.check_strong_controllability(np.zeros((2, 2)), np.eye(2), 1, 1.0)
    assert rep and rep.sigma_min == pytest.approx(1.0)
    assert not lds.check_strong_controllability(np.eye(2), np.zeros((2, 1)), 2, 10.0)
    sys, cert = instance
    Ap = sys.closed_loop(cert.K)
    rep = lds.check_strong_controllability(Ap, sys.B, 3, 2.0)
    C = np.hstack([np.linalg.matrix_power(Ap, j) @ sys.B for j in range(3)])
    assert rep.sigma_min == pytest.approx(math.sqrt(np.linalg.eigvalsh(C @ C.T)[0]), rel=1e-10)


def test_lift_controls_examples(instance, gen):
    sys, cert = instance
    res = lds.lift_controls(sys, cert.K, 3, np.zeros(3))
    np.testing.assert_array_equal(res.u, 0)
    res = lds.lift_controls(sys, np.zeros_like(cert.K), 3, gen.normal(size=3))
    np.testing.assert_allclose(res.u, res.u_prime, atol=1e-14)
    for _ in range(50):
        x = gen.normal(size=3)
        res = lds.lift_controls(sys, cert.K, 3, x)
        C = lds.controllability_matrix(sys.A, sys.B, 3)
        Cp = lds.controllability_matrix(sys.closed_loop(cert.K), sys.B, 3)
        assert np.linalg.norm(C @ res.u - x) <= 1e-8 * np.linalg.norm(x)
        np.testing.assert_allclose(C @ res.u, Cp @ res.u_prime, atol=1e-10)
        assert math.isfinite(res.ratio)


def test_lift_controls_precondition():
    sys = lds.LinSystem(np.eye(2), np.zeros((2, 1)))
    with pytest.raises(lds.PreconditionError):
        lds.lift_controls(sys, np.zeros((1, 2)), 2, np.ones(2))


@pytest.mark.parametrize("kind", lds.DISTURBANCE_KINDS)
def test_disturbance_bound_and_obliviousness(kind):
    d = lds.make_disturbance(kind, 1.5, 3, seed=4)
    W = d.block(0, 10001)
    assert np.all(np.linalg.norm(W, axis=1) <= 1.5 + 1e-12)
    np.testing.assert_array_equal(d.block(500, 520), W[500:520])
    np.testing.assert_array_equal(d.at(777), W[777])
    if kind == "zero":
        assert np.all(W == 0)


def test_make_disturbance_rejects_bad_params():
    with pytest.raises(lds.ConfigError):
        lds.make_disturbance("sinusoid", -1, 2)
    with pytest.raises(lds.ConfigError):
        lds.make_disturbance("bogus", 1, 2)
    with pytest.raises(lds.ConfigError):
        lds.make_disturbance("sinusoid", 1, 2, {"speed": 3})


def test_quadratic_cost_gradient_and_G(gen):
    c = lds.make_costs("quadratic", 3, 2)
    x, u = gen.normal(size=3), gen.normal(size=2)
    gx, gu = c.grad(0, x, u)
    np.testing.assert_allclose(gx, 2 * x)
    np.testing.assert_allclose(gu, 2 * u)
    assert c.G == 2.0 and c.is_pure_quadratic()
    for kind in lds.COST_KINDS:
        assert lds.make_costs(kind, 3, 2).spot_check_gradient() <= 1.0 + 1e-12


def test_make_costs_psd_check():
    with pytest.raises(lds.ConfigError):
        lds.make_costs("quadratic", 2, 1, {"Q": [[1, 0], [0, -1]]})
    with pytest.raises(lds.ConfigError):
        lds.make_costs("quadratic", 2, 1, {"Q": [[1, 2], [0, 1]]})


def test_cost_evaluate_matches_call(gen):
    c = lds.make_costs("linear-plus-quadratic", 3, 2)
    X, U = gen.normal(size=(20, 3)), gen.normal(size=(20, 2))
    np.testing.assert_allclose(c.evaluate(5, X, U), [c(5 + t, X[t], U[t]) for t in range(20)])
    # tracking form: zero at the reference
    assert c(0, np.ones(3), np.zeros(2)) == pytest.approx(0.0, abs=1e-12)
