"""System identification under oblivious adversarial disturbances.

The plant is driven by ``u_t = -K x_t + eta_t`` with i.i.d. sign vectors
``eta_t``. Because ``eta_t`` is independent of everything that happened
before it (including the disturbances, which are fixed in advance), the
cross moments ``E[x_{t+j+1} eta_t^T]`` equal ``(A - BK)^j B`` whatever the
disturbance sequence is. The moments are averaged, stacked into shifted
block rows, and ``A - BK`` is read off by least squares.
"""

from dataclasses import dataclass, field

import numpy as np

from . import lds, rng
from ._kernels import closed_loop_states
from .numerics import RankDeficiencyError, ShapeError, sigma_min, solve_least_squares


class RecoveryError(RankDeficiencyError):
    """The stacked moment matrix is too close to rank deficient to invert."""


@dataclass
class SysIdEstimate:
    N: list
    C0: np.ndarray
    C1: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray
    A_prime_hat: np.ndarray
    eps_report: dict = field(default_factory=dict)


def exploration_signs(seed, T0, d_u, scale=1.0):
    """The ``(T0+1, d_u)`` exploration inputs ``eta_0 .. eta_T0``, entries ``+-scale``."""
    return scale * rng.rademacher(seed, 0, T0 + 1, d_u, stream=rng.STREAM_EXPLORE)


def explore(sys, K, T0, k, dist, seed, scale=1.0, costs=None):
    """Run the exploration phase for steps ``t = 0 .. T0``.

    Returns ``(trajectory, eta)``; the trajectory holds ``x_0 .. x_{T0+1}``.
    Per-step costs are evaluated when ``costs`` is given and are zero otherwise.
    """
    if T0 <= k:
        raise lds.ConfigError(f"exploration length T0={T0} must exceed k={k}")
    K = np.asarray(K, dtype=float)
    eta = exploration_signs(seed, T0, sys.d_u, scale)
    W = np.ascontiguousarray(dist.block(0, T0 + 1))
    X = closed_loop_states(np.ascontiguousarray(sys.closed_loop(K)), np.ascontiguousarray(sys.B),
                           W, eta, np.zeros(sys.d_x))
    U = eta - X[:-1] @ K.T
    C = costs.evaluate(0, X[:-1], U) if costs is not None else np.zeros(T0 + 1)
    traj = lds.Trajectory(X, U, W, C, phase=np.ones(T0 + 1, dtype=int))
    return traj, eta


def estimate_moments(states, eta, k, T0, scale=1.0):
    """``N_j = (T0-k)^{-1} sum_{t=0}^{T0-k-1} x_{t+j+1} eta_t^T / scale^2`` for ``j = 0..k``."""
    states = np.asarray(states, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = T0 - k
    if n <= 0:
        raise lds.ConfigError(f"T0={T0} must exceed k={k}")
    if len(states) < T0 + 1 or len(eta) < n:
        raise ShapeError(f"need states x_0..x_{T0} and {n} exploration inputs")
    E = eta[:n]
    return [states[j + 1: j + 1 + n].T @ E / (n * scale**2) for j in range(k + 1)]


def recover_system(N, K):
    """``B_hat = N_0``, ``A'_hat = C1 C0^T (C0 C0^T)^{-1}``, ``A_hat = A'_hat + B_hat K``."""
    K = np.asarray(K, dtype=float)
    k = len(N) - 1
    if k < 1:
        raise ShapeError("need moments N_0 .. N_k with k >= 1")
    C0 = np.hstack(N[:k])
    C1 = np.hstack(N[1:])
    s = sigma_min(C0) if C0.shape[0] <= C0.shape[1] else 0.0
    try:
        A_prime_hat = solve_least_squares(C0, C1)
    except RankDeficiencyError:
        raise RecoveryError(s, what="C0") from None
    B_hat = np.array(N[0])
    return SysIdEstimate(list(N), C0, C1, A_prime_hat + B_hat @ K, B_hat, A_prime_hat)


def estimate_disturbance(x_next, x, u, A_hat, B_hat):
    x_next, x, u = (np.asarray(v, dtype=float) for v in (x_next, x, u))
    if x_next.shape != x.shape or np.shape(A_hat)[1] != x.shape[-1] or np.shape(B_hat)[1] != u.shape[-1]:
        raise ShapeError("state/control shapes do not match the estimated system")
    return x_next - x @ np.asarray(A_hat).T - u @ np.asarray(B_hat).T


def recovery_error(est, truth):
    """Frobenius errors ``(||A_hat - A||_F, ||B_hat - B||_F)``."""
    return (float(np.linalg.norm(est.A_hat - truth.A)),
            float(np.linalg.norm(est.B_hat - truth.B)))


def identify(sys, K, T0, k, dist, seed, scale=1.0, costs=None):
    """Exploration, moment estimation and recovery in one call.

    The estimate's ``eps_report`` holds the Frobenius errors against ``sys``.
    """
    traj, eta = explore(sys, K, T0, k, dist, seed, scale, costs)
    N = estimate_moments(traj.states, eta, k, T0, scale)
    est = recover_system(N, K)
    eps_A, eps_B = recovery_error(est, sys)
    est.eps_report = {"eps_A": eps_A, "eps_B": eps_B}
    return est, traj, eta


def naive_least_squares(traj):
    """Regress ``x_{t+1}`` on ``(x_t, u_t)`` without intercept; returns ``(A_ls, B_ls)``."""
    X, U = traj.states, traj.controls
    Z = np.hstack([X[:-1], U])
    coef, *_ = np.linalg.lstsq(Z, X[1:], rcond=None)
    d_x = X.shape[1]
    return coef[:d_x].T, coef[d_x:].T
