"""Disturbance-action policies learned by projected online gradient descent.

A policy is an ``(H, d_u, d_x)`` array ``M`` whose block ``M[i-1]`` weighs
the disturbance ``i`` steps back:

    u_t = -K x_t + sum_{i=1}^{H} M[i-1] w_{t-i}

Disturbance windows are passed oldest first. A surrogate context at time
``t`` carries the ``2H+1`` estimates ``w_{t-1-2H} .. w_{t-1}``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import lds
from ._kernels import gpc_loop
from .numerics import InvalidInputError, ShapeError, mat_power, project_spectral_ball

FD_STEP = 1e-6


def policy_radii(kappa, gamma, H):
    """Spectral-norm radii ``kappa^4 (1-gamma)^i`` for blocks ``i = 1..H``."""
    return kappa**4 * (1.0 - gamma) ** np.arange(1, H + 1)


def auto_memory(kappa, gamma, T):
    return max(1, math.ceil(math.log(kappa**2 * T) / gamma))


def auto_learning_rate(G, W, T, kappa=1.0, gamma=1.0):
    """``gamma / (kappa^3 G W sqrt(T))``.

    ``kappa^3 / gamma`` bounds the gain from a policy block to the surrogate
    state, so it is folded into the step size alongside ``G W``.
    """
    return gamma / (kappa**3 * G * W * math.sqrt(T))


def zero_policy(H, d_u, d_x):
    return np.zeros((H, d_u, d_x))


@dataclass
class SurrogateContext:
    """Everything the surrogate loss at one time step depends on besides ``M``.

    ``cost`` is either a :class:`nsc.lds.CostGen` (evaluated at step ``t``)
    or any callable ``c(x, u)``.
    """

    A_hat: np.ndarray
    B_hat: np.ndarray
    K: np.ndarray
    window: np.ndarray
    cost: object
    t: int = 0

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=float)
        if self.window.ndim != 2 or self.window.shape[0] % 2 != 1:
            raise ShapeError(f"window must be (2H+1, d_x), got {self.window.shape}")
        if self.window.shape[1] != np.shape(self.A_hat)[0]:
            raise ShapeError("window width does not match the state dimension")

    @property
    def H(self):
        return (self.window.shape[0] - 1) // 2

    def w_back(self, i):
        """The estimate ``i`` steps before ``t`` (``i >= 1``)."""
        return self.window[-i]

    def cost_at(self, x, u):
        if isinstance(self.cost, lds.CostGen):
            return self.cost(self.t, x, u)
        return float(self.cost(x, u))


def _check_policy(M, ctx):
    M = np.asarray(M, dtype=float)
    if M.ndim != 3 or M.shape[0] != ctx.H:
        raise ShapeError(f"policy must have {ctx.H} blocks, got shape {M.shape}")
    return M


def transfer_matrix_psi(M, A_hat, B_hat, K, H, i):
    """``Psi_i = A'^i 1[i<=H] + sum_{j=0}^{H} A'^j B M[i-j-1] 1[1 <= i-j <= H]``."""
    if not 0 <= i <= 2 * H:
        raise InvalidInputError(f"Psi index must lie in [0, {2 * H}], got {i}")
    A_prime = np.asarray(A_hat) - np.asarray(B_hat) @ np.asarray(K)
    out = mat_power(A_prime, i) if i <= H else np.zeros_like(A_prime)
    for j in range(H + 1):
        if 1 <= i - j <= H:
            out = out + mat_power(A_prime, j) @ B_hat @ M[i - j - 1]
    return out


def surrogate_state(M, ctx):
    """``y_t = sum_{i=0}^{2H} Psi_i w_{t-1-i}``."""
    M = _check_policy(M, ctx)
    H = ctx.H
    y = np.zeros(ctx.window.shape[1])
    for i in range(2 * H + 1):
        y += transfer_matrix_psi(M, ctx.A_hat, ctx.B_hat, ctx.K, H, i) @ ctx.w_back(i + 1)
    return y


def _offset(M, window_back):
    # sum_{i=1}^{H} M[i-1] w_{t-i} with window_back[i-1] = w_{t-i}
    return np.einsum("lij,lj->i", M, window_back)


def surrogate_action(M, ctx, y=None):
    """``v_t = -K y_t + sum_{i=1}^{H} M[i-1] w_{t-i}``."""
    M = _check_policy(M, ctx)
    if y is None:
        y = surrogate_state(M, ctx)
    back = ctx.window[::-1][: ctx.H]
    return -np.asarray(ctx.K) @ y + _offset(M, back)


def surrogate_cost(M, ctx):
    y = surrogate_state(M, ctx)
    return ctx.cost_at(y, surrogate_action(M, ctx, y))


def _surrogate_pair(M, ctx):
    # Same y_t, v_t as above but by unrolling H+1 steps of the estimated
    # closed loop driven by w_hat + B_hat u~, where u~_s = sum_l M[l-1] w_{s-l}.
    H = ctx.H
    A_prime = ctx.A_hat - ctx.B_hat @ ctx.K
    rev = ctx.window[::-1]                     # rev[m] = w_{t-1-m}
    y = np.zeros(rev.shape[1])
    for j in range(H, -1, -1):
        u_tilde = _offset(M, rev[j + 1: j + 1 + H])
        y = A_prime @ y + rev[j] + ctx.B_hat @ u_tilde
    v = -ctx.K @ y + _offset(M, rev[:H])
    return y, v


def _fd_gradient(M, ctx):
    grad = np.zeros_like(M)
    Mp = M.copy()
    for idx in np.ndindex(M.shape):
        orig = Mp[idx]
        Mp[idx] = orig + FD_STEP
        y, v = _surrogate_pair(Mp, ctx)
        fp = ctx.cost_at(y, v)
        Mp[idx] = orig - FD_STEP
        y, v = _surrogate_pair(Mp, ctx)
        fm = ctx.cost_at(y, v)
        Mp[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * FD_STEP)
    return grad


def grad_surrogate(M, ctx, method="auto"):
    """Gradient of the surrogate loss with respect to every policy block.

    ``method="auto"`` uses the closed form when the cost is a
    :class:`nsc.lds.CostGen` and central finite differences otherwise.
    """
    M = _check_policy(M, ctx)
    if method == "fd" or (method == "auto" and not isinstance(ctx.cost, lds.CostGen)):
        return _fd_gradient(M, ctx)
    if not isinstance(ctx.cost, lds.CostGen):
        raise InvalidInputError("analytic gradient needs a CostGen cost")
    H = ctx.H
    K, B_hat = np.asarray(ctx.K), np.asarray(ctx.B_hat)
    A_prime = ctx.A_hat - B_hat @ K
    rev = ctx.window[::-1]
    y, v = _surrogate_pair(M, ctx)
    g_y, g_v = ctx.cost.grad(ctx.t, y, v)
    g_y = g_y - K.T @ g_v                      # v depends on y through -K y
    grad = np.einsum("i,lk->lik", g_v, rev[:H])
    s = g_y
    for j in range(H + 1):
        # y contains A'^j B_hat M[l-1] w_{t-1-j-l}
        p = B_hat.T @ s
        grad += np.einsum("i,lk->lik", p, rev[j + 1: j + 1 + H])
        s = A_prime.T @ s
    return grad


def project_policy(M, kappa, gamma):
    """Project each block onto its spectral ball of radius ``kappa^4 (1-gamma)^i``."""
    M = np.asarray(M, dtype=float)
    radii = policy_radii(kappa, gamma, M.shape[0])
    return np.stack([project_spectral_ball(M[i], radii[i]) for i in range(M.shape[0])])


def ogd_update(M, ctx, eta, kappa, gamma):
    if eta < 0:
        raise InvalidInputError(f"learning rate must be nonnegative, got {eta}")
    return project_policy(M - eta * grad_surrogate(M, ctx), kappa, gamma)


def act(M, x, K, window):
    """Control ``-K x + sum_i M[i-1] w_{t-i}`` from the last ``H`` estimates (oldest first)."""
    M = np.asarray(M, dtype=float)
    window = np.asarray(window, dtype=float)
    if window.shape != (M.shape[0], M.shape[2]):
        raise ShapeError(f"window must be {(M.shape[0], M.shape[2])}, got {window.shape}")
    return -np.asarray(K) @ np.asarray(x, dtype=float) + _offset(M, window[::-1])


class GPCController:
    """Step-by-step Phase-2 controller built on the module-level operations.

    The compiled loop in :func:`run_phase2` is the production path; this
    class exists for arbitrary callable costs and as an independent route
    for cross-checking it.
    """

    def __init__(self, A_hat, B_hat, K, H, eta, kappa, gamma, history=None):
        self.A_hat, self.B_hat, self.K = (np.asarray(m, dtype=float) for m in (A_hat, B_hat, K))
        self.H, self.eta, self.kappa, self.gamma = H, eta, kappa, gamma
        d_u, d_x = self.K.shape
        self.M = zero_policy(H, d_u, d_x)
        self.window = np.zeros((2 * H + 1, d_x)) if history is None else np.array(history, float)

    def act(self, x):
        return act(self.M, x, self.K, self.window[-self.H:])

    def observe(self, x, u, x_next, cost, t=0):
        """Record the disturbance estimate and take one projected gradient step."""
        ctx = SurrogateContext(self.A_hat, self.B_hat, self.K, self.window, cost, t)
        self.M = ogd_update(self.M, ctx, self.eta, self.kappa, self.gamma)
        w_hat = x_next - self.A_hat @ x - self.B_hat @ u
        self.window = np.vstack([self.window[1:], w_hat])
        return w_hat


def run_phase2(sys, A_hat, B_hat, K, dist, costs, t0, t1, x0, history, H, eta, kappa, gamma,
               M0=None, w=None):
    """Run the controller on the true system for steps ``t0 .. t1-1``.

    ``history`` holds the ``2H+1`` estimates preceding ``t0``. Returns
    ``(X, U, W, W_hat, C, M)``; ``X`` starts at ``x0`` and has ``t1-t0+1`` rows.
    """
    d_u, d_x = sys.d_u, sys.d_x
    M = zero_policy(H, d_u, d_x) if M0 is None else np.array(M0, dtype=float)
    W = dist.block(t0, t1) if w is None else np.asarray(w, dtype=float)
    Qc, Rc, qc, rc, c0, a, b = costs.kernel_args(t0, t1)
    X, U, W_hat, C = gpc_loop(
        sys.A, sys.B, np.asarray(A_hat, float), np.asarray(B_hat, float), np.asarray(K, float),
        np.ascontiguousarray(W), np.asarray(x0, dtype=float), np.asarray(history, dtype=float),
        M, policy_radii(kappa, gamma, H), float(eta), Qc, Rc, qc, rc, c0, a, b)
    return X, U, W, W_hat, C, M


@dataclass
class KnownSystemResult:
    trajectory: lds.Trajectory
    total_cost: float
    M: np.ndarray
    H: int
    eta: float


def run_known_system(sys, cert, dist, costs, T, H=None, eta=None, G=None, W=None):
    """Perturbation-based control with the true ``(A, B)``, so ``w_hat = w`` exactly.

    Defaults: ``H = ceil(ln(kappa^2 T) / gamma)``,
    ``eta = gamma / (kappa^3 G W sqrt(T))`` with ``G`` from the cost generator
    and ``W`` from the disturbance bound (both floored at 1).
    """
    rep = lds.check_strong_stability(sys, cert)
    if not rep:
        raise lds.PreconditionError(f"certificate check failed: {rep.violated}")
    kappa, gamma = cert.kappa, cert.gamma
    H = auto_memory(kappa, gamma, T) if H is None else int(H)
    G = max(1.0, costs.G if G is None else G)
    W = max(1.0, dist.W if W is None else W)
    eta = auto_learning_rate(G, W, T, kappa, gamma) if eta is None else float(eta)
    X, U, Wd, W_hat, C, M = run_phase2(
        sys, sys.A, sys.B, cert.K, dist, costs, 0, T, np.zeros(sys.d_x),
        np.zeros((2 * H + 1, sys.d_x)), H, eta, kappa, gamma)
    traj = lds.Trajectory(X, U, Wd, C, w_hat=W_hat, phase=np.full(T, 2))
    return KnownSystemResult(traj, float(C.sum()), M, H, eta)
