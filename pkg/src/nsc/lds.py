"""Linear dynamical systems, adversaries, and stability/controllability machinery.

The plant is ``x_{t+1} = A x_t + B u_t + w_t`` started from ``x_0 = 0``.
Disturbances are oblivious: each ``w_t`` is a pure function of ``(t, seed)``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._kernels import closed_loop_states
from .numerics import (
    RANK_TOL,
    InvalidInputError,
    ShapeError,
    as_matrix,
    sigma_min,
    spectral_norm,
)


class GenerationError(RuntimeError):
    """Instance synthesis ran out of resampling budget."""


class PreconditionError(ValueError):
    """An operation's mathematical precondition does not hold."""


class ConfigError(ValueError):
    """Invalid generator configuration."""


@dataclass(frozen=True)
class LinSystem:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ShapeError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]

    def closed_loop(self, K):
        return self.A - self.B @ K


@dataclass(frozen=True)
class StabilityCertificate:
    """Witness ``A - B K = Q L Q^{-1}`` of ``(kappa, gamma)``-strong stability.

    ``k`` and ``kappa_c``, when set, record that ``(A - B K, B)`` is
    ``(k, kappa_c)``-strongly controllable.
    """

    K: np.ndarray
    Q: np.ndarray
    L: np.ndarray
    kappa: float
    gamma: float
    k: int | None = None
    kappa_c: float | None = None


@dataclass
class Report:
    passed: bool
    margins: dict = field(default_factory=dict)
    violated: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_strong_stability(sys, cert, tol=1e-10):
    """Check every norm bound of the certificate and the decomposition residual.

    Margins are ``bound - value``; negative margins are listed in ``violated``.
    ``tol`` absorbs floating-point noise in the norm comparisons.
    """
    K, Q, L = (as_matrix(m) for m in (cert.K, cert.Q, cert.L))
    kappa, gamma = cert.kappa, cert.gamma
    margins = {}
    try:
        Qinv = np.linalg.inv(Q)
    except np.linalg.LinAlgError:
        return Report(False, {"Q_invertible": -np.inf}, ["Q_invertible"])
    resid = spectral_norm(sys.closed_loop(K) - Q @ L @ Qinv)
    margins["decomposition"] = 1e-8 * kappa - resid
    margins["L"] = (1.0 - gamma) - spectral_norm(L)
    for name, mat in (("A", sys.A), ("B", sys.B), ("K", K), ("Q", Q), ("Q_inv", Qinv)):
        margins[name] = kappa - spectral_norm(mat)
    margins["kappa>=1"] = kappa - 1.0
    margins["gamma"] = min(gamma, 1.0 - gamma)
    violated = [k for k, m in margins.items()
                if m < -tol or (k == "gamma" and m <= 0)]
    return Report(not violated, margins, violated)


def controllability_matrix(A_prime, B, k):
    """``[B, A'B, ..., A'^{k-1}B]`` of shape ``d_x x (k d_u)``."""
    A_prime = as_matrix(A_prime, "A'")
    B = as_matrix(B, "B")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if A_prime.shape[0] != A_prime.shape[1] or B.shape[0] != A_prime.shape[0]:
        raise ShapeError(f"incompatible shapes A' {A_prime.shape}, B {B.shape}")
    blocks = [B]
    for _ in range(k - 1):
        blocks.append(A_prime @ blocks[-1])
    return np.hstack(blocks)


@dataclass
class ControllabilityReport:
    passed: bool
    sigma_min: float
    full_row_rank: bool
    k: int
    kappa_c: float

    def __bool__(self):
        return self.passed


def check_strong_controllability(A_prime, B, k, kappa_c):
    """Pass iff ``C_k`` has full row rank and ``sigma_min(C_k)^2 >= 1/kappa_c``."""
    C = controllability_matrix(A_prime, B, k)
    s = sigma_min(C) if C.shape[0] <= C.shape[1] else 0.0
    full = C.shape[0] <= C.shape[1] and s >= RANK_TOL
    ok = full and s * s >= 1.0 / kappa_c
    return ControllabilityReport(bool(ok), s, bool(full), k, kappa_c)


@dataclass
class LiftResult:
    """Open-loop inputs ``u`` (ordered like the columns of ``C_k``) with ``C_k u = x``."""

    u: np.ndarray
    u_prime: np.ndarray
    residual: float
    ratio: float


def lift_controls(sys, K, k, x, kappa_c=None):
    """Map a closed-loop reaching input for ``(A - BK, B)`` to an open-loop one for ``(A, B)``.

    The min-norm ``u'`` solving ``C'_k u' = x`` is played through the
    closed loop; the open-loop input at each application step is
    ``u'_i - K z_i`` where ``z`` is the closed-loop state. Both input stacks
    are returned in ``C_k`` column order, block ``j`` multiplying
    ``A^j B``, so the first block applied is the last one in the stack.
    """
    K = as_matrix(K, "K")
    x = np.asarray(x, dtype=float).reshape(-1)
    A_prime = sys.closed_loop(K)
    rep = check_strong_controllability(A_prime, sys.B, k, np.inf if kappa_c is None else kappa_c)
    if not rep.passed:
        raise PreconditionError(
            f"(A-BK, B) is not ({k}, {kappa_c})-strongly controllable "
            f"(sigma_min={rep.sigma_min:.3e})")
    C_prime = controllability_matrix(A_prime, sys.B, k)
    u_prime, *_ = np.linalg.lstsq(C_prime, x, rcond=None)
    du = sys.d_u
    blocks_p = u_prime.reshape(k, du)
    blocks = np.empty_like(blocks_p)
    z = np.zeros(sys.d_x)
    for i in range(k):                       # application order
        col = k - 1 - i
        v_prime = blocks_p[col]
        blocks[col] = v_prime - K @ z
        z = A_prime @ z + sys.B @ v_prime
    u = blocks.reshape(-1)
    C = controllability_matrix(sys.A, sys.B, k)
    xn = np.linalg.norm(x)
    residual = float(np.linalg.norm(C @ u - x))
    ratio = float(np.linalg.norm(u) / xn) if xn > 0 else 0.0
    return LiftResult(u, u_prime, residual, ratio)


# -- disturbances -----------------------------------------------------------

DISTURBANCE_KINDS = ("zero", "constant", "sinusoid", "uniform-bounded",
                     "rademacher-scaled", "gaussian-clipped")


@dataclass(frozen=True)
class DisturbanceGen:
    """Bounded oblivious disturbance sequence; ``||w_t|| <= W`` for every ``t``."""

    kind: str
    W: float
    dim: int
    seed: int = 0
    period: float = 20.0
    direction: tuple | None = None
    sigma: float | None = None

    def block(self, t0, t1):
        """Disturbances for ``t = t0 .. t1-1`` as a ``(t1-t0, dim)`` array."""
        n, d, W = t1 - t0, self.dim, self.W
        if n <= 0:
            return np.zeros((0, d))
        if self.kind == "zero" or W == 0:
            return np.zeros((n, d))
        if self.kind == "constant":
            return np.tile(W * self._unit_direction(), (n, 1))
        if self.kind == "sinusoid":
            t = np.arange(t0, t1, dtype=float)[:, None]
            phase = 2.0 * np.pi * np.arange(d) / d
            return W / np.sqrt(d) * np.sin(2.0 * np.pi * t / self.period + phase)
        if self.kind == "uniform-bounded":
            cube = 2.0 * rng.uniform(self.seed, t0, t1, d) - 1.0
            return W / np.sqrt(d) * cube
        if self.kind == "rademacher-scaled":
            signs = rng.rademacher(self.seed, t0, t1, d, stream=rng.STREAM_DISTURBANCE)
            return W / np.sqrt(d) * signs
        if self.kind == "gaussian-clipped":
            u = rng.uniform(self.seed, t0, t1, 2 * d)
            u1, u2 = 1.0 - u[:, :d], u[:, d:]
            g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
            sigma = self.sigma if self.sigma is not None else W / np.sqrt(d)
            g *= sigma
            norms = np.linalg.norm(g, axis=1, keepdims=True)
            return g * np.minimum(1.0, W / np.maximum(norms, 1e-300))
        raise ConfigError(f"unknown disturbance kind {self.kind!r}")

    def at(self, t):
        return self.block(t, t + 1)[0]

    def _unit_direction(self):
        if self.direction is None:
            v = np.ones(self.dim)
        else:
            v = np.asarray(self.direction, dtype=float)
            if v.shape != (self.dim,):
                raise ConfigError(f"direction must have length {self.dim}")
        nv = np.linalg.norm(v)
        if nv == 0:
            raise ConfigError("direction must be nonzero")
        return v / nv


def make_disturbance(kind, W, dim, params=None, seed=0):
    params = dict(params or {})
    if kind not in DISTURBANCE_KINDS:
        raise ConfigError(f"unknown disturbance kind {kind!r}")
    if W < 0 or not np.isfinite(W):
        raise ConfigError(f"W must be a finite nonnegative bound, got {W}")
    allowed = {"period", "direction", "sigma"}
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown disturbance parameters {sorted(extra)}")
    if "direction" in params and params["direction"] is not None:
        params["direction"] = tuple(float(v) for v in params["direction"])
    if params.get("period", 20.0) <= 0:
        raise ConfigError("period must be positive")
    return DisturbanceGen(kind, float(W), int(dim), int(seed), **params)


# -- costs ------------------------------------------------------------------

COST_KINDS = ("quadratic", "time-varying-quadratic", "linear-plus-quadratic")


@dataclass(frozen=True)
class CostGen:
    """Convex costs ``c_t(x,u) = a_t x'Qx + b_t u'Ru + q'x + r'u + c0``.

    ``weights`` gives ``(a_t, b_t)``; the linear and constant terms come from
    a tracking target for the linear-plus-quadratic kind. ``G`` bounds the
    gradient as ``||grad c_t(x,u)|| <= G D`` whenever ``||(x, u)|| <= D``
    and ``D >= 1``.
    """

    kind: str
    Q: np.ndarray
    R: np.ndarray
    q: np.ndarray
    r: np.ndarray
    c0: float
    G: float
    D: float = 1.0
    period: float = 50.0
    amplitude: float = 0.5

    def weights(self, t0, t1):
        n = t1 - t0
        if self.kind != "time-varying-quadratic":
            return np.ones(n), np.ones(n)
        phase = 2.0 * np.pi * np.arange(t0, t1) / self.period
        return 1.0 + self.amplitude * np.sin(phase), 1.0 + self.amplitude * np.cos(phase)

    def __call__(self, t, x, u):
        a, b = self.weights(t, t + 1)
        return float(a[0] * x @ self.Q @ x + b[0] * u @ self.R @ u
                     + self.q @ x + self.r @ u + self.c0)

    def grad(self, t, x, u):
        a, b = self.weights(t, t + 1)
        return (2.0 * a[0] * self.Q @ x + self.q, 2.0 * b[0] * self.R @ u + self.r)

    def evaluate(self, t0, X, U):
        """Costs for consecutive steps starting at ``t0`` (rows of ``X``, ``U``)."""
        a, b = self.weights(t0, t0 + len(U))
        return (a * np.einsum("ti,ij,tj->t", X, self.Q, X)
                + b * np.einsum("ti,ij,tj->t", U, self.R, U)
                + X @ self.q + U @ self.r + self.c0)

    def kernel_args(self, t0, t1):
        a, b = self.weights(t0, t1)
        return self.Q, self.R, self.q, self.r, float(self.c0), a, b

    def is_pure_quadratic(self):
        return not np.any(self.q) and not np.any(self.r) and self.c0 == 0

    def spot_check_gradient(self, n_samples=200, seed=0, t_max=1000):
        """Largest ``||grad|| / (G D)`` over random ``(t, x, u)`` with ``||(x,u)|| <= D``."""
        gen = rng.generator(seed, rng.STREAM_VERIFY)
        dx, du = self.Q.shape[0], self.R.shape[0]
        worst = 0.0
        for _ in range(n_samples):
            z = gen.normal(size=dx + du)
            z *= self.D * gen.uniform() ** (1.0 / (dx + du)) / np.linalg.norm(z)
            t = int(gen.integers(0, t_max))
            gx, gu = self.grad(t, z[:dx], z[dx:])
            worst = max(worst, np.linalg.norm(np.concatenate([gx, gu])) / (self.G * self.D))
        return worst


def _check_psd(M, name):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name} must be square")
    if not np.allclose(M, M.T, atol=1e-12):
        raise ConfigError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) < -1e-12:
        raise ConfigError(f"{name} must be positive semidefinite")
    return (M + M.T) / 2


def make_costs(kind, d_x, d_u, params=None):
    params = dict(params or {})
    if kind not in COST_KINDS:
        raise ConfigError(f"unknown cost kind {kind!r}")
    allowed = {"Q", "R", "period", "amplitude", "x_ref", "u_ref", "D"}
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown cost parameters {sorted(extra)}")
    Q = _check_psd(params.get("Q", np.eye(d_x)), "Q")
    R = _check_psd(params.get("R", np.eye(d_u)), "R")
    if Q.shape != (d_x, d_x) or R.shape != (d_u, d_u):
        raise ConfigError(f"cost matrices must be {d_x}x{d_x} and {d_u}x{d_u}")
    period = float(params.get("period", 50.0))
    amplitude = float(params.get("amplitude", 0.5))
    if not 0 <= amplitude < 1 or period <= 0:
        raise ConfigError("time-varying weights need 0 <= amplitude < 1 and period > 0")
    D = float(params.get("D", 1.0))
    if D < 1:
        raise ConfigError("D must be >= 1")
    q, r, c0 = np.zeros(d_x), np.zeros(d_u), 0.0
    if kind == "linear-plus-quadratic":
        x_ref = np.asarray(params.get("x_ref", np.ones(d_x)), dtype=float)
        u_ref = np.asarray(params.get("u_ref", np.zeros(d_u)), dtype=float)
        q, r = -2.0 * Q @ x_ref, -2.0 * R @ u_ref
        c0 = float(x_ref @ Q @ x_ref + u_ref @ R @ u_ref)
    scale = max(spectral_norm(Q), spectral_norm(R))
    if kind == "time-varying-quadratic":
        scale *= 1.0 + amplitude
    G = 2.0 * scale + float(np.linalg.norm(np.concatenate([q, r])))
    return CostGen(kind, Q, R, q, r, c0, max(G, 1.0), D, period, amplitude)


# -- simulation ---------------------------------------------------------------

@dataclass
class Trajectory:
    """Aligned record of a run: ``states`` has one more row than the rest."""

    states: np.ndarray
    controls: np.ndarray
    disturbances: np.ndarray
    costs: np.ndarray
    w_hat: np.ndarray | None = None
    phase: np.ndarray | None = None

    @property
    def T(self):
        return len(self.controls)

    @property
    def total_cost(self):
        return float(np.sum(self.costs))

    def replay_residual(self, sys):
        """Max relative deviation of ``x_{t+1} - A x_t - B u_t`` from ``w_t``."""
        X, U, W = self.states, self.controls, self.disturbances
        implied = X[1:] - X[:-1] @ sys.A.T - U @ sys.B.T
        scale = max(1.0, float(np.max(np.abs(X))))
        return float(np.max(np.abs(implied - W), initial=0.0)) / scale


def step(sys, x, u, w):
    x, u, w = (np.asarray(v, dtype=float).reshape(-1) for v in (x, u, w))
    if x.shape[0] != sys.d_x or w.shape[0] != sys.d_x or u.shape[0] != sys.d_u:
        raise ShapeError(
            f"expected x, w of length {sys.d_x} and u of length {sys.d_u}, "
            f"got {x.shape[0]}, {w.shape[0]}, {u.shape[0]}")
    return sys.A @ x + sys.B @ u + w


def rollout(sys, controller, dist, costs, T):
    """Simulate ``T`` steps from ``x_0 = 0`` with ``u_t = controller(x_t)``."""
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    W = dist.block(0, T)
    X = np.zeros((T + 1, sys.d_x))
    U = np.zeros((T, sys.d_u))
    C = np.zeros(T)
    for t in range(T):
        u = np.asarray(controller(X[t]), dtype=float).reshape(-1)
        if u.shape[0] != sys.d_u:
            raise ShapeError(f"controller returned {u.shape[0]} controls, expected {sys.d_u}")
        U[t] = u
        C[t] = costs(t, X[t], u)
        X[t + 1] = step(sys, X[t], u, W[t])
    return Trajectory(X, U, W, C)


def rollout_linear(sys, K, dist, costs, T, t0=0, x0=None):
    """Fast path of :func:`rollout` for ``u_t = -K x_t`` over steps ``t0 .. t0+T-1``."""
    K = as_matrix(K, "K")
    W = dist.block(t0, t0 + T)
    x0 = np.zeros(sys.d_x) if x0 is None else np.asarray(x0, dtype=float)
    X = closed_loop_states(np.ascontiguousarray(sys.closed_loop(K)),
                           np.ascontiguousarray(sys.B), np.ascontiguousarray(W),
                           np.zeros((T, sys.d_u)), x0)
    U = -X[:-1] @ K.T
    return Trajectory(X, U, W, costs.evaluate(t0, X[:-1], U))


def unrolled_state(A_prime, B, w, u_tilde, t):
    """``sum_{i=0}^{t} A'^{t-i} (w_i + B u~_i)``, the state ``x_{t+1}`` from ``x_0 = 0``."""
    A_prime = as_matrix(A_prime, "A'")
    B = as_matrix(B, "B")
    w = np.asarray(w, dtype=float)
    u_tilde = np.asarray(u_tilde, dtype=float)
    if len(w) < t + 1 or len(u_tilde) < t + 1:
        raise ShapeError(f"sequences must have length >= {t + 1}")
    if w.shape[1] != A_prime.shape[0] or u_tilde.shape[1] != B.shape[1]:
        raise ShapeError("sequence widths do not match A', B")
    x = np.zeros(A_prime.shape[0])
    for i in range(t + 1):
        x = A_prime @ x + w[i] + B @ u_tilde[i]
    return x


# -- instances ----------------------------------------------------------------

def _random_orthogonal(gen, d):
    Z = gen.normal(size=(d, d))
    Qm, R = np.linalg.qr(Z)
    return Qm * np.sign(np.diag(R))


def synth_stable_instance(d_x, d_u, kappa, gamma, seed, k=None, kappa_c=None,
                          max_tries=2000):
    """Random ``(A, B)`` with a ``(kappa, gamma)``-strongly stable ``K``.

    ``L`` is diagonal with entries uniform in ``[-(1-gamma), 1-gamma]``;
    ``Q`` is a random rotation pair with singular values in
    ``[kappa^-1/2, kappa^1/2]``; ``A = Q L Q^{-1} + B K``. Samples are
    rejected until all certificate norms hold and ``(A - BK, B)`` is
    ``(k, kappa_c)``-strongly controllable (defaults ``k = d_x``,
    ``kappa_c = kappa``).
    """
    if kappa < 1 or not 0 < gamma < 1:
        raise InvalidInputError("need kappa >= 1 and 0 < gamma < 1")
    k = d_x if k is None else int(k)
    kappa_c = kappa if kappa_c is None else float(kappa_c)
    gen = rng.generator(seed, rng.STREAM_INSTANCE)
    c = np.sqrt(kappa)
    for _ in range(max_tries):
        L = np.diag(gen.uniform(-(1 - gamma), 1 - gamma, size=d_x))
        s = np.exp(gen.uniform(-np.log(c), np.log(c), size=d_x))
        Q = (_random_orthogonal(gen, d_x) * s) @ _random_orthogonal(gen, d_x).T
        Qinv = np.linalg.inv(Q)
        A_prime = Q @ L @ Qinv
        B = gen.normal(size=(d_x, d_u))
        B *= gen.uniform(0.6, 1.0) * kappa / spectral_norm(B)
        budget = kappa - spectral_norm(A_prime)
        if budget <= 0:
            continue
        K = gen.normal(size=(d_u, d_x))
        K *= gen.uniform(0.2, 1.0) * min(kappa, budget / spectral_norm(B)) / spectral_norm(K)
        A = A_prime + B @ K
        sys = LinSystem(A, B)
        cert = StabilityCertificate(K, Q, L, float(kappa), float(gamma), k, kappa_c)
        if not check_strong_stability(sys, cert):
            continue
        if not check_strong_controllability(sys.closed_loop(K), B, k, kappa_c):
            continue
        return sys, cert
    raise GenerationError(
        f"no ({kappa}, {gamma})-stable, ({k}, {kappa_c})-controllable instance "
        f"with d_x={d_x}, d_u={d_u} after {max_tries} tries (seed={seed})")

