"""Numerical checks of the perturbation, stability and concentration inequalities.

Every check returns a :class:`CheckResult` carrying ``lhs``, ``rhs``, the
margin ``rhs - lhs`` and a status: ``pass``, ``fail``, or ``skip`` when a
precondition of the inequality does not hold on the given input. Checks
with several sub-inequalities report the tightest one (smallest relative
margin) and list all of them in ``details``.

The ``suite_*`` functions draw compliant random instances from seeded
streams and are what the ``verify`` command runs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import gpc, lds, rng, sysid
from ._kernels import closed_loop_states, gpc_loop
from .numerics import sigma_min, spectral_norm

TAIL_TOL = 1e-12
SIM_RTOL = 1e-9
LIFT_RTOL = 1e-8

# (d_x, d_u, kappa, gamma) shapes that the instance sampler handles quickly
INSTANCE_SHAPES = (
    (2, 1, 2.0, 0.3), (2, 2, 2.0, 0.3), (3, 2, 2.0, 0.3), (3, 3, 2.0, 0.3),
    (3, 3, 3.0, 0.2), (4, 2, 3.0, 0.2), (4, 3, 3.0, 0.2), (2, 2, 2.0, 0.5),
)

CSV_COLUMNS = ("check", "instance", "lhs", "rhs", "margin", "status", "detail")


@dataclass
class CheckResult:
    check: str
    instance: int
    lhs: float
    rhs: float
    status: str
    reason: str = ""
    details: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.rhs - self.lhs if self.status != "skip" else float("nan")

    @property
    def passed(self):
        return self.status == "pass"

    @property
    def skipped(self):
        return self.status == "skip"

    def row(self):
        return {"check": self.check, "instance": self.instance, "lhs": self.lhs,
                "rhs": self.rhs, "margin": self.margin, "status": self.status,
                "detail": self.reason}


def _skip(check, instance, reason, **details):
    return CheckResult(check, instance, float("nan"), float("nan"), "skip", reason, details)


def _compare(check, instance, pairs, tol=0.0, **details):
    """``pairs`` is a list of ``(label, lhs, rhs)``; passes iff every ``lhs <= rhs + tol``."""
    ok = all(lhs <= rhs + tol for _, lhs, rhs in pairs)

    def rel(p):
        return (p[2] - p[1]) / max(abs(p[2]), 1e-300)

    label, lhs, rhs = min(pairs, key=rel)
    details.update({name: (float(a), float(b)) for name, a, b in pairs})
    return CheckResult(check, instance, float(lhs), float(rhs), "pass" if ok else "fail",
                       label, details)


def certified_instance(seed):
    """A seeded strongly stable, strongly controllable instance from :data:`INSTANCE_SHAPES`."""
    d_x, d_u, kappa, gamma = INSTANCE_SHAPES[seed % len(INSTANCE_SHAPES)]
    return lds.synth_stable_instance(d_x, d_u, kappa, gamma, seed)


def _random_direction(gen, shape):
    Z = gen.normal(size=shape)
    return Z / spectral_norm(Z)


# -- series perturbation ----------------------------------------------------

def series_truncation(gamma, tol=TAIL_TOL):
    """Smallest ``T`` with ``sum_{t>T} t (1-gamma)^{t-1} <= tol``, and that tail sum."""
    rho = 1.0 - gamma
    T = 1
    while True:
        tail = rho**T * ((T + 1) - T * rho) / gamma**2
        if tail <= tol:
            return T, tail
        T += max(1, T // 4)


def check_series_perturbation(L, dL, gamma, T_max=None, instance=0):
    """``sum_t ||(L+dL)^t - L^t|| <= ||dL|| / gamma^2``.

    Each term is at most ``t (1-gamma)^{t-1} ||dL||``, so the sum beyond
    ``T_max`` is bounded and added to the left-hand side.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    dL = np.atleast_2d(np.asarray(dL, dtype=float))
    name = "series_perturbation"
    r = 1.0 - gamma
    nL, nP = spectral_norm(L), spectral_norm(L + dL)
    if nL > r * (1 + 1e-12) or nP > r * (1 + 1e-12):
        return _skip(name, instance, f"||L||={nL:.6g} or ||L+dL||={nP:.6g} exceeds 1-gamma={r:.6g}")
    nd = spectral_norm(dL)
    if T_max is None:
        T_max, tail = series_truncation(gamma)
    else:
        rho = r
        tail = rho**T_max * ((T_max + 1) - T_max * rho) / gamma**2
    total = 0.0
    P, Pp = np.eye(len(L)), np.eye(len(L))
    for _ in range(T_max):
        P, Pp = P @ L, Pp @ (L + dL)
        total += spectral_norm(Pp - P)
    lhs = total + tail * nd
    return _compare(name, instance, [("sum", lhs, nd / gamma**2)], T_max=T_max)


def suite_series_perturbation(n=100, seed=0):
    out = []
    for i in range(n):
        gen = rng.generator(seed * 100003 + i, rng.STREAM_VERIFY)
        d = int(gen.integers(1, 5))
        gamma = float(gen.uniform(0.1, 0.9))
        r = 1.0 - gamma
        L = gen.uniform(0, 1) * r * _random_direction(gen, (d, d))
        L2 = gen.uniform(0, 1) * r * _random_direction(gen, (d, d))
        # mix toward L so small perturbations are covered too
        lam = gen.uniform(0, 1) ** 2
        out.append(check_series_perturbation(L, lam * (L2 - L), gamma, instance=i))
    return out


# -- perturbed linear solve -------------------------------------------------

def check_linear_solve(A, dA, b, db, instance=0):
    """``||x* - x_hat|| <= (||db|| + ||dA|| ||x*||) / (sigma_min(A) - ||dA||)``."""
    A, dA = np.atleast_2d(A).astype(float), np.atleast_2d(dA).astype(float)
    b, db = np.atleast_1d(b).astype(float), np.atleast_1d(db).astype(float)
    name = "linear_solve"
    s, nd = sigma_min(A), spectral_norm(dA)
    if not nd < s:
        return _skip(name, instance, f"||dA||={nd:.6g} >= sigma_min(A)={s:.6g}")
    x = np.linalg.solve(A, b)
    x_hat = np.linalg.solve(A + dA, b + db)
    lhs = float(np.linalg.norm(x - x_hat))
    rhs = (np.linalg.norm(db) + nd * np.linalg.norm(x)) / (s - nd)
    # rounding in the two solves
    tol = 64 * np.finfo(float).eps * max(1.0, np.linalg.norm(x)) * np.linalg.cond(A)
    return _compare(name, instance, [("error", lhs, rhs)], tol=tol)


def suite_linear_solve(n=100, seed=0):
    out = []
    for i in range(n):
        gen = rng.generator(seed * 100003 + i, rng.STREAM_VERIFY + 16)
        d = int(gen.integers(1, 6))
        U, _ = np.linalg.qr(gen.normal(size=(d, d)))
        V, _ = np.linalg.qr(gen.normal(size=(d, d)))
        svals = gen.uniform(0.5, 2.0, size=d)
        A = (U * svals) @ V.T
        dA = gen.uniform(0, 0.95) * svals.min() * _random_direction(gen, (d, d))
        b = gen.normal(size=d)
        db = gen.uniform(0, 0.5) * gen.normal(size=d)
        out.append(check_linear_solve(A, dA, b, db, instance=i))
    return out


# -- stability preservation -------------------------------------------------

def check_stability_preservation(sys, cert, eps, A_hat=None, B_hat=None, seed=0, instance=0):
    """Same ``Q`` certifies ``A_hat - B_hat K``: ``||L_hat|| <= 1-gamma+2 kappa^3 eps``.

    Without explicit estimates, perturbations of spectral norm exactly
    ``eps`` are sampled.
    """
    name = "stability_preservation"
    if A_hat is None or B_hat is None:
        gen = rng.generator(seed, rng.STREAM_VERIFY + 32)
        A_hat = sys.A + eps * _random_direction(gen, sys.A.shape)
        B_hat = sys.B + eps * _random_direction(gen, sys.B.shape)
    A_hat, B_hat = np.atleast_2d(A_hat).astype(float), np.atleast_2d(B_hat).astype(float)
    eA, eB = spectral_norm(A_hat - sys.A), spectral_norm(B_hat - sys.B)
    if max(eA, eB) > eps * (1 + 1e-12):
        return _skip(name, instance, f"perturbation {max(eA, eB):.6g} exceeds eps={eps:.6g}")
    Qinv = np.linalg.inv(cert.Q)
    L_hat = Qinv @ (A_hat - B_hat @ cert.K) @ cert.Q
    k3 = cert.kappa**3
    tol = 1e-12 * max(1.0, cert.kappa**4)
    return _compare(name, instance, [
        ("norm_L_hat", spectral_norm(L_hat), 1.0 - cert.gamma + 2 * k3 * eps),
        ("L_hat_minus_L", spectral_norm(L_hat - cert.L), 2 * k3 * eps),
    ], tol=tol, eps=eps)


def suite_stability_preservation(n=100, seed=0):
    out = []
    for i in range(n):
        sys, cert = certified_instance(seed * 1009 + i)
        gen = rng.generator(seed * 100003 + i, rng.STREAM_VERIFY + 48)
        eps = float(10 ** gen.uniform(-4, -0.5))
        out.append(check_stability_preservation(sys, cert, eps, seed=seed * 100003 + i,
                                                instance=i))
    return out


# -- simulation identity ----------------------------------------------------

def replay_fictitious(cfg, traj, est, instance_=None):
    """Re-run the Phase-2 controller on ``(A_hat, B_hat)`` driven by ``w_hat``.

    Returns ``(t0, X, U, C)`` for the replay.
    """
    sys, cert = cfg.make_instance() if instance_ is None else instance_
    costs = cfg.make_costs()
    H, T = cfg.H, cfg.T
    t0 = int(np.argmax(traj.phase == 2))
    history = np.zeros((2 * H + 1, sys.d_x))
    if t0 > 0:
        history[-1] = traj.w_hat[t0 - 1]
    A_hat, B_hat = est
    w_hat = np.ascontiguousarray(traj.w_hat[t0:T])
    Qc, Rc, qc, rc, c0, a, b = costs.kernel_args(t0, T)
    X, U, _, C = gpc_loop(
        A_hat, B_hat, A_hat, B_hat, np.asarray(cert.K, dtype=float), w_hat,
        np.array(traj.states[t0]), history, gpc.zero_policy(H, sys.d_u, sys.d_x),
        gpc.policy_radii(cfg.kappa, cfg.gamma, H), float(cfg.eta), Qc, Rc, qc, rc, c0, a, b)
    return t0, X, U, C


def check_simulation(cfg, result=None, instance=0, inject=None):
    """Phase-2 states, controls and costs coincide with the fictitious-system replay."""
    from .pipeline import run_algorithm1

    name = "simulation"
    if result is None:
        result = run_algorithm1(cfg, inject=inject, compare=False)
    report, traj, est = result
    if est is not None:
        model = (est.A_hat, est.B_hat)
    else:
        if inject is None:
            return _skip(name, instance, "no model available for replay")
        model = tuple(np.asarray(m, dtype=float) for m in inject)
    t0, X, U, C = replay_fictitious(cfg, traj, model)
    Xr, Ur, Cr = traj.states[t0:], traj.controls[t0:], traj.costs[t0:]
    scale_x = max(1.0, float(np.max(np.abs(Xr))))
    scale_u = max(1.0, float(np.max(np.abs(Ur))))
    dx = float(np.max(np.abs(X - Xr))) / scale_x
    du = float(np.max(np.abs(U - Ur))) / scale_u
    dc = abs(float(np.sum(C)) - float(np.sum(Cr))) / max(1.0, abs(float(np.sum(Cr))))
    return _compare(name, instance, [
        ("states", dx, SIM_RTOL), ("controls", du, SIM_RTOL), ("total_cost", dc, SIM_RTOL),
    ], t0=t0)


def suite_simulation(cfg, n=20, seed=0):
    return [check_simulation(cfg.with_T(cfg.T, seed=seed + i), instance=i) for i in range(n)]


# -- exploration bounds -----------------------------------------------------

def exploration_bound(kappa, gamma, W, d_u, scale=1.0):
    """``(||x||, ||u||)`` bounds during exploration, proof form.

    ``||x_t|| <= kappa^2 gamma^-1 (W + kappa s sqrt(d_u))`` and
    ``||u_t|| <= kappa ||x||_max + s sqrt(d_u)`` for signs of magnitude ``s``.
    """
    eta_n = scale * math.sqrt(d_u)
    x_b = kappa**2 / gamma * (W + kappa * eta_n)
    return x_b, kappa * x_b + eta_n


def check_exploration(sys, cert, T0, seeds, dist, scale=1.0, instance=0):
    """State and control norms under sign exploration stay below the proof-form bounds.

    The displayed bounds ``sqrt(n) kappa^3 W / gamma`` and
    ``2 sqrt(n) kappa^4 W / gamma`` are reported in ``details`` along with
    whether they held, but only the proof form is asserted.
    """
    name = "exploration"
    x_max = u_max = 0.0
    for s in seeds:
        traj, _ = sysid.explore(sys, cert.K, T0, 1 if T0 > 1 else 0, dist, s, scale)
        x_max = max(x_max, float(np.max(np.linalg.norm(traj.states, axis=1))))
        u_max = max(u_max, float(np.max(np.linalg.norm(traj.controls, axis=1))))
    kappa, gamma = cert.kappa, cert.gamma
    xb, ub = exploration_bound(kappa, gamma, dist.W, sys.d_u, scale)
    n = max(sys.d_x, sys.d_u)
    shown_x = math.sqrt(n) * kappa**3 / gamma * dist.W
    shown_u = 2 * math.sqrt(n) * kappa**4 / gamma * dist.W
    tol = 1e-12 * max(1.0, xb)
    return _compare(name, instance, [("state", x_max, xb), ("control", u_max, ub)], tol=tol,
                    displayed_state=(x_max, shown_x), displayed_control=(u_max, shown_u),
                    displayed_holds=bool(x_max <= shown_x and u_max <= shown_u))


def suite_exploration(n=20, seed=0, T0=500):
    out = []
    for i in range(n):
        sys, cert = certified_instance(seed * 1009 + i)
        kind = ("sinusoid", "uniform-bounded", "rademacher-scaled", "constant")[i % 4]
        dist = lds.make_disturbance(kind, 1.0, sys.d_x, seed=seed * 1009 + i)
        out.append(check_exploration(sys, cert, T0, [seed * 1009 + i], dist, instance=i))
    return out


# -- Phase-2 bounds ---------------------------------------------------------

def phase2_eps_limit(kappa, gamma):
    return 1e-3 * kappa**-10 * gamma**2


def check_phase2_bounds(cfg, result, instance=0):
    """State, estimation-error and estimate norms during Phase 2.

    Skipped unless the spectral recovery error is within
    ``1e-3 kappa^-10 gamma^2``. ``n`` is ``max(d_x, d_u)`` and ``W`` is
    floored at 1.
    """
    name = "phase2_bounds"
    sys, _ = cfg.make_instance()
    report, traj, est = result
    if est is not None:
        A_hat, B_hat = est.A_hat, est.B_hat
    else:
        # injected model: recover it from the recorded estimates
        A_hat = B_hat = None
    eps = (max(spectral_norm(A_hat - sys.A), spectral_norm(B_hat - sys.B))
           if A_hat is not None else max(report.eps_A, report.eps_B))
    limit = phase2_eps_limit(cfg.kappa, cfg.gamma)
    if eps > limit:
        return _skip(name, instance, f"precondition not met: eps={eps:.3e} > {limit:.3e}")
    kappa, gamma = cfg.kappa, cfg.gamma
    n = max(sys.d_x, sys.d_u)
    W = max(cfg.W, 1.0)
    idx = traj.phase == 2
    X = traj.states[:-1][idx]
    err = np.linalg.norm(traj.disturbances[idx] - traj.w_hat[idx], axis=1)
    t0 = int(np.argmax(idx))
    w_prev = traj.w_hat[max(t0 - 1, 0): len(traj.phase) - 1]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(X))))
    return _compare(name, instance, [
        ("state", float(np.max(np.linalg.norm(X, axis=1))),
         4 * math.sqrt(n) * kappa**10 / gamma**3 * W),
        ("w_error", float(np.max(err)), 20 * math.sqrt(n) * kappa**11 / gamma**3 * W * eps),
        ("w_hat", float(np.max(np.linalg.norm(w_prev, axis=1))) if len(w_prev) else 0.0,
         2 * math.sqrt(n) * kappa**3 / gamma * W),
    ], tol=tol, eps=eps)


def suite_phase2_bounds(cfg, n=5, seed=0):
    """Compliant runs: the true model perturbed within the precondition, plus one natural run."""
    from .pipeline import run_algorithm1

    out = []
    for i in range(n):
        c = cfg.with_T(cfg.T, seed=seed + i)
        sys, _ = c.make_instance()
        gen = rng.generator(seed + i, rng.STREAM_VERIFY + 64)
        eps = phase2_eps_limit(c.kappa, c.gamma) * (0.0 if i == 0 else gen.uniform(0.1, 1.0))
        A_hat = sys.A + eps * _random_direction(gen, sys.A.shape)
        B_hat = sys.B + eps * _random_direction(gen, sys.B.shape)
        res = run_algorithm1(c, inject=(A_hat, B_hat), compare=False)
        est = sysid.SysIdEstimate([], np.zeros(0), np.zeros(0), A_hat, B_hat,
                                  A_hat - B_hat @ c.make_instance()[1].K)
        out.append(check_phase2_bounds(c, (res[0], res[1], est), instance=i))
    res = run_algorithm1(cfg.with_T(cfg.T, seed=seed), compare=False)
    out.append(check_phase2_bounds(cfg.with_T(cfg.T, seed=seed), res, instance=n))
    return out


# -- moment concentration ---------------------------------------------------

def moment_errors(sys, K, k, T0, dist, seed, scale=1.0):
    """``max_j ||N_j - (A')^j B||`` for one exploration run."""
    traj, eta = sysid.explore(sys, K, T0, k, dist, seed, scale)
    N = sysid.estimate_moments(traj.states, eta, k, T0, scale)
    A_prime = sys.closed_loop(K)
    P = sys.B.copy()
    worst = 0.0
    for j in range(k + 1):
        worst = max(worst, spectral_norm(N[j] - P))
        P = A_prime @ P
    return worst


def concentration_bound(kappa, gamma, W, d_x, d_u, k, T0, delta):
    """``n kappa^3 gamma^-1 W0 sqrt(8 ln(m n k / delta) / (T0 - k))`` with ``W0 = W + kappa sqrt(d_u)``.

    ``W0`` is the proof-form state scale under exploration (see
    :func:`exploration_bound`); ``n = max(d_x, d_u)``.
    """
    n = max(d_x, d_u)
    W0 = W + kappa * math.sqrt(d_u)
    return n * kappa**3 / gamma * W0 * math.sqrt(8 * math.log(d_x * d_u * k / delta) / (T0 - k))


def check_concentration(sys, cert, k, T0, delta, n_seeds, dist, seed0=0, instance=0):
    """The ``(1-delta)``-quantile of moment errors over ``n_seeds`` runs is below the bound."""
    errs = np.array([moment_errors(sys, cert.K, k, T0, dist, seed0 + s) for s in range(n_seeds)])
    q = float(np.quantile(errs, 1.0 - delta))
    bound = concentration_bound(cert.kappa, cert.gamma, dist.W, sys.d_x, sys.d_u, k, T0, delta)
    return _compare("concentration", instance, [("quantile", q, bound)],
                    max_error=float(errs.max()), n_seeds=n_seeds)


# -- value-function stability -----------------------------------------------

def linear_cost(A, B, K, w, costs, x0=None):
    """Total cost of ``u = -K x`` on ``(A, B)`` driven by ``w`` from ``x0`` (default 0)."""
    d_x, d_u = B.shape
    T = len(w)
    x0 = np.zeros(d_x) if x0 is None else x0
    X = closed_loop_states(np.ascontiguousarray(A - B @ K), np.ascontiguousarray(B),
                           np.ascontiguousarray(w), np.zeros((T, d_u)), x0)[:-1]
    return float(np.sum(costs.evaluate(0, X, -X @ K.T)))


def check_value_stability(sys, cert, A_hat, B_hat, w, w_hat, costs, W, instance=0):
    """``|J(K|A_hat,B_hat,w_hat) - J(K|A,B,w)|`` against the value-stability bound.

    ``eps_w`` is the largest ``||w_t - w_hat_t||`` after the first step and
    ``W0 = max(W, eps_w, ||w_hat_0||)``.
    """
    name = "value_stability"
    kappa, gamma, G = cert.kappa, cert.gamma, costs.G
    A_hat, B_hat = np.atleast_2d(A_hat).astype(float), np.atleast_2d(B_hat).astype(float)
    eps_ab = max(spectral_norm(A_hat - sys.A), spectral_norm(B_hat - sys.B))
    if eps_ab > 0.25 * kappa**-3 * gamma:
        return _skip(name, instance, f"eps_AB={eps_ab:.3e} > 0.25 kappa^-3 gamma")
    w, w_hat = np.asarray(w, dtype=float), np.asarray(w_hat, dtype=float)
    eps_w = float(np.max(np.linalg.norm(w[1:] - w_hat[1:], axis=1))) if len(w) > 1 else 0.0
    W0 = max(W, eps_w, float(np.linalg.norm(w_hat[0])))
    T = len(w)
    J_hat = linear_cost(A_hat, B_hat, cert.K, w_hat, costs)
    J = linear_cost(sys.A, sys.B, cert.K, w, costs)
    lhs = abs(J_hat - J)
    rhs = (1e3 * T * G * kappa**8 / gamma**3 * W0 * (eps_w + W0 * eps_ab)
           + 32 * G * kappa**5 / gamma**2 * W0**2)
    tol = 1e-12 * max(1.0, abs(J))
    return _compare(name, instance, [("value", lhs, rhs)], tol=tol, eps_ab=eps_ab, eps_w=eps_w,
                    W0=W0)


def suite_value_stability(n=100, seed=0, T=500):
    out = []
    for i in range(n):
        sys, cert = certified_instance(seed * 1009 + i)
        gen = rng.generator(seed * 100003 + i, rng.STREAM_VERIFY + 80)
        eps_ab = 0.25 * cert.kappa**-3 * cert.gamma * gen.uniform(0, 1)
        A_hat = sys.A + eps_ab * _random_direction(gen, sys.A.shape)
        B_hat = sys.B + eps_ab * _random_direction(gen, sys.B.shape)
        W = 1.0
        dist = lds.make_disturbance(("sinusoid", "uniform-bounded")[i % 2], W, sys.d_x,
                                    seed=seed * 1009 + i)
        w = dist.block(0, T)
        eps_w = float(gen.uniform(0, 0.5))
        noise = gen.normal(size=w.shape)
        noise *= eps_w * gen.uniform(0, 1, size=(T, 1)) / np.linalg.norm(noise, axis=1, keepdims=True)
        w_hat = w + noise
        w_hat[0] = W * gen.uniform(0, 1) * _random_direction(gen, (sys.d_x, 1))[:, 0]
        costs = lds.make_costs("quadratic", sys.d_x, sys.d_u)
        out.append(check_value_stability(sys, cert, A_hat, B_hat, w, w_hat, costs, W, instance=i))
    return out


# -- controllability lift ---------------------------------------------------

def check_controllability_lift(sys, K, k, x, instance=0):
    """``lift_controls`` reaches ``x`` through ``C_k`` to relative ``1e-8``."""
    res = lds.lift_controls(sys, K, k, x)
    xn = float(np.linalg.norm(x))
    return _compare("controllability_lift", instance,
                    [("residual", res.residual, LIFT_RTOL * xn)],
                    tol=0.0 if xn > 0 else 1e-300, ratio=res.ratio)


def suite_controllability_lift(n=100, seed=0):
    out = []
    for i in range(n):
        sys, cert = certified_instance(seed * 1009 + i)
        gen = rng.generator(seed * 100003 + i, rng.STREAM_VERIFY + 96)
        x = gen.normal(size=sys.d_x) * 10 ** gen.uniform(-3, 3)
        r = check_controllability_lift(sys, cert.K, sys.d_x, x, instance=i)
        if not math.isfinite(r.details["ratio"]):
            r.status, r.reason = "fail", "non-finite lift ratio"
        out.append(r)
    return out


# -- least-squares inconsistency --------------------------------------------

def ls_inconsistency_curves(sys, K, T0_grid, seeds, c, k=None):
    """Median ``||A_hat - A||_F`` per ``T0`` for the moment method and naive least squares."""
    c = np.asarray(c, dtype=float)
    W = float(np.linalg.norm(c))
    dist = (lds.make_disturbance("constant", W, sys.d_x, {"direction": list(c)})
            if W > 0 else lds.make_disturbance("zero", 0.0, sys.d_x))
    k = sys.d_x if k is None else k
    alg, ls = [], []
    for T0 in T0_grid:
        ea, el = [], []
        for s in seeds:
            est, traj, _ = sysid.identify(sys, K, T0, k, dist, s)
            A_ls, _ = sysid.naive_least_squares(traj)
            ea.append(est.eps_report["eps_A"])
            el.append(float(np.linalg.norm(A_ls - sys.A)))
        alg.append(float(np.median(ea)))
        ls.append(float(np.median(el)))
    return np.array(alg), np.array(ls)


def check_ls_inconsistency(sys, K, T0_grid, seeds, c, factor=10.0, instance=0):
    """At the largest ``T0`` least squares is ``factor`` times worse than the moment method.

    For ``c = 0`` both estimators are consistent and the check instead
    asserts that both errors fall between the smallest and largest ``T0``.
    """
    from .pipeline import fit_loglog_slope

    alg, ls = ls_inconsistency_curves(sys, K, T0_grid, seeds, c)
    slope = fit_loglog_slope(T0_grid, alg) if len(T0_grid) > 1 else float("nan")
    details = {"T0": list(T0_grid), "alg2": alg.tolist(), "least_squares": ls.tolist(),
               "alg2_slope": slope}
    name = "ls_inconsistency"
    if np.linalg.norm(c) == 0:
        return _compare(name, instance, [("alg2_decrease", alg[-1], alg[0]),
                                         ("ls_decrease", ls[-1], ls[0])], **details)
    return _compare(name, instance, [("ratio", factor * alg[-1], ls[-1])], **details)


# -- driver -----------------------------------------------------------------

def run_all(cfg, instances=None, seed=None):
    """Every check family on ``cfg``-derived and random instances; a flat list of results."""
    v = cfg.verify
    n = int(v.get("instances", 100) if instances is None else instances)
    seed = cfg.seed if seed is None else seed
    n_sim = min(n, int(v.get("seeds", 20)))
    sim_cfg = cfg.with_T(int(v.get("T", min(cfg.T, 2000))), seed=seed)
    sys, cert = cfg.make_instance()
    dist = cfg.make_disturbance()
    T0_grid = v.get("T0_grid", [2**10, 2**12, 2**14, 2**16])
    out = []
    out += suite_series_perturbation(n, seed)
    out += suite_linear_solve(n, seed)
    out += suite_stability_preservation(n, seed)
    out += suite_simulation(sim_cfg, n_sim, seed)
    out += suite_exploration(n_sim, seed)
    out += suite_phase2_bounds(sim_cfg, 3, seed)
    out.append(check_concentration(sys, cert, cfg.k, cfg.T0, 0.1, max(n, 20), dist, seed))
    out += suite_value_stability(n, seed)
    out += suite_controllability_lift(n, seed)
    out.append(check_ls_inconsistency(sys, cert.K, T0_grid, [seed, seed + 1, seed + 2],
                                      max(cfg.W, 1.0) * np.ones(sys.d_x) / math.sqrt(sys.d_x)))
    return out
