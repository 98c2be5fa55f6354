"""Pure numpy implementations of the hot loops.

Both functions share their signature with the compiled ``_core`` module; the
package picks one at import time (see ``nsc._kernels``).
"""

import numpy as np


def closed_loop_states(Acl, B, w, e, x0):
    """States of ``x_{t+1} = Acl x_t + B e_t + w_t`` for ``t = 0 .. n-1``.

    Returns an ``(n+1, d_x)`` array whose first row is ``x0``.
    """
    n, d_x = w.shape
    X = np.empty((n + 1, d_x))
    X[0] = x0
    drive = w + e @ B.T
    x = X[0]
    for t in range(n):
        x = Acl @ x + drive[t]
        X[t + 1] = x
    return X


def _project_blocks(M, radii):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    over = s[:, 0] > radii
    if np.any(over):
        s = np.minimum(s, radii[:, None])
        M[over] = np.einsum("hik,hk,hkj->hij", U[over], s[over], Vt[over])
    return M


def gpc_loop(A, B, A_hat, B_hat, K, w, x0, w_hat_hist, M, radii, lr,
             Qc, Rc, qc, rc, c0, a, b):
    """Run the disturbance-action controller for ``n = len(w)`` steps.

    ``M`` has shape ``(H, d_u, d_x)`` and is updated in place. The history
    ``w_hat_hist`` holds the ``2H+1`` disturbance estimates preceding the
    first step, oldest first. The online loss at step ``t`` is the
    time-``t`` cost of the memory-``H`` surrogate state/action pair built on
    the estimated model, and its gradient drives one projected step.

    Returns ``(X, U, W_hat, costs)`` with ``X`` of length ``n+1``.
    """
    n, d_x = w.shape
    H, d_u, _ = M.shape
    o = 2 * H + 1
    wh = np.zeros((o + n, d_x))
    wh[:o] = w_hat_hist

    Acl_hat = A_hat - B_hat @ K
    P = np.empty((H + 1, d_x, d_x))
    P[0] = np.eye(d_x)
    for j in range(1, H + 1):
        P[j] = Acl_hat @ P[j - 1]
    PB = P @ B_hat
    # offs[j, l-1] = 1 + j + l  ->  w_hat_{t-1-j-l}
    offs = 1 + np.arange(H + 1)[:, None] + np.arange(1, H + 1)[None, :]
    past_offs = np.arange(1, H + 1)

    X = np.empty((n + 1, d_x))
    U = np.empty((n, d_u))
    W_hat = np.empty((n, d_x))
    costs = np.empty(n)
    x = np.asarray(x0, dtype=float).copy()
    X[0] = x
    for t in range(n):
        base = o + t
        past = wh[base - past_offs]                      # (H, d_x): w_hat_{t-1..t-H}
        u_off = np.einsum("lij,lj->i", M, past)
        u = u_off - K @ x
        costs[t] = (a[t] * (x @ Qc @ x) + b[t] * (u @ Rc @ u)
                    + qc @ x + rc @ u + c0)
        x_next = A @ x + B @ u + w[t]
        wh[base] = x_next - A_hat @ x - B_hat @ u
        U[t] = u
        X[t + 1] = x_next
        x = x_next

        hank = wh[base - offs]                           # (H+1, H, d_x)
        utilde = np.einsum("lik,jlk->ji", M, hank)       # (H+1, d_u)
        drive = wh[base - 1 - np.arange(H + 1)] + utilde @ B_hat.T
        y = np.einsum("jab,jb->a", P, drive)
        v = u_off - K @ y
        g_v = 2.0 * b[t] * (Rc @ v) + rc
        g_y = 2.0 * a[t] * (Qc @ y) + qc - K.T @ g_v
        p = np.einsum("jai,a->ji", PB, g_y)              # (H+1, d_u)
        grad = g_v[None, :, None] * past[:, None, :]
        grad += np.einsum("ji,jlk->lik", p, hank)
        M -= lr * grad
        _project_blocks(M, radii)
    W_hat[:] = wh[o:]
    return X, U, W_hat, costs
