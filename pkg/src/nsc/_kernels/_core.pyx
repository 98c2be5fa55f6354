# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; same contracts as ``nsc._kernels._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def closed_loop_states(Acl_, B_, w_, e_, x0_):
    cdef double[:, ::1] Acl = np.ascontiguousarray(Acl_, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(B_, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_, dtype=np.float64)
    cdef double[:, ::1] e = np.ascontiguousarray(e_, dtype=np.float64)
    cdef double[::1] x0 = np.ascontiguousarray(x0_, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], dx = w.shape[1], du = B.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double acc
    X_arr = np.empty((n + 1, dx))
    cdef double[:, ::1] X = X_arr
    with nogil:
        for i in range(dx):
            X[0, i] = x0[i]
        for t in range(n):
            for i in range(dx):
                acc = w[t, i]
                for j in range(dx):
                    acc = acc + Acl[i, j] * X[t, j]
                for j in range(du):
                    acc = acc + B[i, j] * e[t, j]
                X[t + 1, i] = acc
    return X_arr


cdef void _jacobi_eig(double[:, ::1] S, double[:, ::1] V, Py_ssize_t m) noexcept nogil:
    # Cyclic Jacobi on the symmetric m x m matrix S; eigenvalues end up on the
    # diagonal of S and eigenvectors in the columns of V.
    cdef Py_ssize_t p, q, k, sweep
    cdef double off, theta, tt, c, s, a_kp, a_kq, scale
    for p in range(m):
        for q in range(m):
            V[p, q] = 1.0 if p == q else 0.0
    for sweep in range(60):
        off = 0.0
        scale = 0.0
        for p in range(m):
            scale = scale + S[p, p] * S[p, p]
            for q in range(p + 1, m):
                off = off + S[p, q] * S[p, q]
        if off <= 1e-32 * scale or off == 0.0:
            break
        for p in range(m):
            for q in range(p + 1, m):
                if S[p, q] == 0.0:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * S[p, q])
                tt = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    tt = -tt
                c = 1.0 / sqrt(tt * tt + 1.0)
                s = tt * c
                for k in range(m):
                    a_kp = S[k, p]
                    a_kq = S[k, q]
                    S[k, p] = c * a_kp - s * a_kq
                    S[k, q] = s * a_kp + c * a_kq
                for k in range(m):
                    a_kp = S[p, k]
                    a_kq = S[q, k]
                    S[p, k] = c * a_kp - s * a_kq
                    S[q, k] = s * a_kp + c * a_kq
                for k in range(m):
                    a_kp = V[k, p]
                    a_kq = V[k, q]
                    V[k, p] = c * a_kp - s * a_kq
                    V[k, q] = s * a_kp + c * a_kq


cdef void _project_block(double[:, :, ::1] M, Py_ssize_t h, double r,
                         double[:, ::1] S, double[:, ::1] V, double[::1] fac,
                         double[:, ::1] tmp) noexcept nogil:
    # Clip singular values of M[h] at r via the eigendecomposition of M M^T.
    cdef Py_ssize_t du = M.shape[1], dx = M.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double acc, lam, lam_max = 0.0
    for i in range(du):
        for j in range(du):
            acc = 0.0
            for k in range(dx):
                acc = acc + M[h, i, k] * M[h, j, k]
            S[i, j] = acc
    _jacobi_eig(S, V, du)
    for i in range(du):
        if S[i, i] > lam_max:
            lam_max = S[i, i]
    if lam_max <= r * r:
        return
    for i in range(du):
        lam = S[i, i]
        fac[i] = r / sqrt(lam) if lam > r * r else 1.0
    # M <- V diag(fac) V^T M
    for i in range(du):
        for k in range(dx):
            acc = 0.0
            for j in range(du):
                acc = acc + V[j, i] * M[h, j, k]
            tmp[i, k] = fac[i] * acc
    for i in range(du):
        for k in range(dx):
            acc = 0.0
            for j in range(du):
                acc = acc + V[i, j] * tmp[j, k]
            M[h, i, k] = acc


def gpc_loop(A_, B_, A_hat_, B_hat_, K_, w_, x0_, w_hat_hist_, M_, radii_, double lr,
             Qc_, Rc_, qc_, rc_, double c0, a_, b_):
    cdef double[:, ::1] A = np.ascontiguousarray(A_, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(B_, dtype=np.float64)
    cdef double[:, ::1] A_hat = np.ascontiguousarray(A_hat_, dtype=np.float64)
    cdef double[:, ::1] B_hat = np.ascontiguousarray(B_hat_, dtype=np.float64)
    cdef double[:, ::1] K = np.ascontiguousarray(K_, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_, dtype=np.float64)
    cdef double[:, :, ::1] M = M_
    cdef double[::1] radii = np.ascontiguousarray(radii_, dtype=np.float64)
    cdef double[:, ::1] Qc = np.ascontiguousarray(Qc_, dtype=np.float64)
    cdef double[:, ::1] Rc = np.ascontiguousarray(Rc_, dtype=np.float64)
    cdef double[::1] qc = np.ascontiguousarray(qc_, dtype=np.float64)
    cdef double[::1] rc = np.ascontiguousarray(rc_, dtype=np.float64)
    cdef double[::1] a = np.ascontiguousarray(a_, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_, dtype=np.float64)

    cdef Py_ssize_t n = w.shape[0], dx = w.shape[1]
    cdef Py_ssize_t H = M.shape[0], du = M.shape[1]
    cdef Py_ssize_t o = 2 * H + 1
    cdef Py_ssize_t t, i, j, k, l, base, src
    cdef double acc, cst

    wh_arr = np.zeros((o + n, dx))
    wh_arr[:o] = w_hat_hist_
    cdef double[:, ::1] wh = wh_arr

    Acl_hat = np.asarray(A_hat) - np.asarray(B_hat) @ np.asarray(K)
    P_arr = np.empty((H + 1, dx, dx))
    P_arr[0] = np.eye(dx)
    for j in range(1, H + 1):
        P_arr[j] = Acl_hat @ P_arr[j - 1]
    cdef double[:, :, ::1] P = P_arr
    cdef double[:, :, ::1] PB = np.ascontiguousarray(P_arr @ np.asarray(B_hat))

    X_arr = np.empty((n + 1, dx))
    U_arr = np.empty((n, du))
    C_arr = np.empty(n)
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] U = U_arr
    cdef double[::1] costs = C_arr

    cdef double[::1] x = np.ascontiguousarray(x0_, dtype=np.float64).copy()
    cdef double[::1] u = np.empty(du)
    cdef double[::1] u_off = np.empty(du)
    cdef double[::1] xn = np.empty(dx)
    cdef double[:, ::1] utilde = np.empty((H + 1, du))
    cdef double[:, ::1] drive = np.empty((H + 1, dx))
    cdef double[::1] y = np.empty(dx)
    cdef double[::1] v = np.empty(du)
    cdef double[::1] g_v = np.empty(du)
    cdef double[::1] g_y = np.empty(dx)
    cdef double[:, ::1] p = np.empty((H + 1, du))
    cdef double[:, :, ::1] grad = np.empty((H, du, dx))
    cdef double[:, ::1] S = np.empty((du, du))
    cdef double[:, ::1] V = np.empty((du, du))
    cdef double[::1] fac = np.empty(du)
    cdef double[:, ::1] tmp = np.empty((du, dx))

    with nogil:
        for i in range(dx):
            X[0, i] = x[i]
        for t in range(n):
            base = o + t
            # action
            for i in range(du):
                acc = 0.0
                for l in range(H):
                    for k in range(dx):
                        acc = acc + M[l, i, k] * wh[base - 1 - l, k]
                u_off[i] = acc
                for k in range(dx):
                    acc = acc - K[i, k] * x[k]
                u[i] = acc
            # cost
            cst = c0
            for i in range(dx):
                acc = 0.0
                for k in range(dx):
                    acc = acc + Qc[i, k] * x[k]
                cst = cst + a[t] * x[i] * acc + qc[i] * x[i]
            for i in range(du):
                acc = 0.0
                for k in range(du):
                    acc = acc + Rc[i, k] * u[k]
                cst = cst + b[t] * u[i] * acc + rc[i] * u[i]
            costs[t] = cst
            # true dynamics and disturbance estimate
            for i in range(dx):
                acc = w[t, i]
                cst = 0.0
                for k in range(dx):
                    acc = acc + A[i, k] * x[k]
                    cst = cst + A_hat[i, k] * x[k]
                for k in range(du):
                    acc = acc + B[i, k] * u[k]
                    cst = cst + B_hat[i, k] * u[k]
                xn[i] = acc
                wh[base, i] = acc - cst
            for i in range(du):
                U[t, i] = u[i]
            for i in range(dx):
                x[i] = xn[i]
                X[t + 1, i] = xn[i]

            # surrogate state y_t = sum_j P_j (w_hat_{t-1-j} + B_hat utilde_{t-1-j})
            for j in range(H + 1):
                for i in range(du):
                    acc = 0.0
                    for l in range(H):
                        src = base - 2 - j - l
                        for k in range(dx):
                            acc = acc + M[l, i, k] * wh[src, k]
                    utilde[j, i] = acc
                for i in range(dx):
                    acc = wh[base - 1 - j, i]
                    for k in range(du):
                        acc = acc + B_hat[i, k] * utilde[j, k]
                    drive[j, i] = acc
            for i in range(dx):
                acc = 0.0
                for j in range(H + 1):
                    for k in range(dx):
                        acc = acc + P[j, i, k] * drive[j, k]
                y[i] = acc
            for i in range(du):
                acc = u_off[i]
                for k in range(dx):
                    acc = acc - K[i, k] * y[k]
                v[i] = acc
            for i in range(du):
                acc = 0.0
                for k in range(du):
                    acc = acc + Rc[i, k] * v[k]
                g_v[i] = 2.0 * b[t] * acc + rc[i]
            for i in range(dx):
                acc = 0.0
                for k in range(dx):
                    acc = acc + Qc[i, k] * y[k]
                acc = 2.0 * a[t] * acc + qc[i]
                for k in range(du):
                    acc = acc - K[k, i] * g_v[k]
                g_y[i] = acc
            for j in range(H + 1):
                for i in range(du):
                    acc = 0.0
                    for k in range(dx):
                        acc = acc + PB[j, k, i] * g_y[k]
                    p[j, i] = acc
            for l in range(H):
                for i in range(du):
                    for k in range(dx):
                        acc = g_v[i] * wh[base - 1 - l, k]
                        for j in range(H + 1):
                            acc = acc + p[j, i] * wh[base - 2 - j - l, k]
                        grad[l, i, k] = acc
            # projected descent step
            for l in range(H):
                for i in range(du):
                    for k in range(dx):
                        M[l, i, k] = M[l, i, k] - lr * grad[l, i, k]
                _project_block(M, l, radii[l], S, V, fac, tmp)

    W_hat = np.array(wh_arr[o:])
    return X_arr, U_arr, W_hat, C_arr
