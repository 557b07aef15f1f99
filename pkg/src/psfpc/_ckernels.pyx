# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-round array kernels; same contracts as ``_pykernels``."""
import numpy as np
from libc.math cimport fabs, sqrt, isfinite, pow, hypot


def mix_push_sum(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                 const double[::1] data, const double[:, ::1] z, const double[::1] s):
    cdef Py_ssize_t n = s.shape[0], i, p, m
    x_arr = np.zeros((n, 2))
    s_arr = np.zeros(n)
    cdef double[:, ::1] x = x_arr
    cdef double[::1] s_new = s_arr
    cdef double w, ws
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            m = indices[p]
            w = data[p]
            ws = w * s[m]
            x[i, 0] += ws * z[m, 0]
            x[i, 1] += ws * z[m, 1]
            s_new[i] += ws
    return x_arr, s_arr


def mix_average(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                const double[::1] data, const double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0], i, p, m
    out_arr = np.zeros((n, 2))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            m = indices[p]
            out[i, 0] += data[p] * z[m, 0]
            out[i, 1] += data[p] * z[m, 1]
    return out_arr


def prior_covariance(const Py_ssize_t[::1] indptr, const Py_ssize_t[::1] indices,
                     const double[::1] data, const double[:, :, ::1] V,
                     const double[::1] s_pp, const double[::1] s_p):
    cdef Py_ssize_t n = s_p.shape[0], i, p, m
    out_arr = np.zeros((n, 2, 2))
    cdef double[:, :, ::1] out = out_arr
    cdef double eta, a, b, c, inv
    for i in range(n):
        a = 0.0
        b = 0.0
        c = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            m = indices[p]
            eta = data[p] * s_pp[m]
            eta = eta * eta
            a += eta * V[m, 0, 0]
            b += eta * 0.5 * (V[m, 0, 1] + V[m, 1, 0])
            c += eta * V[m, 1, 1]
        inv = 1.0 / (s_p[i] * s_p[i])
        out[i, 0, 0] = a * inv
        out[i, 0, 1] = b * inv
        out[i, 1, 0] = b * inv
        out[i, 1, 1] = c * inv
    return out_arr


cdef inline bint _inv2(double a, double b, double c, double d, double* out) nogil:
    cdef double det = a * d - b * c
    cdef double scale = fabs(a * d) + fabs(b * c)
    if not isfinite(det) or det == 0.0 or fabs(det) <= 1e-13 * scale:
        return False
    out[0] = d / det
    out[1] = -b / det
    out[2] = -c / det
    out[3] = a / det
    return True


cdef inline void _mm(const double* A, const double* B, double* C) nogil:
    # row-major 2x2 product C = A B
    C[0] = A[0] * B[0] + A[1] * B[2]
    C[1] = A[0] * B[1] + A[1] * B[3]
    C[2] = A[2] * B[0] + A[3] * B[2]
    C[3] = A[2] * B[1] + A[3] * B[3]


cdef inline void _clamp_psd(double* A) nogil:
    cdef double a = A[0], b = 0.5 * (A[1] + A[2]), c = A[3]
    cdef double half_tr = 0.5 * (a + c)
    cdef double r = hypot(0.5 * (a - c), b)
    cdef double l1 = half_tr + r, l2 = half_tr - r
    cdef double v0, v1, nv
    if l2 >= 0.0:
        return
    if l1 <= 0.0:
        A[0] = 0.0
        A[1] = 0.0
        A[2] = 0.0
        A[3] = 0.0
        return
    if fabs(b) > 0.0:
        v0 = l1 - c
        v1 = b
        if v0 == 0.0 and v1 == 0.0:
            v0 = b
            v1 = l1 - a
    elif a >= c:
        v0 = 1.0
        v1 = 0.0
    else:
        v0 = 0.0
        v1 = 1.0
    nv = hypot(v0, v1)
    v0 /= nv
    v1 /= nv
    A[0] = l1 * v0 * v0
    A[1] = l1 * v0 * v1
    A[2] = A[1]
    A[3] = l1 * v1 * v1


def filter_round(const double[:, ::1] m_prior, const double[:, :, ::1] V_prior,
                 const double[:, ::1] y, double[:, :, ::1] Q, double[:, ::1] sig,
                 double[:, :, ::1] xi_Q, double[:, ::1] xi_s,
                 double[:, ::1] m_post, double[:, :, ::1] V_post,
                 long k, double alpha, bint do_em, double floor):
    cdef Py_ssize_t n = m_prior.shape[0], i, j
    cdef double Vp[4]
    cdef double V0[4]
    cdef double S_inv[4]
    cdef double Vp_inv[4]
    cdef double K[4]
    cdef double KVp[4]
    cdef double U[4]
    cdef double Ut[4]
    cdef double D[4]
    cdef double T1[4]
    cdef double Vs[4]
    cdef double VUt[4]
    cdef double Vpost[4]
    cdef double TQ[4]
    cdef double e0, e1, ms0, ms1, d0, d1, r0, r1, off
    cdef double lam = (1.0 - pow(alpha, <double>k)) / (1.0 - alpha)
    for i in range(n):
        V0[0] = V_prior[i, 0, 0]
        V0[1] = V_prior[i, 0, 1]
        V0[2] = V_prior[i, 1, 0]
        V0[3] = V_prior[i, 1, 1]
        Vp[0] = V0[0] + Q[i, 0, 0]
        Vp[3] = V0[3] + Q[i, 1, 1]
        off = 0.5 * ((V0[1] + Q[i, 0, 1]) + (V0[2] + Q[i, 1, 0]))
        Vp[1] = off
        Vp[2] = off
        if not _inv2(Vp[0] + sig[i, 0], Vp[1], Vp[2], Vp[3] + sig[i, 1], S_inv):
            return i + 1
        _mm(Vp, S_inv, K)
        d0 = y[i, 0] - m_prior[i, 0]
        d1 = y[i, 1] - m_prior[i, 1]
        m_post[i, 0] = m_prior[i, 0] + K[0] * d0 + K[1] * d1
        m_post[i, 1] = m_prior[i, 1] + K[2] * d0 + K[3] * d1
        _mm(K, Vp, KVp)
        Vpost[0] = Vp[0] - KVp[0]
        Vpost[3] = Vp[3] - KVp[3]
        off = 0.5 * ((Vp[1] - KVp[1]) + (Vp[2] - KVp[2]))
        Vpost[1] = off
        Vpost[2] = off
        V_post[i, 0, 0] = Vpost[0]
        V_post[i, 0, 1] = Vpost[1]
        V_post[i, 1, 0] = Vpost[2]
        V_post[i, 1, 1] = Vpost[3]
        if not do_em:
            continue

        if not _inv2(Vp[0], Vp[1], Vp[2], Vp[3], Vp_inv):
            return i + 1
        _mm(V0, Vp_inv, U)
        Ut[0] = U[0]
        Ut[1] = U[2]
        Ut[2] = U[1]
        Ut[3] = U[3]
        d0 = m_post[i, 0] - m_prior[i, 0]
        d1 = m_post[i, 1] - m_prior[i, 1]
        ms0 = m_prior[i, 0] + U[0] * d0 + U[1] * d1
        ms1 = m_prior[i, 1] + U[2] * d0 + U[3] * d1
        for j in range(4):
            D[j] = Vpost[j] - Vp[j]
        _mm(U, D, T1)
        _mm(T1, Ut, Vs)
        for j in range(4):
            Vs[j] += V0[j]
        off = 0.5 * (Vs[1] + Vs[2])
        Vs[1] = off
        Vs[2] = off
        _mm(Vpost, Ut, VUt)
        e0 = m_post[i, 0] - ms0
        e1 = m_post[i, 1] - ms1
        TQ[0] = e0 * e0 + Vpost[0] - 2.0 * VUt[0] + Vs[0]
        TQ[3] = e1 * e1 + Vpost[3] - 2.0 * VUt[3] + Vs[3]
        off = e0 * e1 + Vpost[1] - VUt[1] - VUt[2] + Vs[1]
        TQ[1] = off
        TQ[2] = off
        r0 = y[i, 0] - m_post[i, 0]
        r1 = y[i, 1] - m_post[i, 1]

        xi_Q[i, 0, 0] = alpha * xi_Q[i, 0, 0] + TQ[0]
        xi_Q[i, 0, 1] = alpha * xi_Q[i, 0, 1] + TQ[1]
        xi_Q[i, 1, 0] = alpha * xi_Q[i, 1, 0] + TQ[2]
        xi_Q[i, 1, 1] = alpha * xi_Q[i, 1, 1] + TQ[3]
        xi_s[i, 0] = alpha * xi_s[i, 0] + r0 * r0 + Vpost[0]
        xi_s[i, 1] = alpha * xi_s[i, 1] + r1 * r1 + Vpost[3]

        TQ[0] = xi_Q[i, 0, 0] / lam
        off = 0.5 * (xi_Q[i, 0, 1] + xi_Q[i, 1, 0]) / lam
        TQ[1] = off
        TQ[2] = off
        TQ[3] = xi_Q[i, 1, 1] / lam
        _clamp_psd(TQ)
        Q[i, 0, 0] = TQ[0]
        Q[i, 0, 1] = TQ[1]
        Q[i, 1, 0] = TQ[2]
        Q[i, 1, 1] = TQ[3]
        sig[i, 0] = max(xi_s[i, 0] / lam, floor)
        sig[i, 1] = max(xi_s[i, 1] / lam, floor)
    return 0
