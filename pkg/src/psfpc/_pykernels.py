"""Pure-numpy implementations of the per-round array kernels.

Every function works on all nodes at once. Arrays that the compiled
kernels update in place are updated in place here as well.
Weight matrices arrive in CSR form ``(indptr, indices, data)``.
"""
import numpy as np


def _dense(indptr, indices, data, n):
    W = np.zeros((n, n))
    rows = np.repeat(np.arange(n), np.diff(indptr))
    W[rows, indices] = data
    return W


def mix_push_sum(indptr, indices, data, z, s):
    """``x = W (z * s)``, ``s_new = W s``; returns ``(x, s_new)``."""
    W = _dense(indptr, indices, data, len(s))
    return W @ (z * s[:, None]), W @ s


def mix_average(indptr, indices, data, z):
    W = _dense(indptr, indices, data, z.shape[0])
    return W @ z


def prior_covariance(indptr, indices, data, V, s_pp, s_p):
    """``sum_m (w[n,m] s_pp[m])**2 V[m] / s_p[n]**2`` for every node n."""
    n = len(s_p)
    W = _dense(indptr, indices, data, n)
    eta = (W * s_pp[None, :]) ** 2
    out = np.einsum("nm,mij->nij", eta, V) / (s_p**2)[:, None, None]
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def _inv_all(A, rtol=1e-13):
    a, b, c, d = A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1]
    det = a * d - b * c
    bad = ~np.isfinite(det) | (det == 0.0) | (np.abs(det) <= rtol * (np.abs(a * d) + np.abs(b * c)))
    inv = np.empty_like(A)
    inv[:, 0, 0] = d
    inv[:, 0, 1] = -b
    inv[:, 1, 0] = -c
    inv[:, 1, 1] = a
    with np.errstate(divide="ignore", invalid="ignore"):
        inv /= det[:, None, None]
    return inv, bad


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def _clamp_psd(A):
    # closed-form eigen-clipping of symmetric 2x2 matrices
    a, b, c = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
    half_tr = 0.5 * (a + c)
    r = np.hypot(0.5 * (a - c), b)
    l1 = half_tr + r
    l2 = half_tr - r
    neg = l2 < 0.0
    if not neg.any():
        return A
    out = A.copy()
    for i in np.flatnonzero(neg):
        if l1[i] <= 0.0:
            out[i] = 0.0
            continue
        # eigenvector of l1
        if abs(b[i]) > 0.0:
            v = np.array([l1[i] - c[i], b[i]])
            if not np.any(v):
                v = np.array([b[i], l1[i] - a[i]])
        else:
            v = np.array([1.0, 0.0]) if a[i] >= c[i] else np.array([0.0, 1.0])
        v = v / np.hypot(v[0], v[1])
        out[i] = l1[i] * np.outer(v, v)
    return out


def filter_round(m_prior, V_prior, y, Q, sig, xi_Q, xi_s, m_post, V_post,
                 k, alpha, do_em, floor):
    """KF predict/update plus (optionally) one online-EM step, all nodes.

    ``Q`` (n,2,2) and ``sig`` (n,2) hold the covariances used in this
    round; when ``do_em`` is set they are overwritten with the new EM
    estimates, and the accumulators ``xi_Q``/``xi_s`` are advanced.
    Posterior mean/covariance go to ``m_post``/``V_post``.

    Returns 0 on success, else ``1 + index`` of the first node whose
    covariance inversion failed.
    """
    Vp = _sym(V_prior + Q)
    S = Vp.copy()
    S[:, 0, 0] += sig[:, 0]
    S[:, 1, 1] += sig[:, 1]
    S_inv, bad = _inv_all(S)
    if bad.any():
        return int(np.flatnonzero(bad)[0]) + 1
    K = Vp @ S_inv
    innov = y - m_prior
    m_post[:] = m_prior + np.einsum("nij,nj->ni", K, innov)
    V_post[:] = _sym(Vp - K @ Vp)
    if not do_em:
        return 0

    Vp_inv, bad = _inv_all(Vp)
    if bad.any():
        return int(np.flatnonzero(bad)[0]) + 1
    U = V_prior @ Vp_inv
    Ut = np.swapaxes(U, 1, 2)
    d = m_post - m_prior
    m_s = m_prior + np.einsum("nij,nj->ni", U, d)
    V_s = _sym(V_prior + U @ (V_post - Vp) @ Ut)
    # G_kk - G_kkm1 - G_kkm1^T + G_km1km1 in centred form
    e = m_post - m_s
    VUt = V_post @ Ut
    term_Q = _sym(e[:, :, None] * e[:, None, :] + V_post - VUt - np.swapaxes(VUt, 1, 2) + V_s)
    r = y - m_post
    term_s = r * r + np.stack([V_post[:, 0, 0], V_post[:, 1, 1]], axis=1)

    xi_Q *= alpha
    xi_Q += term_Q
    xi_s *= alpha
    xi_s += term_s
    lam = (1.0 - alpha**k) / (1.0 - alpha)
    Q[:] = _clamp_psd(_sym(xi_Q / lam))
    sig[:] = np.maximum(xi_s / lam, floor)
    return 0
