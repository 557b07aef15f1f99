"""Independent reference implementations used by the tests."""
import mpmath as mp
import numpy as np

mp.mp.dps = 50


def _mat(a):
    return mp.matrix([[mp.mpf(float(v)) for v in row] for row in np.atleast_2d(a)])


def stacked_gaussian_posterior(m0, V0, Q, Sigma, ys):
    """Joint moments of ``(x_{K-1}, x_K)`` given ``y_1..y_K`` by conditioning
    the full stacked Gaussian of a random-walk model in 50-digit arithmetic.

    The state is ``x_k = x_{k-1} + w_k`` with ``w ~ N(0, Q)``, observed as
    ``y_k = x_k + v_k`` with ``v ~ N(0, Sigma)``; ``x_0 ~ N(m0, V0)``.
    Returns ``(mean, cov)`` of the 4-vector ``[x_{K-1}, x_K]``.
    """
    K = len(ys)
    d = 2
    # cov(x_i, x_j) = V0 + min(i, j) Q ; cov(y_i, .) adds Sigma on the diagonal
    V0m, Qm, Sm = _mat(V0), _mat(Q), _mat(Sigma)

    def cxx(i, j):
        return V0m + min(i, j) * Qm

    nY = d * K
    Cyy = mp.zeros(nY, nY)
    for i in range(1, K + 1):
        for j in range(1, K + 1):
            blk = cxx(i, j) + (Sm if i == j else mp.zeros(d, d))
            for a in range(d):
                for b in range(d):
                    Cyy[d * (i - 1) + a, d * (j - 1) + b] = blk[a, b]
    targets = [K - 1, K]
    Cxy = mp.zeros(2 * d, nY)
    Cxx = mp.zeros(2 * d, 2 * d)
    for ti, t in enumerate(targets):
        for j in range(1, K + 1):
            blk = cxx(t, j)
            for a in range(d):
                for b in range(d):
                    Cxy[d * ti + a, d * (j - 1) + b] = blk[a, b]
        for tj, u in enumerate(targets):
            blk = cxx(t, u)
            for a in range(d):
                for b in range(d):
                    Cxx[d * ti + a, d * tj + b] = blk[a, b]
    m0m = _mat(np.reshape(m0, (d, 1)))
    mean_x = mp.matrix(2 * d, 1)
    for ti in range(2):
        for a in range(d):
            mean_x[d * ti + a] = m0m[a]
    resid = mp.matrix(nY, 1)
    for j, y in enumerate(ys):
        for a in range(d):
            resid[d * j + a] = mp.mpf(float(y[a])) - m0m[a]
    G = Cxy * mp.inverse(Cyy)
    mean = mean_x + G * resid
    cov = Cxx - G * Cxy.T
    to_np = lambda M: np.array([[float(M[i, j]) for j in range(M.cols)] for i in range(M.rows)])
    return to_np(mean).ravel(), to_np(cov)


def random_spd(rng, scale=1.0, cond=100.0):
    """Random symmetric positive-definite 2x2 with bounded condition number."""
    q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    ev = scale * np.array([1.0, rng.uniform(1.0 / cond, 1.0)])
    return q @ np.diag(ev) @ q.T


def dense_push_sum(W, z, s):
    """Push-sum mixing written as plain dense products."""
    x = W @ (z * s[:, None])
    return x, W @ s
