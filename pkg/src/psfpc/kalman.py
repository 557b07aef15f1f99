"""Per-node Kalman filter for the two-state ``[f, theta]`` random walk.

The state moves as ``x(k) = x(k-1) + u`` and is observed as ``y = x + v``
(identity observation matrix), with innovation covariance ``Q`` and
diagonal measurement covariance ``Sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .oscillator import Observation, OscillatorParams, q_matrix, sigma_matrix


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KalmanState:
    """Posterior ``(m, V)``; ``m_pred``/``V_pred`` keep the last prediction."""

    m: np.ndarray
    V: np.ndarray
    m_pred: np.ndarray | None = None
    V_pred: np.ndarray | None = None


@dataclass(frozen=True)
class NoiseModel:
    Q: np.ndarray
    Sigma: np.ndarray

    @classmethod
    def from_params(cls, params: OscillatorParams) -> "NoiseModel":
        return cls(q_matrix(params), sigma_matrix(params))


def sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def inv2(A: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Closed-form inverse of a 2x2 matrix via its adjugate."""
    a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    det = a * d - b * c
    scale = abs(a * d) + abs(b * c)
    if not np.isfinite(det) or det == 0.0 or abs(det) <= rtol * scale:
        raise SingularMatrixError(f"2x2 matrix is numerically singular (det={det!r})")
    return np.array([[d, -b], [-c, a]]) / det


def initial_state(params: OscillatorParams, carrier_offset: bool = False) -> KalmanState:
    """First-iteration prior: mean ``[f_c, pi]``, covariance from the
    initial-frequency spread and the uniform-phase variance ``(2 pi)^2/12``.

    With ``carrier_offset`` the frequency is expressed relative to ``f_c``.
    """
    f0 = 0.0 if carrier_offset else params.f_c
    return KalmanState(
        m=np.array([f0, np.pi]),
        V=np.diag([params.sigma_init**2, (2 * np.pi) ** 2 / 12.0]),
    )


def predict(state: KalmanState, model: NoiseModel) -> KalmanState:
    return replace(
        state, m_pred=np.array(state.m, dtype=float), V_pred=sym(state.V + model.Q)
    )


def update(state: KalmanState, obs: Observation, model: NoiseModel) -> KalmanState:
    """Condition the predicted state on one observation.

    The returned state keeps the prediction so that the smoothing
    quantities can be formed afterwards; ``V`` is symmetrized.
    """
    if state.V_pred is None:
        raise ValueError("update() needs a predicted state; call predict() first")
    Vp = state.V_pred
    K = Vp @ inv2(Vp + model.Sigma)
    y = np.array([obs.f_hat, obs.theta_hat], dtype=float)
    m = state.m_pred + K @ (y - state.m_pred)
    V = sym(Vp - K @ Vp)
    return replace(state, m=m, V=V)


def smoother_gain(state: KalmanState) -> np.ndarray:
    """One-lag gain ``U = V(k-1|k-1) V(k|k-1)^-1`` of a predicted state.

    Call it between :func:`predict` and :func:`update`, while ``state.V``
    still holds the previous posterior.
    """
    if state.V_pred is None:
        raise ValueError("smoother_gain() needs a predicted state")
    return state.V @ inv2(state.V_pred)


def lag_one_moments(prev: KalmanState, curr: KalmanState, U: np.ndarray | None = None):
    """Second moments ``(G_kk, G_kkm1, G_km1km1)`` given ``y(1..k)``.

    ``prev`` holds the posterior of step ``k-1``; ``curr`` the prediction and
    posterior of step ``k``.
    """
    if U is None:
        U = prev.V @ inv2(curr.V_pred)
    m_s = prev.m + U @ (curr.m - curr.m_pred)
    V_s = sym(prev.V + U @ (curr.V - curr.V_pred) @ U.T)
    G_km1 = sym(V_s + np.outer(m_s, m_s))
    G_cross = np.outer(curr.m, m_s) + curr.V @ U.T
    G_k = sym(curr.V + np.outer(curr.m, curr.m))
    return G_k, G_cross, G_km1


def consensus_prior(neighbor_V, weights, s_prev_prev, s_n_prev) -> np.ndarray:
    """Prior covariance of a node after a push-sum round.

    Each in-neighbor ``m`` contributes its covariance scaled by
    ``(w[n, m] * s_m(k-2))**2``; the sum is divided by ``s_n(k-1)**2``.

    Parameters
    ----------
    neighbor_V : sequence of (2, 2) arrays
        Posterior covariances of the in-neighbors (self included) from the
        previous round.
    weights : sequence of float
        ``w[n, m]`` for the same neighbors.
    s_prev_prev : sequence of float
        The neighbors' push-sum scalars two rounds back.
    s_n_prev : float
        The node's own push-sum scalar from the previous round.
    """
    eta = (np.asarray(weights, float) * np.asarray(s_prev_prev, float)) ** 2
    V = np.tensordot(eta, np.asarray(neighbor_V, float), axes=1)
    return sym(V / s_n_prev**2)
