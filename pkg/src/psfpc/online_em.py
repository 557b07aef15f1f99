"""Online EM estimation of the innovation and measurement covariances.

The E-step is a stochastic-approximation recursion with constant smoothing
factor ``1 - alpha``; the M-step is closed form. Each node runs its own
estimator on its own observations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kalman import NoiseModel, sym
from .oscillator import Observation, OscillatorParams, q_matrix, sigma_matrix

VARIANCE_FLOOR = 1e-18
DEFAULT_ALPHA = 0.99
INIT_CASES = ("poor_a", "good_b", "genie", "custom")

#: measurement covariance used by both poor_a and good_b
POOR_SIGMA0 = np.diag([1e3, 1e-12])


@dataclass(frozen=True)
class ThetaEstimate:
    Q_hat: np.ndarray
    sigma_f_sq_hat: float
    sigma_theta_sq_hat: float

    @property
    def Sigma_hat(self) -> np.ndarray:
        return np.diag([self.sigma_f_sq_hat, self.sigma_theta_sq_hat])

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.Q_hat, self.Sigma_hat)


@dataclass(frozen=True)
class EmAccumulators:
    alpha: float = DEFAULT_ALPHA
    xi_Q: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    xi_f: float = 0.0
    xi_theta: float = 0.0
    k: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


def lambda_k(alpha: float, k: int) -> float:
    """Normalizer ``(1 - alpha**k) / (1 - alpha)`` of the forgetting sum."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (1.0 - alpha**k) / (1.0 - alpha)


def clamp_psd(A: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues of a symmetric matrix to 0."""
    A = sym(A)
    w, v = np.linalg.eigh(A)
    if w.min() >= 0.0:
        return A
    return sym((v * np.clip(w, 0.0, None)) @ v.T)


def em_update(
    acc: EmAccumulators,
    gammas,
    obs: Observation,
    m_k,
    floor: float = VARIANCE_FLOOR,
) -> tuple[EmAccumulators, ThetaEstimate]:
    """One online-EM step from this iteration's smoothed moments.

    Parameters
    ----------
    acc
        Accumulators after iteration ``k - 1``.
    gammas
        ``(G_kk, G_kkm1, G_km1km1)`` from :func:`psfpc.kalman.lag_one_moments`.
    obs
        The observation ``y(k)``.
    m_k
        Posterior mean ``m(k|k)``.
    """
    G_k, G_cross, G_km1 = (np.asarray(g, float) for g in gammas)
    k = acc.k + 1
    a = acc.alpha
    y_f, y_t = float(obs.f_hat), float(obs.theta_hat)
    term_Q = sym(G_k - G_cross - G_cross.T + G_km1)
    term_f = y_f * y_f - 2.0 * y_f * m_k[0] + G_k[0, 0]
    term_t = y_t * y_t - 2.0 * y_t * m_k[1] + G_k[1, 1]
    new = EmAccumulators(
        alpha=a,
        xi_Q=a * acc.xi_Q + term_Q,
        xi_f=a * acc.xi_f + term_f,
        xi_theta=a * acc.xi_theta + term_t,
        k=k,
    )
    lam = lambda_k(a, k)
    theta = ThetaEstimate(
        Q_hat=clamp_psd(new.xi_Q / lam),
        sigma_f_sq_hat=max(new.xi_f / lam, floor),
        sigma_theta_sq_hat=max(new.xi_theta / lam, floor),
    )
    return new, theta


def init_theta(
    case: str,
    params: OscillatorParams,
    Q: np.ndarray | None = None,
    Sigma: np.ndarray | None = None,
) -> ThetaEstimate:
    """Starting covariances for the EM/KF variants.

    ``poor_a`` ignores the drift/phase cross-correlation and jitter and uses
    ``1/sqrt(T)`` as the frequency-drift variance; ``good_b`` starts from the
    true ``Q``. Both start from ``diag(1e3, 1e-12)`` for ``Sigma``. ``genie``
    returns the true pair; ``custom`` returns the supplied matrices.
    """
    if case == "poor_a":
        var_f = 1.0 / np.sqrt(params.T)
        Q0 = np.diag([var_f, np.pi**2 * params.T**2 * var_f])
        S0 = POOR_SIGMA0
    elif case == "good_b":
        Q0, S0 = q_matrix(params), POOR_SIGMA0
    elif case == "genie":
        Q0, S0 = q_matrix(params), sigma_matrix(params)
    elif case == "custom":
        if Q is None or Sigma is None:
            raise ValueError("custom initialization needs both Q and Sigma")
        Q0, S0 = np.asarray(Q, float), np.asarray(Sigma, float)
    else:
        raise ValueError(f"unknown EM initialization case {case!r}; expected one of {INIT_CASES}")
    return ThetaEstimate(Q_hat=np.array(Q0, float), sigma_f_sq_hat=float(S0[0, 0]),
                         sigma_theta_sq_hat=float(S0[1, 1]))
