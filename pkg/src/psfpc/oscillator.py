"""Oscillator drift/jitter and frequency/phase estimation-noise models.

All functions are pure; randomness comes from an injected
:class:`numpy.random.Generator`. Functions that take a :class:`TrueState`
work equally on scalar fields or on per-node arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OscillatorParams:
    """Stochastic model parameters of one array node.

    Parameters
    ----------
    f_c : float
        Carrier frequency in Hz.
    beta1, beta2 : float
        Allan-deviation design constants (quartz crystal: 5e-19 each).
    A_dBc : float
        Integrated phase-noise power in dB. ``-inf`` disables jitter.
    sigma_init_ppm : float
        Initial clock accuracy in parts per million.
    T : float
        Update interval in seconds.
    f_s : float
        Sampling frequency in Hz.
    snr_linear : float
        Observation SNR (linear). ``inf`` disables estimation noise.
    phase_init_range : float
        Width of the uniform initial-phase distribution; 0 pins every
        initial phase to zero.
    """

    f_c: float = 1e9
    beta1: float = 5e-19
    beta2: float = 5e-19
    A_dBc: float = -53.46
    sigma_init_ppm: float = 100.0
    T: float = 1e-4
    f_s: float = 1e7
    snr_linear: float = 1000.0
    phase_init_range: float = 2 * np.pi

    def __post_init__(self):
        if not (self.f_c > 0 and self.T > 0 and self.f_s > 0 and self.snr_linear > 0):
            raise ValueError("f_c, T, f_s and snr_linear must be positive")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("beta1 and beta2 must be non-negative")
        if self.sigma_init_ppm < 0 or self.phase_init_range < 0:
            raise ValueError("initial-distribution widths must be non-negative")

    @property
    def L(self) -> float:
        """Number of samples per observation window."""
        return self.T * self.f_s

    @property
    def sigma_init(self) -> float:
        """Standard deviation of the initial frequency, Hz."""
        return self.sigma_init_ppm * 1e-6 * self.f_c

    @classmethod
    def noiseless(cls, **overrides) -> "OscillatorParams":
        """Parameters with drift, jitter and estimation noise all disabled."""
        kw = dict(beta1=0.0, beta2=0.0, A_dBc=-np.inf, snr_linear=np.inf)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class TrueState:
    """Instantaneous frequency (Hz) and unwrapped phase (rad)."""

    f: np.ndarray | float
    theta: np.ndarray | float


@dataclass(frozen=True)
class Observation:
    """Noisy frequency (Hz) and phase (rad) estimates."""

    f_hat: np.ndarray | float
    theta_hat: np.ndarray | float


def snr_db_to_linear(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


def adev_sigma(params: OscillatorParams) -> float:
    """Per-interval frequency-drift std ``f_c * sqrt(beta1/T + beta2*T)``."""
    return params.f_c * np.sqrt(params.beta1 / params.T + params.beta2 * params.T)


def jitter_sigma(params: OscillatorParams) -> float:
    """Per-interval phase-jitter std ``sqrt(2 * 10**(A/10))``."""
    return float(np.sqrt(2.0 * 10.0 ** (params.A_dBc / 10.0)))


def estimation_sigmas(params: OscillatorParams) -> tuple[float, float]:
    """Frequency and phase estimation-error stds set at their CRLBs.

    Returns
    -------
    (sigma_f_meas, sigma_theta_meas)
        ``f_c*sqrt(6/((2 pi)^2 L^3 SNR))`` in Hz and ``2/(L*SNR)`` in rad.

    Raises
    ------
    ValueError
        If the observation window holds fewer than one sample.
    """
    L = params.L
    if L < 1:
        raise ValueError(f"observation window too short: L = T*f_s = {L} < 1")
    snr = params.snr_linear
    sigma_f = params.f_c * np.sqrt(6.0 / ((2 * np.pi) ** 2 * L**3 * snr))
    sigma_theta = 2.0 / (L * snr)
    return float(sigma_f), float(sigma_theta)


def q_matrix(params: OscillatorParams) -> np.ndarray:
    """Innovation covariance of the state ``[f, theta]`` over one interval."""
    var_f = adev_sigma(params) ** 2
    c = np.pi * params.T
    return np.array(
        [[var_f, -c * var_f], [-c * var_f, c * c * var_f + jitter_sigma(params) ** 2]]
    )


def sigma_matrix(params: OscillatorParams) -> np.ndarray:
    """Diagonal measurement covariance from :func:`estimation_sigmas`."""
    sf, st = estimation_sigmas(params)
    return np.diag([sf * sf, st * st])


def init_state(
    params: OscillatorParams, rng: np.random.Generator, size: int | None = None
) -> TrueState:
    """Draw initial states ``f ~ N(f_c, sigma^2)``, ``theta ~ U(0, range)``."""
    f = params.f_c + params.sigma_init * rng.standard_normal(size)
    theta = params.phase_init_range * rng.random(size)
    return TrueState(f=f, theta=theta)


def transition(
    state: TrueState, params: OscillatorParams, rng: np.random.Generator
) -> TrueState:
    """Advance the oscillator by one update interval.

    The frequency drift ``df`` and its induced phase offset ``-pi*T*df`` come
    from the same draw, so the two are exactly coupled. Jitter is drawn
    second, independently.
    """
    shape = np.shape(state.f)
    size = shape if shape else None
    df = adev_sigma(params) * rng.standard_normal(size)
    dtheta = jitter_sigma(params) * rng.standard_normal(size)
    return TrueState(
        f=state.f + df,
        theta=state.theta - np.pi * params.T * df + dtheta,
    )


def observe(
    state: TrueState, params: OscillatorParams, rng: np.random.Generator
) -> Observation:
    """Add independent zero-mean Gaussian estimation errors to a state."""
    shape = np.shape(state.f)
    size = shape if shape else None
    sf, st = estimation_sigmas(params)
    eps_f = sf * rng.standard_normal(size)
    eps_t = st * rng.standard_normal(size)
    return Observation(f_hat=state.f + eps_f, theta_hat=state.theta + eps_t)
