"""Cross-node error statistics, residual-variance theory and convergence
detection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oscillator import OscillatorParams, adev_sigma, estimation_sigmas, jitter_sigma

CHANNELS = ("frequency", "phase", "total_phase")


@dataclass(frozen=True)
class ErrorSnapshot:
    """Per-node deviations from the array mean at one iteration.

    Phase errors use the total phase ``2 pi f T + theta`` accrued over one
    update interval, reported in degrees; frequency errors are in ppm of
    the carrier. Standard deviations use the ``N - 1`` normalization.
    """

    iteration: int
    freq_errors_ppm: np.ndarray
    phase_errors_deg: np.ndarray
    std_phase_deg: float
    std_freq_ppm: float


@dataclass(frozen=True)
class TheoryPrediction:
    sigma_e_sq: float
    lambda2: float
    n_iterations: int
    predicted_variance: float

    @property
    def bound(self) -> float:
        """Infinite-horizon limit ``sigma_e^2 lambda2^2 / (1 - lambda2^2)``."""
        l2 = self.lambda2**2
        return self.sigma_e_sq * l2 / (1.0 - l2)


def total_phase(f, theta, T: float) -> np.ndarray:
    return 2.0 * np.pi * np.asarray(f) * T + np.asarray(theta)


def snapshot(array, params: OscillatorParams, iteration: int | None = None) -> ErrorSnapshot:
    """Error statistics of an array state (anything with ``f``/``theta``)."""
    f = np.asarray(array.f, dtype=float)
    theta = np.asarray(array.theta, dtype=float)
    df = f - f.mean()
    phi = total_phase(f, theta, params.T)
    dphi = np.degrees(phi - phi.mean())
    freq_ppm = df / params.f_c * 1e6
    ddof = 1 if len(f) > 1 else 0
    return ErrorSnapshot(
        iteration=getattr(array, "k", 0) if iteration is None else iteration,
        freq_errors_ppm=freq_ppm,
        phase_errors_deg=dphi,
        std_phase_deg=float(np.std(dphi, ddof=ddof)),
        std_freq_ppm=float(np.std(freq_ppm, ddof=ddof)),
    )


def error_stds(f, theta, params: OscillatorParams) -> tuple[float, float]:
    """``(std_phase_deg, std_freq_ppm)`` of :func:`snapshot` without the
    per-node arrays."""
    n = len(f)
    ddof = 1 if n > 1 else 0
    df = f - f.sum() / n
    phi = total_phase(f, theta, params.T)
    dphi = phi - phi.sum() / n
    scale = 1.0 / (n - ddof)
    std_phase = np.degrees(np.sqrt(np.dot(dphi, dphi) * scale))
    std_freq = np.sqrt(np.dot(df, df) * scale) / params.f_c * 1e6
    return float(std_phase), float(std_freq)


def error_variance_channels(params: OscillatorParams) -> tuple[float, float]:
    """Variance injected per round into the frequency and phase channels.

    Frequency: drift plus frequency-estimation error. Phase: the drift-induced
    phase offset, phase-estimation error and jitter.
    """
    var_f = adev_sigma(params) ** 2
    sf, st = estimation_sigmas(params)
    freq = var_f + sf**2
    phase = (np.pi * params.T) ** 2 * var_f + st**2 + jitter_sigma(params) ** 2
    return float(freq), float(phase)


def total_phase_error_variance(params: OscillatorParams) -> float:
    """Injected variance of ``2 pi T f + theta``.

    The drift enters through both channels from the same draw, so its
    contributions add coherently: ``(2 pi T - pi T)^2 sigma_f^2``.
    """
    var_f = adev_sigma(params) ** 2
    sf, st = estimation_sigmas(params)
    w = 2.0 * np.pi * params.T
    return float((w - np.pi * params.T) ** 2 * var_f + w**2 * sf**2
                 + st**2 + jitter_sigma(params) ** 2)


def residual_sum(lambda2: float, n_iterations: int) -> float:
    """``sum_{i=1..I} lambda2**(2 i)``."""
    if not 0.0 <= lambda2 < 1.0:
        raise ValueError(f"lambda2 must lie in [0, 1), got {lambda2}")
    if n_iterations < 1:
        raise ValueError("need at least one iteration")
    r = lambda2 * lambda2
    if r == 0.0:
        return 0.0
    return float(r * (1.0 - r**n_iterations) / (1.0 - r))


def theoretical_residual(
    params: OscillatorParams, lambda2: float, n_iterations: int, channel: str = "phase"
) -> TheoryPrediction:
    """Predicted residual variance ``sigma_e^2 * sum lambda2^(2i)``.

    The correction term for non-uniform push-sum weights is neglected.
    """
    if channel == "frequency":
        var_e = error_variance_channels(params)[0]
    elif channel == "phase":
        var_e = error_variance_channels(params)[1]
    elif channel == "total_phase":
        var_e = total_phase_error_variance(params)
    else:
        raise ValueError(f"unknown channel {channel!r}; choose from {CHANNELS}")
    return TheoryPrediction(
        sigma_e_sq=var_e,
        lambda2=lambda2,
        n_iterations=n_iterations,
        predicted_variance=var_e * residual_sum(lambda2, n_iterations),
    )


def detect_convergence(series, window: int = 10, rel_tol: float = 0.1) -> int | None:
    """First index whose windowed mean is within ``rel_tol`` of the final one.

    ``series`` holds :class:`ErrorSnapshot` objects (``std_phase_deg`` is
    used) or plain numbers. The windowed mean over ``[k, k + window)`` is
    compared with the mean over the last ``window`` entries, for every
    ``k`` before the start of that final window. Returns ``None`` when no
    window qualifies.
    """
    values = np.array(
        [s.std_phase_deg if isinstance(s, ErrorSnapshot) else s for s in series], dtype=float
    )
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(values) < window:
        raise ValueError(f"series of length {len(values)} is shorter than window {window}")
    csum = np.concatenate([[0.0], np.cumsum(values)])
    means = (csum[window:] - csum[:-window]) / window
    final = means[-1]
    hits = np.flatnonzero(np.abs(means[:-1] - final) <= rel_tol * abs(final))
    if len(hits) == 0:
        return 0 if len(means) == 1 else None
    return int(hits[0])
