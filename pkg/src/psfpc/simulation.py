"""Per-trial scenario driver: oscillator -> observation -> filter -> consensus.

Simulations keep frequencies relative to the carrier. Every metric is
taken relative to the cross-node mean and every update is a convex or
translation-covariant combination, so the offset frame changes nothing
but the floating-point headroom.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from . import kernels
from .analysis import ErrorSnapshot, error_stds, snapshot
from .config import ScenarioConfig
from .consensus import ArrayState, ConsensusError, FilterBank, dfpc_step, psfpc_step
from .kalman import initial_state
from .network import (
    DirectedNetwork,
    WeightMatrix,
    generate,
    metropolis_weights,
    push_sum_weights,
    spectral_info,
)
from .online_em import VARIANCE_FLOOR, init_theta
from .oscillator import Observation, OscillatorParams, TrueState, init_state, observe, transition

log = logging.getLogger(__name__)

# stream purposes for counter-based seeding
NETWORK, INIT, TRANSITION, OBSERVE = range(4)


@dataclass(frozen=True)
class TrialStreams:
    """Independent RNG streams keyed by ``(base_seed, trial, purpose, iteration)``.

    Any single draw can be regenerated on its own; within a stream, node
    ``n`` takes element ``n`` of each vector draw.
    """

    base_seed: int
    trial: int

    def rng(self, purpose: int, iteration: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.base_seed, self.trial, purpose, iteration])


class TrialAborted(RuntimeError):
    pass


@dataclass
class TrialResult:
    trial: int
    seed: tuple[int, int]
    fingerprint: str
    lambda2: float
    std_phase_deg: np.ndarray
    std_freq_ppm: np.ndarray
    aborted: bool = False
    reason: str = ""
    snapshots: list[ErrorSnapshot] | None = field(default=None, repr=False)

    @property
    def n_completed(self) -> int:
        """Rounds finished before any abort (iteration 0 is the initial state)."""
        return len(self.std_phase_deg) - 1


def build_topology(config: ScenarioConfig, streams: TrialStreams, network=None, weights=None):
    net = network if network is not None else generate(
        config.n_nodes, config.connectivity, config.directed, streams.rng(NETWORK)
    )
    if net.n_nodes != config.n_nodes:
        raise ValueError(f"topology has {net.n_nodes} nodes, config wants {config.n_nodes}")
    if weights is None:
        weights = metropolis_weights(net) if config.dfpc else push_sum_weights(net)
    return net, weights


def _initial_filters(config: ScenarioConfig, params: OscillatorParams, n: int) -> FilterBank:
    case = "genie" if config.em_mode == "genie" else config.em_init_case
    theta0 = init_theta(case, params)
    return FilterBank(
        m=np.zeros((n, 2)),
        V=np.zeros((n, 2, 2)),
        Q=np.ascontiguousarray(np.broadcast_to(theta0.Q_hat, (n, 2, 2))),
        sig=np.ascontiguousarray(
            np.broadcast_to([theta0.sigma_f_sq_hat, theta0.sigma_theta_sq_hat], (n, 2))
        ),
        xi_Q=np.zeros((n, 2, 2)),
        xi_s=np.zeros((n, 2)),
    )


def iterate_scenario(
    config: ScenarioConfig,
    streams: TrialStreams,
    net: DirectedNetwork,
    W: WeightMatrix,
    initial: TrueState | None = None,
) -> Iterator[tuple[ArrayState, TrueState, Observation]]:
    """Yield ``(array, true_state, observation)`` after every round.

    ``true_state`` and ``observation`` are what the nodes saw before mixing;
    ``array`` holds the mixed result. The initial state is yielded first with
    ``true_state``/``observation`` set to ``None``.

    Raises
    ------
    TrialAborted
        On non-finite values, a singular filter covariance or a
        non-positive push-sum weight.
    """
    params = config.oscillator_params()
    n = net.n_nodes
    if initial is None:
        initial = init_state(params, streams.rng(INIT), size=n)
    start = TrueState(np.asarray(initial.f, float) - params.f_c, np.asarray(initial.theta, float))
    filters = _initial_filters(config, params, n) if config.filtered else None
    array = ArrayState.from_true_state(start, filters)
    yield array, None, None

    step = dfpc_step if config.dfpc else psfpc_step
    do_em = config.em_mode == "em"
    prior0 = initial_state(params, carrier_offset=True)
    csr = W.csr
    for k in range(1, config.n_iterations + 1):
        true = transition(array.true_state, params, streams.rng(TRANSITION, k))
        obs = observe(true, params, streams.rng(OBSERVE, k))
        y = np.ascontiguousarray(np.column_stack([obs.f_hat, obs.theta_hat]))
        if filters is not None:
            if k == 1:
                m_prior = np.ascontiguousarray(np.broadcast_to(prior0.m, (n, 2)))
                V_prior = np.ascontiguousarray(np.broadcast_to(prior0.V, (n, 2, 2)))
            else:
                m_prior = np.ascontiguousarray(np.column_stack([array.f, array.theta]))
                ps = array.push_sum
                V_prior = kernels.prior_covariance(
                    *csr, filters.V, np.ascontiguousarray(ps.s_prev), np.ascontiguousarray(ps.s)
                )
            Q, sig = filters.Q.copy(), filters.sig.copy()
            xi_Q, xi_s = filters.xi_Q.copy(), filters.xi_s.copy()
            m_post, V_post = np.empty((n, 2)), np.empty((n, 2, 2))
            status = kernels.filter_round(
                m_prior, V_prior, y, Q, sig, xi_Q, xi_s, m_post, V_post,
                k, config.alpha_em, do_em, VARIANCE_FLOOR,
            )
            if status:
                raise TrialAborted(f"singular covariance at node {status - 1}, iteration {k}")
            filters = FilterBank(m_post, V_post, Q, sig, xi_Q, xi_s, k)
            z = m_post
        else:
            z = y
        try:
            array = step(array, W, z)
        except ConsensusError as exc:
            raise TrialAborted(f"iteration {k}: {exc}") from exc
        if filters is not None:
            array = replace(array, filters=filters)
        if not (np.all(np.isfinite(array.f)) and np.all(np.isfinite(array.theta))):
            raise TrialAborted(f"non-finite state at iteration {k}")
        yield array, true, obs


def run_scenario(
    config: ScenarioConfig,
    trial: int = 0,
    *,
    network: DirectedNetwork | None = None,
    weights: WeightMatrix | None = None,
    keep_snapshots: bool = False,
) -> TrialResult:
    """Run one Monte Carlo trial and collect per-iteration error statistics.

    A fresh network is generated from the trial's own stream unless one is
    supplied. Numerical failures end the trial early and are flagged in the
    result, never dropped.
    """
    streams = TrialStreams(config.base_seed, trial)
    params = config.oscillator_params()
    net, W = build_topology(config, streams, network, weights)
    lam2 = spectral_info(W).lambda2
    std_phase, std_freq, snaps = [], [], []
    aborted, reason = False, ""
    try:
        for array, _, _ in iterate_scenario(config, streams, net, W):
            if keep_snapshots:
                snap = snapshot(array, params)
                snaps.append(snap)
                sp, sf = snap.std_phase_deg, snap.std_freq_ppm
            else:
                sp, sf = error_stds(array.f, array.theta, params)
            std_phase.append(sp)
            std_freq.append(sf)
    except TrialAborted as exc:
        aborted, reason = True, str(exc)
        log.warning("trial %d aborted: %s", trial, reason)
    return TrialResult(
        trial=trial,
        seed=(config.base_seed, trial),
        fingerprint=net.fingerprint(),
        lambda2=lam2,
        std_phase_deg=np.array(std_phase),
        std_freq_ppm=np.array(std_freq),
        aborted=aborted,
        reason=reason,
        snapshots=snaps if keep_snapshots else None,
    )
