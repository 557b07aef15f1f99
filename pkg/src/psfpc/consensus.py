"""Synchronous push-sum (PsFPC) and average-consensus (DFPC) rounds.

A round reads only the previous round's values of every node, so node
order never matters. Frequencies and phases are mixed as a pair, stored
as ``(n, 2)`` arrays ``[f, theta]``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .network import WeightMatrix
from .oscillator import Observation, TrueState


class ConsensusError(RuntimeError):
    """Raised when a round would produce invalid push-sum weights."""


@dataclass(frozen=True)
class PushSumState:
    """Push-sum numerators ``x`` (n, 2), weights ``s`` and the weights of
    the round before (``s_prev``), which the KF prior needs."""

    x: np.ndarray
    s: np.ndarray
    s_prev: np.ndarray

    @classmethod
    def initial(cls, n: int) -> "PushSumState":
        return cls(x=np.zeros((n, 2)), s=np.ones(n), s_prev=np.ones(n))


@dataclass(frozen=True)
class FilterBank:
    """Per-node Kalman posteriors, working covariances and EM accumulators."""

    m: np.ndarray  # (n, 2)
    V: np.ndarray  # (n, 2, 2)
    Q: np.ndarray  # (n, 2, 2)
    sig: np.ndarray  # (n, 2) diagonal of Sigma
    xi_Q: np.ndarray  # (n, 2, 2)
    xi_s: np.ndarray  # (n, 2)
    k: int = 0


@dataclass(frozen=True)
class ArrayState:
    """Whole-array state after some round ``k``."""

    f: np.ndarray
    theta: np.ndarray
    push_sum: PushSumState
    filters: FilterBank | None = None
    k: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.f)

    @property
    def true_state(self) -> TrueState:
        return TrueState(self.f, self.theta)

    @classmethod
    def from_true_state(cls, state: TrueState, filters: FilterBank | None = None):
        f = np.array(state.f, dtype=float)
        return cls(f=f, theta=np.array(state.theta, dtype=float),
                   push_sum=PushSumState.initial(len(f)), filters=filters)


def _stack(observations) -> np.ndarray:
    if isinstance(observations, Observation):
        return np.ascontiguousarray(
            np.column_stack([observations.f_hat, observations.theta_hat]), dtype=float
        )
    return np.ascontiguousarray(observations, dtype=float)


def psfpc_step(array: ArrayState, W: WeightMatrix, observations) -> ArrayState:
    """One push-sum round on the shared estimates.

    ``observations`` is an :class:`Observation` of per-node arrays, or an
    ``(n, 2)`` array of ``[f, theta]`` values (e.g. Kalman posterior means).
    Each node forms ``x_n = sum_m w[n,m] z_m s_m(k-1)`` and
    ``s_n = sum_m w[n,m] s_m(k-1)`` and adopts ``x_n / s_n``.
    """
    z = _stack(observations)
    if z.shape != (array.n_nodes, 2) or W.n != array.n_nodes:
        raise ValueError("observations, weights and array disagree on node count")
    ps = array.push_sum
    x, s = kernels.mix_push_sum(*W.csr, z, np.ascontiguousarray(ps.s))
    if not np.all(s > 0.0):
        bad = int(np.flatnonzero(~(s > 0.0))[0])
        raise ConsensusError(f"push-sum weight of node {bad} is not positive ({s[bad]!r})")
    ratio = x / s[:, None]
    return replace(
        array,
        f=ratio[:, 0],
        theta=ratio[:, 1],
        push_sum=PushSumState(x=x, s=s, s_prev=ps.s),
        k=array.k + 1,
    )


def dfpc_step(array: ArrayState, W: WeightMatrix, observations) -> ArrayState:
    """One average-consensus round ``z_n = sum_m w[n,m] z_m``.

    Push-sum weights stay at 1, so the Kalman prior construction is shared
    with the push-sum variant.
    """
    if W.kind != "doubly":
        raise ValueError("DFPC needs a doubly-stochastic weight matrix")
    z = _stack(observations)
    if z.shape != (array.n_nodes, 2) or W.n != array.n_nodes:
        raise ValueError("observations, weights and array disagree on node count")
    out = kernels.mix_average(*W.csr, z)
    return replace(array, f=out[:, 0], theta=out[:, 1], k=array.k + 1)
