"""Random array topologies, consensus weight matrices and spectral data."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

MAX_ATTEMPTS = 200_000


class TopologyError(ValueError):
    """Raised when a requested network cannot be built."""


class SpectralError(RuntimeError):
    """Raised when eigen-quantities of a weight matrix cannot be obtained."""


@dataclass(frozen=True)
class DirectedNetwork:
    """A directed graph on nodes ``0..n_nodes-1``.

    ``edges`` holds ordered ``(from, to)`` pairs without self-pairs; an
    undirected network stores both orientations of every link. ``self_loop``
    marks whether each node keeps a push-sum share for itself.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    self_loop: bool = True
    undirected: bool = field(default=False, compare=False)

    def __post_init__(self):
        edges = tuple(sorted({(int(a), int(b)) for a, b in self.edges}))
        if len(edges) != len(self.edges):
            raise TopologyError("duplicate edges")
        for a, b in edges:
            if a == b:
                raise TopologyError(f"self-pair ({a}, {a}) stored as an edge")
            if not (0 <= a < self.n_nodes and 0 <= b < self.n_nodes):
                raise TopologyError(f"edge ({a}, {b}) out of range")
        object.__setattr__(self, "edges", edges)

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            nbrs[b].append(a)
        return tuple(tuple(x) for x in nbrs)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            nbrs[a].append(b)
        return tuple(tuple(x) for x in nbrs)

    @property
    def n_connections(self) -> int:
        """Links counted once: directed edges, or undirected pairs."""
        return len(self.edges) // 2 if self.undirected else len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``A[to, from]`` set for every edge."""
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        if self.edges:
            e = np.array(self.edges)
            A[e[:, 1], e[:, 0]] = True
        return A

    def is_symmetric(self) -> bool:
        es = set(self.edges)
        return all((b, a) in es for a, b in es)

    def is_strongly_connected(self) -> bool:
        return is_strongly_connected(self.n_nodes, self.edges)

    def fingerprint(self) -> str:
        """Short stable hash of the node count and edge set."""
        h = hashlib.sha1(f"{self.n_nodes}:".encode())
        h.update(",".join(f"{a}-{b}" for a, b in self.edges).encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class WeightMatrix:
    """Dense nonnegative mixing matrix; ``W[n, m]`` weighs what m sends n."""

    W: np.ndarray
    kind: str  # "column" (push-sum) or "doubly" (average consensus)

    def __post_init__(self):
        if self.kind not in ("column", "doubly"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        if np.any(W < 0):
            raise ValueError("weights must be nonnegative")
        if not np.allclose(W.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise ValueError("columns must sum to 1")
        if self.kind == "doubly" and not np.allclose(W.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("rows must sum to 1 for a doubly-stochastic matrix")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, indices, data)`` of the row-compressed nonzeros."""
        m = csr_matrix(self.W)
        m.sort_indices()
        return (
            m.indptr.astype(np.intp),
            m.indices.astype(np.intp),
            m.data.astype(np.float64),
        )


@dataclass(frozen=True)
class SpectralInfo:
    lambda2: float
    pi: np.ndarray


def is_strongly_connected(n: int, edges) -> bool:
    if n <= 1:
        return True
    e = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    g = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    n_comp, _ = connected_components(g, directed=True, connection="strong")
    return n_comp == 1


def edge_budget(n: int, c: float) -> int:
    """Number of links for connectivity ``c``: ``round(c * n(n-1)/2)``."""
    return int(math.floor(c * n * (n - 1) / 2 + 0.5))


def _pair_from_index(idx: np.ndarray, n: int, directed: bool):
    """Map flat link indices to ``(from, to)`` arrays."""
    if directed:
        # index over the n(n-1) ordered pairs with a != b
        a = idx // (n - 1)
        b = idx % (n - 1)
        return a, b + (b >= a)
    iu, ju = np.triu_indices(n, k=1)
    return iu[idx], ju[idx]


def _min_degree_ok(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Per-row test that every node has an outgoing and an incoming link."""
    rows = a.shape[0]
    offs = (np.arange(rows) * n)[:, None]
    out_deg = np.bincount((a + offs).ravel(), minlength=rows * n).reshape(rows, n)
    in_deg = np.bincount((b + offs).ravel(), minlength=rows * n).reshape(rows, n)
    return (out_deg.min(axis=1) > 0) & (in_deg.min(axis=1) > 0)


def generate(
    n: int,
    c: float,
    directed: bool,
    rng: np.random.Generator,
    *,
    self_loop: bool = True,
    max_attempts: int = MAX_ATTEMPTS,
) -> DirectedNetwork:
    """Sample a strongly connected network with exactly the budgeted links.

    Uniformly random link sets of size :func:`edge_budget` are drawn and
    rejected until one is strongly connected. Undirected links become two
    opposite directed edges. Candidates are drawn in growing batches but
    tested in order, which is plain sequential rejection sampling.

    Raises
    ------
    TopologyError
        If the budget is below the connectivity floor (``n`` directed
        edges, ``n - 1`` undirected links), exceeds the number of possible
        links, or no sample succeeded within ``max_attempts``.
    """
    if n < 2:
        raise TopologyError("need at least two nodes")
    if not 0.0 <= c <= 1.0:
        raise TopologyError(f"connectivity must lie in [0, 1], got {c}")
    budget = edge_budget(n, c)
    floor = n if directed else n - 1
    if budget < floor:
        raise TopologyError(
            f"{budget} links cannot strongly connect {n} nodes (need >= {floor})"
        )
    n_possible = n * (n - 1) if directed else n * (n - 1) // 2
    if budget > n_possible:
        raise TopologyError(f"budget {budget} exceeds {n_possible} possible links")

    attempts, batch = 0, 1
    while attempts < max_attempts:
        rows = min(batch, max_attempts - attempts)
        keys = rng.random((rows, n_possible))
        if budget < n_possible:
            idx = np.sort(np.argpartition(keys, budget - 1, axis=1)[:, :budget], axis=1)
        else:
            idx = np.broadcast_to(np.arange(n_possible), (rows, n_possible))
        a, b = _pair_from_index(idx, n, directed)
        if not directed:
            a, b = np.concatenate([a, b], axis=1), np.concatenate([b, a], axis=1)
        for r in np.flatnonzero(_min_degree_ok(a, b, n)):
            pairs = np.stack([a[r], b[r]], axis=1)
            if is_strongly_connected(n, pairs):
                return DirectedNetwork(
                    n, tuple(map(tuple, pairs.tolist())), self_loop, undirected=not directed
                )
        attempts += rows
        batch = min(2 * batch, 256)
    raise TopologyError(
        f"no strongly connected sample for n={n}, c={c} in {max_attempts} attempts"
    )


def push_sum_weights(net: DirectedNetwork) -> WeightMatrix:
    """Column-stochastic weights ``w[n, m] = 1 / d_out(m)`` for ``m -> n``.

    With ``self_loop`` the sender counts itself as a recipient, so
    ``d_out(m) = |out(m)| + 1`` and ``w[m, m] = 1 / d_out(m)``.
    """
    n = net.n_nodes
    A = net.adjacency().astype(float)
    if net.self_loop:
        A += np.eye(n)
    d_out = A.sum(axis=0)
    if np.any(d_out == 0):
        raise TopologyError("node without out-neighbors")
    return WeightMatrix(A / d_out[None, :], "column")


def metropolis_weights(net: DirectedNetwork) -> WeightMatrix:
    """Metropolis-Hastings doubly-stochastic weights for an undirected graph."""
    if not net.is_symmetric():
        raise TopologyError("Metropolis weights need a symmetric (undirected) network")
    n = net.n_nodes
    A = net.adjacency()
    deg = A.sum(axis=1)
    W = np.where(A, 1.0 / (1.0 + np.maximum(deg[:, None], deg[None, :])), 0.0)
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return WeightMatrix(W, "doubly")


def spectral_info(W: WeightMatrix, tol: float = 1e-10) -> SpectralInfo:
    """Second-largest eigenvalue modulus and stationary distribution of ``W``.

    The stationary vector solves ``(W - I) pi = 0`` with ``sum(pi) = 1`` by
    least squares on the augmented system.
    """
    M = W.W
    n = M.shape[0]
    try:
        eig = np.linalg.eigvals(M)
        A = np.vstack([M - np.eye(n), np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
    except np.linalg.LinAlgError as exc:
        raise SpectralError(str(exc)) from exc
    if np.max(np.abs(M @ pi - pi)) > tol or np.any(pi <= 0):
        raise SpectralError("no positive stationary distribution (not strongly connected?)")
    if W.kind == "doubly":
        pi = np.full(n, 1.0 / n)
    mods = np.sort(np.abs(eig))[::-1]
    lambda2 = float(mods[1]) if n > 1 else 0.0
    if lambda2 >= 1.0 - tol:
        raise SpectralError(f"second eigenvalue modulus {lambda2!r} is not below 1")
    return SpectralInfo(lambda2=lambda2, pi=pi)


def write_adjacency(net: DirectedNetwork, path) -> None:
    """Write ``from to`` pairs, one per line, 0-indexed."""
    lines = [f"# n_nodes {net.n_nodes}"] + [f"{a} {b}" for a, b in net.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_adjacency(path, n_nodes: int | None = None, self_loop: bool = True) -> DirectedNetwork:
    """Read a topology written by :func:`write_adjacency`.

    The node count comes from an ``# n_nodes`` header, else ``n_nodes``, else
    one more than the largest index seen.
    """
    edges = []
    header_n = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n_nodes":
                header_n = int(parts[1])
            continue
        a, b = line.split()
        edges.append((int(a), int(b)))
    n = header_n or n_nodes or (1 + max(max(e) for e in edges))
    net = DirectedNetwork(n, tuple(edges), self_loop)
    if net.is_symmetric():
        net = DirectedNetwork(n, net.edges, self_loop, undirected=True)
    return net
