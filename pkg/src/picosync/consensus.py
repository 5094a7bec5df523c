"""Topologies, Metropolis-Hastings mixing matrices and the consensus update."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import networkx as nx
import numpy as np

PRESET_TOPOLOGIES: dict[str, list[tuple[int, int]]] = {
    "3conn": [(0, 1), (1, 2), (2, 3)],
    "4conn-ring": [(0, 1), (1, 2), (2, 3), (0, 3)],
    "5conn": [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
    "full": [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
}


@dataclass(frozen=True)
class TopologyGraph:
    n: int
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @classmethod
    def preset(cls, name: str, n: int = 4) -> "TopologyGraph":
        if name == "full":
            return cls(n, tuple(itertools.combinations(range(n), 2)))
        if name == "ring":
            return cls(n, tuple((i, (i + 1) % n) for i in range(n)))
        try:
            edges = PRESET_TOPOLOGIES[name]
        except KeyError:
            raise ValueError(
                f"unknown topology {name!r}; choose from {sorted(PRESET_TOPOLOGIES)}"
            ) from None
        if n != 4:
            raise ValueError(f"topology {name!r} is defined for 4 nodes")
        return cls(4, tuple(edges))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def components(self) -> list[set[int]]:
        return [set(c) for c in nx.connected_components(self.to_networkx())]

    def algebraic_connectivity(self) -> float:
        """Second-smallest Laplacian eigenvalue (0 for a disconnected graph)."""
        if self.n < 2:
            return 0.0
        a = self.adjacency()
        lap = np.diag(a.sum(axis=1)) - a
        return float(np.sort(np.linalg.eigvalsh(lap))[1])


def metropolis_hastings_weights(g: TopologyGraph) -> np.ndarray:
    """Constant-edge MH weights: ``1 / (max(deg i, deg j) + 1)`` per edge."""
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (max(deg[i], deg[j]) + 1)
    w[np.diag_indices(g.n)] = 1.0 - w.sum(axis=1)
    return w


def check_mixing_matrix(w: np.ndarray, g: TopologyGraph | None = None, tol: float = 1e-12) -> None:
    """Raise ``ValueError`` unless ``w`` is a valid mixing matrix for ``g``."""
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("mixing matrix must be square")
    if not np.allclose(w, w.T, atol=tol, rtol=0):
        raise ValueError("mixing matrix is not symmetric")
    if np.any(np.abs(w.sum(axis=0) - 1) > tol) or np.any(np.abs(w.sum(axis=1) - 1) > tol):
        raise ValueError("mixing matrix is not doubly stochastic")
    if np.any(w < -tol):
        raise ValueError("mixing matrix has negative entries")
    if g is not None:
        allowed = g.adjacency() + np.eye(g.n)
        if np.any((allowed == 0) & (np.abs(w) > tol)):
            raise ValueError("mixing matrix couples nodes that share no edge")


def second_largest_eigenvalue_modulus(w: np.ndarray) -> float:
    """Asymptotic per-iteration contraction of disagreement under ``w``."""
    ev = np.sort(np.abs(np.linalg.eigvalsh(w)))[::-1]
    return float(ev[1]) if len(ev) > 1 else 0.0


def offsets_from_times(times: np.ndarray, g: TopologyGraph) -> np.ndarray:
    """Exact offset matrix: ``D[j, i] = t_j - t_i`` on edges, zero elsewhere."""
    t = np.asarray(times, dtype=float)
    d = np.zeros((g.n, g.n))
    for i, j in g.edges:
        d[j, i] = t[j] - t[i]
        d[i, j] = t[i] - t[j]
    return d


def consensus_increments(offsets: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Per-node correction ``(W @ D)[i, i] = sum_j w[i, j] * D[j, i]``."""
    d = np.asarray(offsets, dtype=float)
    w = np.asarray(w, dtype=float)
    if d.shape != w.shape or d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"offset matrix {d.shape} does not match mixing matrix {w.shape}")
    if np.any(np.diag(d) != 0):
        raise ValueError("a node's offset to itself must be zero")
    return np.einsum("ij,ji->i", w, d)


def consensus_step(times: np.ndarray, offsets: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One synchronous consensus update of every node's time."""
    t = np.asarray(times, dtype=float)
    if t.shape != (np.shape(w)[0],):
        raise ValueError(f"{t.shape[0]} node times for a {np.shape(w)[0]}-node mixing matrix")
    return t + consensus_increments(offsets, w)


@dataclass(frozen=True)
class ConvergenceMetrics:
    max_abs: np.ndarray  # s, per iteration
    spread: np.ndarray  # s, RMS offset per iteration
    log_magnitude_dbps: np.ndarray  # 10*log10(|offset| / 1 ps), per iteration and edge

    def crossing_iteration(self, threshold: float) -> int | None:
        return threshold_crossing(self.max_abs, threshold)


def log_magnitude_dbps(offsets: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.abs(np.asarray(offsets, dtype=float)) / 1e-12)


def convergence_metrics(offsets_history) -> ConvergenceMetrics:
    """Summarise an ``(iterations, edges)`` offset history.

    NaN entries (failed exchanges) are ignored per iteration.
    """
    h = np.asarray(offsets_history, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] < 1:
        raise ValueError("need at least one iteration")
    return ConvergenceMetrics(
        max_abs=np.nanmax(np.abs(h), axis=1),
        spread=np.sqrt(np.nanmean(h**2, axis=1)),
        log_magnitude_dbps=log_magnitude_dbps(h),
    )


def threshold_crossing(series: Iterable[float], threshold: float) -> int | None:
    """First index from which ``series`` stays strictly below ``threshold``."""
    s = np.asarray(list(series), dtype=float)
    above = np.flatnonzero(~(s < threshold))
    if above.size == 0:
        return 0
    last = int(above[-1])
    return None if last == len(s) - 1 else last + 1


def connected_graphs(n: int) -> Iterator[TopologyGraph]:
    """Every connected labelled graph on ``n`` nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = tuple(p for b, p in enumerate(pairs) if mask >> b & 1)
        g = TopologyGraph(n, edges)
        if g.is_connected():
            yield g
