"""K-terminal spanning tree engine.

Per lifetime sample: maximum spanning tree (Kruskal), pruning of hanging
branches, the resulting terminal-connection lifetime, and the chain of M+1
state vectors with their structure-function values. One spanning-tree pass
labels the whole chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .net_model import FailureMode, Network


class DisconnectedGraph(ValueError):
    """The all-working graph does not connect all nodes."""


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def max_spanning_tree(net: Network, weights: np.ndarray) -> list[int]:
    """Kruskal's maximum spanning tree over the edges of the graph.

    ``weights`` is one value per edge. Equal weights are broken by
    ascending edge index. Returns the selected edge indices.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n_e = len(net.edges)
    if weights.shape != (n_e,):
        raise ValueError(f"expected {n_e} edge weights, got {weights.shape}")
    order = np.lexsort((np.arange(n_e), -weights))
    uf = UnionFind(len(net.nodes))
    tree: list[int] = []
    ee = net.edge_endpoints
    for e in order:
        if uf.union(int(ee[e, 0]), int(ee[e, 1])):
            tree.append(int(e))
            if len(tree) == len(net.nodes) - 1:
                return tree
    raise DisconnectedGraph("graph is not connected; no spanning tree exists")


def prune_to_terminals(net: Network, tree: list[int]) -> list[int]:
    """Strip hanging branches: repeatedly remove degree-1 non-terminal
    leaves, leaving the minimal subtree connecting all terminals."""
    tree = list(tree)
    ee = net.edge_endpoints
    degree = np.zeros(len(net.nodes), dtype=np.int64)
    incident: dict[int, list[int]] = {}
    for e in tree:
        u, v = int(ee[e, 0]), int(ee[e, 1])
        degree[u] += 1
        degree[v] += 1
        incident.setdefault(u, []).append(e)
        incident.setdefault(v, []).append(e)

    terminals = set(net.terminal_indices)
    alive = set(tree)
    leaves = [
        n for n in incident
        if degree[n] == 1 and n not in terminals
    ]
    while leaves:
        n = leaves.pop()
        for e in incident[n]:
            if e not in alive:
                continue
            alive.discard(e)
            u, v = int(ee[e, 0]), int(ee[e, 1])
            other = v if u == n else u
            degree[u] -= 1
            degree[v] -= 1
            if degree[other] == 1 and other not in terminals:
                leaves.append(other)
    return [e for e in tree if e in alive]


def k_lifetime(net: Network, weights: np.ndarray) -> tuple[float, int]:
    """Terminal-connection lifetime and its rank.

    The returned time is the minimum weight on the terminal-pruned maximum
    spanning tree (for two terminals: the widest-path bottleneck). The rank
    is the 1-based position of that edge in the ascending weight sort with
    ties broken by ascending edge index.
    """
    weights = np.asarray(weights, dtype=np.float64)
    pruned = prune_to_terminals(net, max_spanning_tree(net, weights))
    crit = min(pruned, key=lambda e: (weights[e], e))
    asc = np.lexsort((np.arange(len(weights)), weights))
    rank = int(np.nonzero(asc == crit)[0][0]) + 1
    return float(weights[crit]), rank


@dataclass
class StateChain:
    """The M+1 state vectors induced by failing one sample's components in
    ascending lifetime order, with their structure-function values."""

    m: int
    order: np.ndarray        # ascending (lifetime, index) permutation
    sorted_times: np.ndarray
    k_lifetime: float
    k_rank: int              # 1-based; phi[i] = 1 iff i <= k_rank

    @cached_property
    def vectors(self) -> np.ndarray:
        """(M+1, M) matrix; row i has the i shortest-lived components failed."""
        out = np.ones((self.m + 1, self.m), dtype=np.uint8)
        fail = np.tril(np.ones((self.m + 1, self.m), dtype=bool), k=-1)
        cols = np.broadcast_to(self.order, (self.m + 1, self.m))
        rows = np.broadcast_to(
            np.arange(self.m + 1)[:, None], (self.m + 1, self.m)
        )
        out[rows[fail], cols[fail]] = 0
        return out

    @property
    def phi(self) -> np.ndarray:
        return (np.arange(1, self.m + 2) <= self.k_rank).astype(np.uint8)


def _always_alive_nodes(net: Network) -> np.ndarray:
    alive = np.zeros(len(net.nodes), dtype=bool)
    for t in net.terminal_indices:
        alive[t] = True
    if net.failure_mode is FailureMode.NODE:
        comp = net.node_component
        alive |= comp < 0
    return alive


class _ChainEngine:
    """Precomputed adjacency for repeated per-sample rank computations."""

    def __init__(self, net: Network):
        self.net = net
        self.n_v = len(net.nodes)
        self.terminals = list(net.terminal_indices)
        self.mode = net.failure_mode
        ee = net.edge_endpoints
        if self.mode is FailureMode.NODE:
            self.base_alive = _always_alive_nodes(net)
            comp = net.node_component
            # neighbours per component, as node indices
            self.comp_node = np.nonzero(comp >= 0)[0]
            adj: list[list[int]] = [[] for _ in range(self.n_v)]
            for u, v in ee:
                adj[int(u)].append(int(v))
                adj[int(v)].append(int(u))
            self.adj = adj
            self.base_edges = [
                (int(u), int(v)) for u, v in ee
                if self.base_alive[u] and self.base_alive[v]
            ]
        else:
            self.edge_u = [int(u) for u, _ in ee]
            self.edge_v = [int(v) for _, v in ee]

    def k_rank_of(self, order: np.ndarray) -> int:
        """1-based failure rank for a revive scan in reverse chain order.

        Components are revived from the longest-lived downward; the revive
        step at which the terminals first connect is exactly the chain
        position where connectivity is lost. Returns M+1 when the network
        cannot fail at all.
        """
        uf = UnionFind(self.n_v)
        terminals = self.terminals
        src = terminals[0]
        want = len(terminals)
        # per-root count of terminals it contains
        tcount = [0] * self.n_v
        for t in terminals:
            tcount[t] += 1

        def merge(a: int, b: int) -> bool:
            ra, rb = uf.find(a), uf.find(b)
            if ra == rb:
                return False
            uf.union(ra, rb)
            r = uf.find(ra)
            tcount[r] = tcount[ra] + tcount[rb]
            return tcount[r] == want

        m = len(order)
        if self.mode is FailureMode.NODE:
            alive = self.base_alive.copy()
            for u, v in self.base_edges:
                if merge(u, v):
                    return m + 1
            comp_node = self.comp_node
            adj = self.adj
            for i in range(m - 1, -1, -1):
                node = int(comp_node[order[i]])
                alive[node] = True
                for nb in adj[node]:
                    if alive[nb] and merge(node, nb):
                        return i + 1
            return 0  # unreachable for validated connected networks
        else:
            eu, ev = self.edge_u, self.edge_v
            for i in range(m - 1, -1, -1):
                e = int(order[i])
                if merge(eu[e], ev[e]):
                    return i + 1
            return 0


def build_chain(net: Network, times: np.ndarray) -> StateChain:
    """Sort one lifetime sample and label its whole state-vector chain with
    a single terminal-connectivity pass."""
    times = np.asarray(times, dtype=np.float64)
    if times.shape != (net.m,):
        raise ValueError("sample length does not match component count")
    order = np.lexsort((np.arange(net.m), times))
    engine = _ChainEngine(net)
    k_rank = engine.k_rank_of(order)
    t_k = float(times[order[k_rank - 1]]) if k_rank <= net.m else np.inf
    return StateChain(
        m=net.m,
        order=order,
        sorted_times=times[order],
        k_lifetime=t_k,
        k_rank=k_rank,
    )


def chain_arrays(
    net: Network, times: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batch form of :func:`build_chain` over a pool of samples.

    Returns (orders, k_ranks): orders is (n, M) with each row the ascending
    (lifetime, index) permutation, k_ranks is (n,) of 1-based ranks.
    """
    times = np.atleast_2d(np.asarray(times, dtype=np.float64))
    n, m = times.shape
    if m != net.m:
        raise ValueError("sample width does not match component count")
    idx = np.broadcast_to(np.arange(m), (n, m))
    orders = np.lexsort((idx, times), axis=1)
    engine = _ChainEngine(net)
    k_ranks = np.empty(n, dtype=np.int64)
    for j in range(n):
        k_ranks[j] = engine.k_rank_of(orders[j])
    return orders, k_ranks
