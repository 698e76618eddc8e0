"""Shared fixtures and independent oracles.

The oracles here avoid the spanning-tree machinery entirely: exhaustive
state enumeration with a plain BFS connectivity check, and widest-path
bottlenecks by enumerating all simple terminal-to-terminal paths.
"""

import itertools

import numpy as np
import pytest

from kstrel.net_model import (
    FailureMode,
    Network,
    combination_of,
    terminals_connected,
)
from kstrel.lifetimes import LifetimeDistribution


@pytest.fixture
def bridge():
    """4-node, 5-edge two-terminal network; the canonical desk oracle."""
    return Network.build(
        nodes=["s", "a", "b", "t"],
        edges=[("s", "a"), ("s", "b"), ("a", "b"), ("a", "t"), ("b", "t")],
        terminals=["s", "t"],
        failure_mode=FailureMode.EDGE,
        class_members={1: ["e1", "e2", "e3", "e4", "e5"]},
        name="bridge",
    )


@pytest.fixture
def bridge_dists():
    return {1: LifetimeDistribution("exponential", (1.0,))}


@pytest.fixture
def bridge_two_class():
    return Network.build(
        nodes=["s", "a", "b", "t"],
        edges=[("s", "a"), ("s", "b"), ("a", "b"), ("a", "t"), ("b", "t")],
        terminals=["s", "t"],
        failure_mode=FailureMode.EDGE,
        class_members={1: ["e1", "e2", "e3"], 2: ["e4", "e5"]},
        name="bridge2",
    )


# -- random network generators -------------------------------------------

def random_edge_network(
    rng: np.random.Generator,
    n_v: int,
    n_extra: int,
    n_classes: int = 1,
    name: str = "",
) -> Network:
    """Random connected simple graph: a random spanning tree plus extra
    edges; terminals are node 0 and node n_v - 1; edges fail."""
    nodes = [f"v{i}" for i in range(n_v)]
    edges = set()
    perm = rng.permutation(n_v)
    for i in range(1, n_v):
        a = int(perm[i])
        b = int(perm[rng.integers(0, i)])
        edges.add((min(a, b), max(a, b)))
    attempts = 0
    while len(edges) < n_v - 1 + n_extra and attempts < 200:
        a, b = rng.integers(0, n_v, size=2)
        a, b = int(min(a, b)), int(max(a, b))
        if a != b:
            edges.add((a, b))
        attempts += 1
    edge_list = sorted(edges)
    n_e = len(edge_list)
    cls_of = 1 + rng.integers(0, n_classes, size=n_e)
    # ensure every class index occurs so the partition stays contiguous
    for s in range(1, n_classes + 1):
        if not np.any(cls_of == s):
            cls_of[(s - 1) % n_e] = s
    members = {}
    for i, c in enumerate(cls_of):
        members.setdefault(int(c), []).append(f"e{i + 1}")
    return Network.build(
        nodes=nodes,
        edges=[(nodes[a], nodes[b]) for a, b in edge_list],
        terminals=[nodes[0], nodes[n_v - 1]],
        failure_mode=FailureMode.EDGE,
        class_members=members,
        name=name or f"rand{n_v}",
    )


def random_node_network(
    rng: np.random.Generator,
    n_v: int,
    n_extra: int,
    n_classes: int = 1,
    name: str = "",
) -> Network:
    """Like :func:`random_edge_network` but the non-terminal nodes fail."""
    base = random_edge_network(rng, n_v, n_extra, name=name)
    inner = [n for n in base.nodes if n not in base.terminals]
    cls_of = 1 + rng.integers(0, n_classes, size=len(inner))
    for s in range(1, n_classes + 1):
        if not np.any(cls_of == s):
            cls_of[(s - 1) % len(inner)] = s
    members = {}
    for n, c in zip(inner, cls_of):
        members.setdefault(int(c), []).append(n)
    return Network.build(
        nodes=base.nodes,
        edges=base.edges,
        terminals=base.terminals,
        failure_mode=FailureMode.NODE,
        class_members=members,
        name=name or f"randn{n_v}",
    )


def random_dists(
    rng: np.random.Generator, n_classes: int
) -> dict[int, LifetimeDistribution]:
    out = {}
    for s in range(1, n_classes + 1):
        kind = ["exponential", "weibull", "gamma", "lognormal"][
            int(rng.integers(0, 4))
        ]
        if kind == "exponential":
            params = (float(rng.uniform(0.5, 2.0)),)
        elif kind == "lognormal":
            params = (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.3, 1.0)))
        else:
            params = (float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.8, 2.5)))
        out[s] = LifetimeDistribution(kind, params)
    return out


# -- oracles --------------------------------------------------------------

def brute_signature(net: Network) -> np.ndarray:
    """Survival signature by direct 2^M enumeration with BFS connectivity.

    Returns phi in the lattice (flat-index) order used by SignatureTable.
    """
    m = net.m
    radix = [s + 1 for s in net.class_sizes]
    surv = np.zeros(int(np.prod(radix)), dtype=np.int64)
    tot = np.zeros_like(surv)
    for bits in itertools.product((0, 1), repeat=m):
        x = np.array(bits, dtype=np.uint8)
        key = combination_of(net, x)
        idx = 0
        for k, r in zip(key, radix):
            idx = idx * r + k
        tot[idx] += 1
        if terminals_connected(net, x):
            surv[idx] += 1
    return surv / tot


def brute_widest_path(net: Network, weights: np.ndarray) -> float:
    """Max over all simple terminal-terminal paths of the path's minimum
    edge weight."""
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(net.nodes))}
    for e, (u, v) in enumerate(net.edge_endpoints):
        adj[int(u)].append((int(v), e))
        adj[int(v)].append((int(u), e))
    src, dst = net.terminal_indices[0], net.terminal_indices[-1]
    best = -np.inf

    def dfs(u, seen, bottleneck):
        nonlocal best
        if u == dst:
            best = max(best, bottleneck)
            return
        for v, e in adj[u]:
            if v not in seen:
                seen.add(v)
                dfs(v, seen, min(bottleneck, weights[e]))
                seen.remove(v)

    dfs(src, {src}, np.inf)
    return float(best)
