"""Graph model: networks with unreliable components, state vectors, variants.

A network carries an undirected simple graph, a pair (or more) of terminal
nodes, a failure mode (nodes fail or edges fail) and a partition of the
unreliable components into lifetime classes. Components have a canonical
ordering (edge input order, or non-terminal node input order) so that state
vectors have stable bit positions across runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np


class FailureMode(enum.Enum):
    NODE = "node"
    EDGE = "edge"


class VariantDisconnected(ValueError):
    """Removing the requested components disconnects the terminals."""


class InvalidRemoval(ValueError):
    """Requested removal targets a terminal or an unknown component."""


@dataclass(frozen=True)
class Network:
    """Immutable network description.

    ``classes[i]`` is the 1-based class index of the i-th unreliable
    component in canonical order. Use :meth:`build` to construct from a
    per-class member listing.
    """

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    terminals: tuple[str, ...]
    failure_mode: FailureMode
    classes: tuple[int, ...]
    reliable_nodes: frozenset = field(default_factory=frozenset)
    name: str = ""

    @staticmethod
    def build(
        nodes: Sequence[str],
        edges: Sequence[tuple[str, str]],
        terminals: Sequence[str],
        failure_mode: FailureMode,
        class_members: Mapping[int, Iterable[str]],
        reliable_nodes: Iterable[str] = (),
        name: str = "",
    ) -> "Network":
        """Construct a network from per-class component member lists.

        Edge components are named ``e1..e{n_e}`` in input order. Node
        components use the node ids. Under node failure, nodes not listed
        in any class are treated as perfectly reliable.
        """
        nodes = tuple(str(n) for n in nodes)
        edges = tuple((str(u), str(v)) for u, v in edges)
        terminals = tuple(str(t) for t in terminals)
        known = set(nodes)
        for u, v in edges:
            if u not in known or v not in known:
                raise ValueError(f"edge ({u}, {v}) references unknown node")

        member_class: dict[str, int] = {}
        for cls, members in class_members.items():
            for m in members:
                m = str(m)
                if m in member_class:
                    raise ValueError(f"component {m} assigned to multiple classes")
                member_class[m] = int(cls)

        reliable = set(str(n) for n in reliable_nodes)
        if failure_mode is FailureMode.EDGE:
            comp_ids = [f"e{i + 1}" for i in range(len(edges))]
        else:
            # Unassigned non-terminal nodes count as perfectly reliable.
            reliable |= {
                n for n in nodes
                if n not in terminals and n not in member_class
            }
            comp_ids = [
                n for n in nodes if n not in terminals and n not in reliable
            ]
        classes = tuple(member_class.get(c, 0) for c in comp_ids)
        # Stray assignments (e.g. a terminal listed in a class) are kept in
        # member_class and surface through validate(), not here.
        net = Network(
            nodes=nodes,
            edges=edges,
            terminals=terminals,
            failure_mode=failure_mode,
            classes=classes,
            reliable_nodes=frozenset(reliable),
            name=name,
        )
        object.__setattr__(net, "_raw_member_class", dict(member_class))
        return net

    # -- canonical component ordering ------------------------------------

    @cached_property
    def component_ids(self) -> tuple[str, ...]:
        if self.failure_mode is FailureMode.EDGE:
            return tuple(f"e{i + 1}" for i in range(len(self.edges)))
        return tuple(
            n for n in self.nodes
            if n not in self.terminals and n not in self.reliable_nodes
        )

    @property
    def m(self) -> int:
        """Number of unreliable components."""
        return len(self.component_ids)

    @cached_property
    def n_classes(self) -> int:
        return max(self.classes, default=0)

    @cached_property
    def class_sizes(self) -> tuple[int, ...]:
        sizes = [0] * self.n_classes
        for c in self.classes:
            if c >= 1:
                sizes[c - 1] += 1
        return tuple(sizes)

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def edge_endpoints(self) -> np.ndarray:
        """(n_e, 2) array of node indices per edge."""
        return np.array(
            [[self.node_index[u], self.node_index[v]] for u, v in self.edges],
            dtype=np.int64,
        ).reshape(-1, 2)

    @cached_property
    def terminal_indices(self) -> tuple[int, ...]:
        return tuple(self.node_index[t] for t in self.terminals)

    @cached_property
    def component_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.component_ids)}

    @cached_property
    def node_component(self) -> np.ndarray:
        """Per node: component index, or -1 for reliable nodes/terminals.

        Only meaningful under node failure.
        """
        comp = np.full(len(self.nodes), -1, dtype=np.int64)
        for cid, i in self.component_index.items():
            comp[self.node_index[cid]] = i
        return comp

    @cached_property
    def classes_array(self) -> np.ndarray:
        return np.asarray(self.classes, dtype=np.int64)

    def ordering_hash(self) -> str:
        """Stable digest of component ordering, used to guard model reuse."""
        import hashlib

        text = "|".join(
            [self.failure_mode.value, *self.component_ids]
            + [f"{c}" for c in self.classes]
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Mask:
    """Embedding of variant state vectors into the original component space.

    ``keep`` maps variant component position -> original position; removed
    original positions are fixed to 0 on embedding.
    """

    m_original: int
    keep: tuple[int, ...]
    # original class index -> variant class index, for classes that survive
    class_map: tuple[tuple[int, int], ...] = ()

    def embed(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.uint8))
        if vectors.shape[1] != len(self.keep):
            raise ValueError(
                f"expected {len(self.keep)} variant components, got {vectors.shape[1]}"
            )
        out = np.zeros((vectors.shape[0], self.m_original), dtype=np.uint8)
        out[:, list(self.keep)] = vectors
        return out


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _adjacency(net: Network) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in net.nodes]
    for u, v in net.edge_endpoints:
        adj[u].append(int(v))
        adj[v].append(int(u))
    return adj


def _connected_all_working(net: Network) -> bool:
    if not net.nodes:
        return False
    adj = _adjacency(net)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(net.nodes)


def validate(net: Network) -> ValidationReport:
    """Check the structural invariants; violations are reported, not raised."""
    v: list[str] = []
    if len(set(net.nodes)) != len(net.nodes):
        v.append("duplicate node ids")
    if len(net.terminals) < 2:
        v.append("fewer than two terminals")
    if len(set(net.terminals)) != len(net.terminals):
        v.append("terminals are not distinct")
    for t in net.terminals:
        if t not in net.node_index:
            v.append(f"terminal {t} is not a node")

    seen_edges = set()
    for u, w in net.edges:
        if u == w:
            v.append(f"self-loop at {u}")
        key = frozenset((u, w))
        if key in seen_edges:
            v.append(f"duplicate edge ({u}, {w})")
        seen_edges.add(key)

    if net.m == 0:
        v.append("no unreliable components")
    cls = set(c for c in net.classes if c >= 1)
    if any(c < 1 for c in net.classes):
        v.append("component without a class assignment")
    if cls and cls != set(range(1, max(cls) + 1)):
        v.append("class indices are not contiguous 1..S")

    raw = getattr(net, "_raw_member_class", None)
    if raw is not None:
        for comp in raw:
            if comp in net.terminals:
                v.append(f"terminal {comp} must be reliable")
            elif comp not in net.component_index:
                v.append(f"class member {comp} is not an unreliable component")

    if not v and not _connected_all_working(net):
        v.append("not connected when all components work")
    return ValidationReport(v)


def combination_of(net: Network, x: np.ndarray) -> tuple[int, ...]:
    """Count working components per class for one state vector."""
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (net.m,):
        raise ValueError(f"state vector length {x.shape} does not match M={net.m}")
    counts = np.zeros(net.n_classes, dtype=np.int64)
    np.add.at(counts, net.classes_array - 1, x)
    return tuple(int(c) for c in counts)


def terminals_connected(net: Network, x: np.ndarray) -> bool:
    """Direct connectivity check of the working subgraph for one state.

    Independent of the spanning-tree machinery; used as an oracle.
    """
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (net.m,):
        raise ValueError("state vector length mismatch")
    if net.failure_mode is FailureMode.EDGE:
        node_ok = np.ones(len(net.nodes), dtype=bool)
        edge_ok = x.astype(bool)
    else:
        node_ok = np.ones(len(net.nodes), dtype=bool)
        comp = net.node_component
        has_comp = comp >= 0
        node_ok[has_comp] = x[comp[has_comp]].astype(bool)
        ee = net.edge_endpoints
        edge_ok = node_ok[ee[:, 0]] & node_ok[ee[:, 1]]

    adj: list[list[int]] = [[] for _ in net.nodes]
    for ok, (u, w) in zip(edge_ok, net.edge_endpoints):
        if ok:
            adj[u].append(int(w))
            adj[w].append(int(u))
    src, *rest = net.terminal_indices
    seen = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return all(t in seen for t in rest)


def derive_variant(net: Network, removed: Iterable[str]) -> tuple[Network, Mask]:
    """Delete components and re-tally classes; returns the variant and the
    mask that embeds variant state vectors back into the original space."""
    removed = {str(r) for r in removed}
    for r in removed:
        if r in net.terminals:
            raise InvalidRemoval(f"cannot remove terminal {r}")
        if r not in net.component_index:
            raise InvalidRemoval(f"unknown component {r}")

    if net.failure_mode is FailureMode.EDGE:
        keep_edges = [
            (i, e) for i, e in enumerate(net.edges)
            if f"e{i + 1}" not in removed
        ]
        new_edges = tuple(e for _, e in keep_edges)
        keep = tuple(i for i, _ in keep_edges)
        new_members: dict[int, list[str]] = {}
        for new_i, (old_i, _) in enumerate(keep_edges):
            new_members.setdefault(net.classes[old_i], []).append(f"e{new_i + 1}")
        variant = Network.build(
            net.nodes, new_edges, net.terminals, net.failure_mode,
            new_members, net.reliable_nodes, name=f"{net.name}-variant",
        )
    else:
        new_nodes = tuple(n for n in net.nodes if n not in removed)
        new_edges = tuple(
            (u, v) for u, v in net.edges if u not in removed and v not in removed
        )
        new_members = {}
        for cid, old_i in net.component_index.items():
            if cid not in removed:
                new_members.setdefault(net.classes[old_i], []).append(cid)
        variant = Network.build(
            new_nodes, new_edges, net.terminals, net.failure_mode,
            new_members, net.reliable_nodes - removed,
            name=f"{net.name}-variant",
        )
        keep = tuple(
            net.component_index[c] for c in variant.component_ids
        )

    # Re-tallied class indices must stay contiguous; compress if a class
    # lost all members.
    present = sorted({c for c in variant.classes if c >= 1})
    remap = {c: i + 1 for i, c in enumerate(present)}
    if present != list(range(1, len(present) + 1)):
        members = {}
        for cid, old_i in variant.component_index.items():
            members.setdefault(remap[variant.classes[old_i]], []).append(cid)
        variant = Network.build(
            variant.nodes, variant.edges, variant.terminals,
            variant.failure_mode, members, variant.reliable_nodes,
            name=variant.name,
        )

    if not _connected_all_working(variant):
        raise VariantDisconnected(
            "removal disconnects the all-working graph"
        )
    mask = Mask(
        m_original=net.m,
        keep=keep,
        class_map=tuple(sorted(remap.items())),
    )
    return variant, mask
