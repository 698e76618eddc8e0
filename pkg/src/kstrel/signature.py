"""Survival-signature tables, exact enumeration, and reliability curves.

A signature table stores, for every combination (l_1, ..., l_S) of working
component counts per class, the survival/failure tallies and the estimated
or exact probability that the network functions given those counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .net_model import FailureMode, Network


class ExactIntractable(ValueError):
    """Exact enumeration was requested above the configured size limit."""


EXACT_LIMIT_DEFAULT = 26
RE_FLOOR_DEFAULT = 1e-3
GRID_POINTS_DEFAULT = 256


def lattice_strides(class_sizes: tuple[int, ...]) -> np.ndarray:
    """Mixed-radix strides mapping a combination key to a flat index."""
    radix = np.asarray(class_sizes, dtype=np.int64) + 1
    strides = np.ones(len(radix), dtype=np.int64)
    for s in range(len(radix) - 2, -1, -1):
        strides[s] = strides[s + 1] * radix[s + 1]
    return strides


def lattice_keys(class_sizes: tuple[int, ...]) -> np.ndarray:
    """(L, S) array of all combination keys in flat-index order."""
    grids = np.indices([m + 1 for m in class_sizes])
    return grids.reshape(len(class_sizes), -1).T.astype(np.int64)


@dataclass
class SignatureTable:
    class_sizes: tuple[int, ...]
    n_surv: np.ndarray           # (L,) int64
    n_fail: np.ndarray           # (L,) int64
    phi_hat: np.ndarray          # (L,) float64, NaN where unvisited
    provenance: str              # "exact" | "estimated"
    filled: np.ndarray = field(default=None)  # envelope-filled flags

    def __post_init__(self):
        if self.filled is None:
            self.filled = np.zeros(len(self.phi_hat), dtype=bool)

    @property
    def size(self) -> int:
        return len(self.phi_hat)

    @property
    def keys(self) -> np.ndarray:
        return lattice_keys(self.class_sizes)

    def key_index(self, key) -> int:
        key = np.asarray(key, dtype=np.int64)
        return int(key @ lattice_strides(self.class_sizes))

    def phi(self, key) -> float:
        return float(self.phi_hat[self.key_index(key)])

    def unvisited(self) -> np.ndarray:
        return np.isnan(self.phi_hat)

    def fill_envelope(self) -> "SignatureTable":
        """Resolve unvisited combinations by the monotone envelope.

        Lower bound: max estimate over visited dominated keys (all counts
        <=); upper bound: min over visited dominating keys. The midpoint is
        taken and flagged. Exact tables have nothing to fill.
        """
        missing = np.nonzero(self.unvisited())[0]
        if missing.size == 0:
            return self
        keys = self.keys
        visited = ~self.unvisited()
        vkeys = keys[visited]
        vphi = self.phi_hat[visited]
        phi = self.phi_hat.copy()
        filled = self.filled.copy()
        for i in missing:
            k = keys[i]
            below = np.all(vkeys <= k, axis=1)
            above = np.all(vkeys >= k, axis=1)
            lo = float(vphi[below].max()) if below.any() else 0.0
            hi = float(vphi[above].min()) if above.any() else 1.0
            phi[i] = 0.5 * (lo + hi)
            filled[i] = True
        return SignatureTable(
            class_sizes=self.class_sizes,
            n_surv=self.n_surv,
            n_fail=self.n_fail,
            phi_hat=phi,
            provenance=self.provenance,
            filled=filled,
        )


@dataclass
class ReliabilityCurve:
    grid: np.ndarray
    values: np.ndarray


def _empty_counts(net: Network) -> tuple[np.ndarray, np.ndarray]:
    size = int(np.prod(np.asarray(net.class_sizes, dtype=np.int64) + 1))
    return (np.zeros(size, dtype=np.int64), np.zeros(size, dtype=np.int64))


def chain_key_indices(net: Network, orders: np.ndarray) -> np.ndarray:
    """Flat lattice index of each chain state, shape (n, M+1).

    Row j column i is the combination key of the state with the i
    shortest-lived components of sample j failed.
    """
    strides = lattice_strides(net.class_sizes)
    cls = net.classes_array  # 1-based
    full = int(np.asarray(net.class_sizes, dtype=np.int64) @ strides)
    per_fail = strides[cls[orders] - 1]              # (n, M)
    drop = np.cumsum(per_fail, axis=1)
    zero = np.zeros((orders.shape[0], 1), dtype=np.int64)
    return full - np.concatenate([zero, drop], axis=1)


def accumulate(
    net: Network,
    chains=None,
    orders: np.ndarray = None,
    k_ranks: np.ndarray = None,
) -> SignatureTable:
    """Tally survival/failure samples per combination from state chains.

    Accepts either a list of :class:`StateChain` or the batch arrays from
    ``kst.chain_arrays``. Every chain contributes M+1 counted states.
    """
    if chains is not None:
        orders = np.stack([c.order for c in chains])
        k_ranks = np.asarray([c.k_rank for c in chains], dtype=np.int64)
    idx = chain_key_indices(net, np.atleast_2d(orders))
    k_ranks = np.atleast_1d(k_ranks)
    surv_mask = np.arange(net.m + 1)[None, :] < k_ranks[:, None]
    n_surv, n_fail = _empty_counts(net)
    size = len(n_surv)
    n_surv += np.bincount(idx[surv_mask], minlength=size)
    n_fail += np.bincount(idx[~surv_mask], minlength=size)
    return _table_from_counts(net, n_surv, n_fail, "estimated")


def accumulate_predicted(
    net: Network,
    orders: np.ndarray,
    phi: np.ndarray,
    base: tuple[np.ndarray, np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Tally chains whose per-state labels come from a classifier.

    ``phi`` is (n, M+1) of 0/1 labels aligned with the chain states.
    Returns raw (n_surv, n_fail) counts, merged onto ``base`` if given.
    """
    idx = chain_key_indices(net, np.atleast_2d(orders))
    phi = np.atleast_2d(phi).astype(bool)
    n_surv, n_fail = base if base is not None else _empty_counts(net)
    size = len(n_surv)
    n_surv += np.bincount(idx[phi], minlength=size)
    n_fail += np.bincount(idx[~phi], minlength=size)
    return n_surv, n_fail


def _table_from_counts(net, n_surv, n_fail, provenance) -> SignatureTable:
    total = n_surv + n_fail
    phi_hat = np.full(len(total), np.nan)
    seen = total > 0
    phi_hat[seen] = n_surv[seen] / total[seen]
    return SignatureTable(
        class_sizes=net.class_sizes,
        n_surv=n_surv,
        n_fail=n_fail,
        phi_hat=phi_hat,
        provenance=provenance,
    )


def table_from_counts(net, n_surv, n_fail) -> SignatureTable:
    return _table_from_counts(net, n_surv, n_fail, "estimated")


# -- exact enumeration ----------------------------------------------------

_BLOCK_BITS = 20


def exact_signature(net: Network, limit: int = EXACT_LIMIT_DEFAULT) -> SignatureTable:
    """Exact survival signature by enumerating all 2^M component states.

    Terminal connectivity per state is decided by iterated minimum-label
    propagation over the working subgraph, vectorized over blocks of
    states; the result is independent of the block partitioning.
    """
    m = net.m
    if m > limit:
        raise ExactIntractable(
            f"M={m} exceeds the exact enumeration limit {limit}"
        )
    n_surv, n_fail = _empty_counts(net)
    strides = lattice_strides(net.class_sizes)
    cls = net.classes_array
    class_masks = [
        int(np.sum(1 << np.nonzero(cls == s + 1)[0]))
        for s in range(net.n_classes)
    ]
    total = 1 << m
    block = 1 << min(_BLOCK_BITS, m)
    for start in range(0, total, block):
        arr = np.arange(start, min(start + block, total), dtype=np.int64)
        phi = _phi_block(net, arr)
        idx = np.zeros(len(arr), dtype=np.int64)
        for s, mask in enumerate(class_masks):
            idx += np.bitwise_count(arr & mask).astype(np.int64) * strides[s]
        n_surv += np.bincount(idx[phi], minlength=len(n_surv))
        n_fail += np.bincount(idx[~phi], minlength=len(n_fail))
    return _table_from_counts(net, n_surv, n_fail, "exact")


def _phi_block(net: Network, arr: np.ndarray) -> np.ndarray:
    """Structure function for a block of state bitmasks."""
    n = len(arr)
    n_v = len(net.nodes)
    ee = net.edge_endpoints
    bits = ((arr[:, None] >> np.arange(net.m)[None, :]) & 1).astype(bool)
    if net.failure_mode is FailureMode.EDGE:
        edge_active = bits
    else:
        node_ok = np.ones((n, n_v), dtype=bool)
        comp = net.node_component
        cpos = np.nonzero(comp >= 0)[0]
        node_ok[:, cpos] = bits[:, comp[cpos]]
        edge_active = node_ok[:, ee[:, 0]] & node_ok[:, ee[:, 1]]

    labels = np.broadcast_to(
        np.arange(n_v, dtype=np.int32), (n, n_v)
    ).copy()
    changed = True
    while changed:
        changed = False
        for e in range(len(net.edges)):
            a = edge_active[:, e]
            if not a.any():
                continue
            u, v = int(ee[e, 0]), int(ee[e, 1])
            lu = labels[a, u]
            lv = labels[a, v]
            mn = np.minimum(lu, lv)
            if (lu != mn).any() or (lv != mn).any():
                labels[a, u] = mn
                labels[a, v] = mn
                changed = True
    src, *rest = net.terminal_indices
    phi = np.ones(n, dtype=bool)
    for t in rest:
        phi &= labels[:, src] == labels[:, t]
    return phi


# -- reliability assembly -------------------------------------------------

def combination_probability(net: Network, dists, key, t: float) -> float:
    """Probability that exactly l_s class-s components work at time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    p = 1.0
    for s, (l, m_s) in enumerate(zip(key, net.class_sizes), start=1):
        f = float(dists[s].cdf(t))
        p *= float(stats.binom.pmf(l, m_s, 1.0 - f))
    return p


def combination_weights(net: Network, dists, grid: np.ndarray) -> np.ndarray:
    """(L, G) matrix of combination probabilities over a time grid."""
    grid = np.asarray(grid, dtype=np.float64)
    w = None
    for s, m_s in enumerate(net.class_sizes, start=1):
        surv = 1.0 - dists[s].cdf(grid)
        pmf = stats.binom.pmf(
            np.arange(m_s + 1)[:, None], m_s, surv[None, :]
        )
        w = pmf if w is None else (w[:, None, :] * pmf[None, :, :]).reshape(
            -1, len(grid)
        )
    return w


def default_grid(
    net: Network, dists, points: int = GRID_POINTS_DEFAULT
) -> np.ndarray:
    """Uniform grid over [0, t_max], t_max where the fastest-failing class
    has essentially fully decayed."""
    t_max = min(
        float(dists[s].ppf(0.999)) for s in range(1, net.n_classes + 1)
    )
    return np.linspace(0.0, t_max, points)


def reliability(
    table: SignatureTable, net: Network, dists, grid: np.ndarray
) -> ReliabilityCurve:
    """Total-probability assembly of R(t) from a signature table."""
    table = table.fill_envelope()
    w = combination_weights(net, dists, grid)
    values = table.phi_hat @ w
    return ReliabilityCurve(grid=np.asarray(grid, dtype=np.float64), values=values)


def relative_error(
    truth: ReliabilityCurve,
    approx: ReliabilityCurve,
    floor: float = RE_FLOOR_DEFAULT,
) -> tuple[np.ndarray, float]:
    """Pointwise |R_true - R_pred| / R_true and its max over grid points
    where R_true >= floor. Excluded points carry NaN."""
    if truth.grid.shape != approx.grid.shape or not np.allclose(
        truth.grid, approx.grid
    ):
        raise ValueError("curves are on different grids")
    re = np.full(len(truth.grid), np.nan)
    ok = truth.values >= floor
    re[ok] = np.abs(truth.values[ok] - approx.values[ok]) / truth.values[ok]
    re_max = float(np.nanmax(re)) if ok.any() else 0.0
    return re, re_max
