"""Bagged CART decision trees over binary state vectors.

Trees split on single bits with the Gini criterion, grow until pure or no
split reduces impurity, and vote by majority; the vote fractions serve as
prediction probabilities. Tree growth and prediction are compiled with
numba; trees are stored as flat arrays so a forest serializes to plain
lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit


@dataclass
class TrainingSet:
    """Unique binary input vectors with their 0/1 labels.

    Duplicates are merged on insertion; conflicting labels for the same
    vector are rejected (the underlying function is deterministic).
    """

    n_features: int
    x: np.ndarray = None   # (n, M) uint8
    y: np.ndarray = None   # (n,) uint8
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros((0, self.n_features), dtype=np.uint8)
            self.y = np.zeros(0, dtype=np.uint8)
        else:
            self.x = np.asarray(self.x, dtype=np.uint8)
            self.y = np.asarray(self.y, dtype=np.uint8)
            for i, row in enumerate(self.x):
                self._index[row.tobytes()] = i

    def __len__(self) -> int:
        return len(self.y)

    def __contains__(self, vector) -> bool:
        return np.asarray(vector, dtype=np.uint8).tobytes() in self._index

    def contains_key(self, key: bytes) -> bool:
        return key in self._index

    def add(self, vectors: np.ndarray, labels: np.ndarray) -> int:
        """Insert vectors, merging duplicates; returns how many were new."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.uint8))
        labels = np.atleast_1d(np.asarray(labels, dtype=np.uint8))
        fresh_rows = []
        fresh_labels = []
        n = len(self.y)
        for row, lab in zip(vectors, labels):
            key = row.tobytes()
            at = self._index.get(key)
            if at is None:
                self._index[key] = n + len(fresh_rows)
                fresh_rows.append(row)
                fresh_labels.append(lab)
            else:
                existing = self.y[at] if at < n else fresh_labels[at - n]
                if existing != lab:
                    raise ValueError("conflicting label for a duplicate vector")
        if fresh_rows:
            self.x = np.concatenate([self.x, np.stack(fresh_rows)])
            self.y = np.concatenate(
                [self.y, np.asarray(fresh_labels, dtype=np.uint8)]
            )
        return len(fresh_rows)


@njit(cache=True)
def _xorshift(state: np.uint64) -> np.uint64:
    state ^= state << np.uint64(13)
    state ^= state >> np.uint64(7)
    state ^= state << np.uint64(17)
    return state


@njit(cache=True)
def _grow_tree(x, y, samp, mtry, seed, feat, left, right, label):
    """Grow one CART tree in place over flat node arrays.

    ``samp`` holds bootstrap row indices. Returns the node count.
    """
    n = samp.shape[0]
    m = x.shape[1]
    perm = samp.copy()
    buf = np.empty(n, dtype=np.int64)
    cand = np.empty(m, dtype=np.int64)
    pool = np.empty(m, dtype=np.int64)

    stack_node = np.empty(2 * n + 2, dtype=np.int64)
    stack_lo = np.empty(2 * n + 2, dtype=np.int64)
    stack_hi = np.empty(2 * n + 2, dtype=np.int64)
    sp = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    sp = 1
    node_count = 1
    state = np.uint64(seed * 2 + 1)

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        ntot = hi - lo
        n1 = 0
        for i in range(lo, hi):
            n1 += y[perm[i]]
        if n1 == 0 or n1 == ntot:
            feat[node] = -1
            label[node] = 1 if n1 > 0 else 0
            continue

        # candidate features
        if mtry >= m:
            ncand = m
            for f in range(m):
                cand[f] = f
        else:
            for f in range(m):
                pool[f] = f
            for k in range(mtry):
                state = _xorshift(state)
                j = k + np.int64(state % np.uint64(m - k))
                tmp = pool[k]
                pool[k] = pool[j]
                pool[j] = tmp
            ncand = mtry
            cand[:ncand] = np.sort(pool[:ncand])

        # grow to purity: among candidate features with a non-trivial
        # split, take the lowest Gini cost even when it matches the parent
        best_cost = 1e300
        best_f = -1
        best_cnt1 = 0
        for c in range(ncand):
            f = cand[c]
            cnt1 = 0
            ones1 = 0
            for i in range(lo, hi):
                r = perm[i]
                if x[r, f] != 0:
                    cnt1 += 1
                    ones1 += y[r]
            cnt0 = ntot - cnt1
            if cnt1 == 0 or cnt0 == 0:
                continue
            ones0 = n1 - ones1
            q0 = ones0 / cnt0
            q1 = ones1 / cnt1
            cost = cnt0 * (1.0 - q0 * q0 - (1.0 - q0) * (1.0 - q0)) + \
                cnt1 * (1.0 - q1 * q1 - (1.0 - q1) * (1.0 - q1))
            if cost < best_cost:
                best_cost = cost
                best_f = f
                best_cnt1 = cnt1

        if best_f < 0:
            feat[node] = -1
            label[node] = 1 if 2 * n1 > ntot else 0
            continue

        # stable partition: bit-0 rows first
        k0 = lo
        k1 = 0
        for i in range(lo, hi):
            r = perm[i]
            if x[r, best_f] == 0:
                perm[k0] = r
                k0 += 1
            else:
                buf[k1] = r
                k1 += 1
        for i in range(k1):
            perm[k0 + i] = buf[i]
        mid = hi - best_cnt1

        feat[node] = best_f
        left[node] = node_count
        right[node] = node_count + 1
        stack_node[sp] = node_count
        stack_lo[sp] = lo
        stack_hi[sp] = mid
        sp += 1
        stack_node[sp] = node_count + 1
        stack_lo[sp] = mid
        stack_hi[sp] = hi
        sp += 1
        node_count += 2
    return node_count


@njit(cache=True)
def _count_votes(x, feat, left, right, label, offsets):
    nq = x.shape[0]
    ntree = offsets.shape[0] - 1
    votes1 = np.zeros(nq, dtype=np.int64)
    for t in range(ntree):
        base = offsets[t]
        for q in range(nq):
            node = 0
            while feat[base + node] >= 0:
                if x[q, feat[base + node]] != 0:
                    node = right[base + node]
                else:
                    node = left[base + node]
            votes1[q] += label[base + node]
    return votes1


@dataclass
class Forest:
    """Trained ensemble; nodes of all trees packed into flat arrays."""

    n_features: int
    ntree: int
    mtry: int
    seed: int
    feat: np.ndarray      # (total_nodes,) int64, -1 = leaf
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray     # leaf labels
    offsets: np.ndarray   # (ntree + 1,) node offsets per tree

    def predict_batch(
        self, x: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per row: (majority label, P(vote 0), P(vote 1)).

        Vote tie predicts 0 (network failed)."""
        x = np.atleast_2d(np.ascontiguousarray(x, dtype=np.uint8))
        if x.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {x.shape[1]}"
            )
        votes1 = _count_votes(
            x, self.feat, self.left, self.right, self.label, self.offsets
        )
        sigma = votes1 / self.ntree
        rho = 1.0 - sigma
        labels = (2 * votes1 > self.ntree).astype(np.uint8)
        return labels, rho, sigma

    def predict(self, x: np.ndarray) -> tuple[int, float, float]:
        labels, rho, sigma = self.predict_batch(np.atleast_2d(x))
        return int(labels[0]), float(rho[0]), float(sigma[0])


def train(
    data: TrainingSet,
    ntree: int = 100,
    mtry: int = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> Forest:
    """Grow ``ntree`` CART trees, each on a same-size bootstrap resample.

    ``bootstrap=False`` trains every tree on the full data (test hook:
    with mtry = M and ntree = 1 this is plain CART).
    """
    n = len(data)
    if n == 0:
        raise ValueError("empty training set")
    m = data.n_features
    if mtry is None:
        mtry = m
    if not (1 <= mtry <= m):
        raise ValueError(f"mtry must be in 1..{m}")

    rng = np.random.default_rng(seed)
    if bootstrap:
        boot = rng.integers(0, n, size=(ntree, n), dtype=np.int64)
    else:
        boot = np.broadcast_to(np.arange(n, dtype=np.int64), (ntree, n)).copy()
    tree_seeds = rng.integers(1, 2**62, size=ntree, dtype=np.int64)

    x = np.ascontiguousarray(data.x, dtype=np.uint8)
    y = np.ascontiguousarray(data.y, dtype=np.uint8)
    max_nodes = 2 * n + 1
    feats = []
    lefts = []
    rights = []
    labels = []
    offsets = np.zeros(ntree + 1, dtype=np.int64)
    for t in range(ntree):
        feat = np.empty(max_nodes, dtype=np.int64)
        left = np.zeros(max_nodes, dtype=np.int64)
        right = np.zeros(max_nodes, dtype=np.int64)
        label = np.zeros(max_nodes, dtype=np.uint8)
        count = _grow_tree(
            x, y, boot[t], mtry, tree_seeds[t], feat, left, right, label
        )
        feats.append(feat[:count])
        lefts.append(left[:count])
        rights.append(right[:count])
        labels.append(label[:count])
        offsets[t + 1] = offsets[t] + count

    return Forest(
        n_features=m,
        ntree=ntree,
        mtry=mtry,
        seed=seed,
        feat=np.concatenate(feats),
        left=np.concatenate(lefts),
        right=np.concatenate(rights),
        label=np.concatenate(labels),
        offsets=offsets,
    )
