"""Active-learning estimation loop, its random-training baseline, and
classifier reuse on variant networks.

The loop labels a small number of lifetime samples with the spanning-tree
engine, trains a bagged-tree classifier on the unique state vectors, and
acquires further samples by largest weighted prediction entropy until the
classifier's uncertain fraction stays under tolerance on two consecutive
checks. The remaining pool is labeled by the classifier and everything is
tallied into one signature table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import forest as rf
from . import signature as sig
from .kst import _ChainEngine
from .lifetimes import SamplePool
from .net_model import Mask, Network


@dataclass(frozen=True)
class LearnerConfig:
    n_mcs: int
    n_ini: int
    n_add: int
    delta: float = 0.005
    ntree: int = 100
    mtry: int = None          # None -> all features
    band: tuple[float, float] = (0.4, 0.6)
    consecutive: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_ini < 1 or self.n_add < 1:
            raise ValueError("n_ini and n_add must be >= 1")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError("delta must be in (0, 1]")
        if self.n_ini > self.n_mcs:
            raise ValueError("n_ini cannot exceed the pool size")
        lo, hi = self.band
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError("uncertainty band must sit inside (0, 1)")

    @staticmethod
    def for_network(net: Network, n_mcs: int, **overrides) -> "LearnerConfig":
        """Protocol defaults: n_ini = 2 n_v, n_add = 2(n_v - 2) + 4 n_e."""
        n_v = len(net.nodes)
        n_e = len(net.edges)
        params = dict(
            n_mcs=n_mcs,
            n_ini=2 * n_v,
            n_add=2 * (n_v - 2) + 4 * n_e,
        )
        params.update(overrides)
        return LearnerConfig(**params)


def chain_vectors(orders: np.ndarray) -> np.ndarray:
    """(n, M+1, M) chain state vectors for a batch of sort permutations."""
    n, m = orders.shape
    tri = np.tril(np.ones((m + 1, m), dtype=np.uint8), k=-1)
    vals = np.broadcast_to(1 - tri, (n, m + 1, m))
    out = np.ones((n, m + 1, m), dtype=np.uint8)
    idx = np.broadcast_to(orders[:, None, :], (n, m + 1, m))
    np.put_along_axis(out, idx, vals, axis=2)
    return out


def _phi_of_rank(m: int, k_rank: int) -> np.ndarray:
    return (np.arange(1, m + 2) <= k_rank).astype(np.uint8)


def pack_chain_keys(orders: np.ndarray) -> np.ndarray:
    """(n, M+1) integer keys of the chain states (bit i set = component i
    works); lets deduplication run on scalars instead of vector rows."""
    n, m = orders.shape
    w = np.int64(1) << np.arange(m, dtype=np.int64)
    drop = np.cumsum(w[orders], axis=1)
    zero = np.zeros((n, 1), dtype=np.int64)
    full = np.int64((np.int64(1) << m) - 1)
    return full - np.concatenate([zero, drop], axis=1)


def unpack_keys(keys: np.ndarray, m: int) -> np.ndarray:
    """Inverse of :func:`pack_chain_keys` for a flat array of keys."""
    bits = (keys[:, None] >> np.arange(m, dtype=np.int64)) & 1
    return bits.astype(np.uint8)


@dataclass
class LearnerState:
    net: Network
    cfg: LearnerConfig
    train: rf.TrainingSet
    engine: _ChainEngine
    all_orders: np.ndarray          # (n_mcs, M)
    all_keys: np.ndarray            # (n_mcs, M+1) packed chain-state keys
    labeled_ids: list = field(default_factory=list)
    labeled_kranks: dict = field(default_factory=dict)
    pool_ids: np.ndarray = None     # sample indices still unlabeled
    iteration: int = 0
    consecutive_pass: int = 0
    audit: list = field(default_factory=list)
    # refreshed by _predict_pool each iteration:
    pool_rho: np.ndarray = None     # (n_pool, M+1)
    pool_labels: np.ndarray = None  # (n_pool, M+1)
    pool_in_train: np.ndarray = None

    @property
    def m(self) -> int:
        return self.net.m

    def label_sample(self, j: int) -> int:
        order = self.all_orders[j]
        k_rank = self.engine.k_rank_of(order)
        self.labeled_ids.append(int(j))
        self.labeled_kranks[int(j)] = k_rank
        vectors = chain_vectors(order[None, :])[0]
        self.train.add(vectors, _phi_of_rank(self.m, k_rank))
        return k_rank


def init(net: Network, pool: SamplePool, cfg: LearnerConfig) -> LearnerState:
    """Label the first n_ini samples and split off the prediction pool."""
    if pool.size < cfg.n_mcs:
        raise ValueError(
            f"pool of {pool.size} samples is smaller than n_mcs={cfg.n_mcs}"
        )
    times = pool.times[: cfg.n_mcs]
    m = net.m
    idx = np.broadcast_to(np.arange(m), (cfg.n_mcs, m))
    all_orders = np.lexsort((idx, times), axis=1)
    state = LearnerState(
        net=net,
        cfg=cfg,
        train=rf.TrainingSet(n_features=m),
        engine=_ChainEngine(net),
        all_orders=all_orders,
        all_keys=pack_chain_keys(all_orders),
        pool_ids=np.arange(cfg.n_ini, cfg.n_mcs),
    )
    for j in range(cfg.n_ini):
        state.label_sample(j)
    return state


def _forest_seed(cfg: LearnerConfig, iteration: int) -> int:
    ss = np.random.SeedSequence((cfg.seed, 7919, iteration))
    return int(ss.generate_state(1)[0])


def _predict_pool(state: LearnerState, model: rf.Forest) -> None:
    """Refresh per-vector predictions over the remaining pool.

    Duplicate vectors are collapsed for inference only; the stored arrays
    keep full per-sample multiplicity."""
    n_pool = len(state.pool_ids)
    m = state.m
    if n_pool == 0:
        state.pool_rho = np.zeros((0, m + 1))
        state.pool_labels = np.zeros((0, m + 1), dtype=np.uint8)
        state.pool_in_train = np.zeros((0, m + 1), dtype=bool)
        return
    keys = state.all_keys[state.pool_ids]
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    labels, rho, _ = model.predict_batch(unpack_keys(uniq, m))
    state.pool_rho = rho[inverse].reshape(n_pool, m + 1)
    state.pool_labels = labels[inverse].reshape(n_pool, m + 1)
    w = np.int64(1) << np.arange(m, dtype=np.int64)
    train_keys = state.train.x.astype(np.int64) @ w
    member = np.isin(uniq, train_keys)
    state.pool_in_train = member[inverse].reshape(n_pool, m + 1)


def uncertainty_count(state: LearnerState) -> int:
    """Number of pool predictions whose failure-vote probability sits in
    the uncertainty band (inclusive)."""
    lo, hi = state.cfg.band
    rho = state.pool_rho
    return int(np.count_nonzero((rho >= lo) & (rho <= hi)))


def stop_ratio(state: LearnerState) -> float:
    denom = len(state.pool_ids) * (state.m + 1)
    if denom == 0:
        return 0.0
    return uncertainty_count(state) / denom


def should_stop(state: LearnerState, cfg: LearnerConfig = None) -> bool:
    """Delayed judgment: the tolerance must hold on this check and the
    previous one. ``consecutive_pass`` already includes the current check."""
    cfg = cfg or state.cfg
    if len(state.pool_ids) == 0:
        return True
    return state.consecutive_pass >= cfg.consecutive


def entropy_and_weight(state: LearnerState, j: int) -> tuple[float, float]:
    """Shannon entropy over the sample's chain vectors not yet in the
    training set, and the inverse-repetition weight."""
    at = int(np.nonzero(state.pool_ids == j)[0][0])
    rho = state.pool_rho[at]
    member = state.pool_in_train[at]
    e = _entropy_rows(rho[None, :], member[None, :])[0]
    m_repeat = int(member.sum())
    return float(e), 1.0 / max(m_repeat, 1)


def _entropy_rows(rho: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Row sums of -(rho ln rho + sigma ln sigma) over non-member states,
    with 0 ln 0 taken as 0."""
    sigma = 1.0 - rho
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(
            np.where(rho > 0, rho * np.log(rho), 0.0)
            + np.where(sigma > 0, sigma * np.log(sigma), 0.0)
        )
    h = np.where(member, 0.0, h)
    return h.sum(axis=1)


def select_batch(state: LearnerState, cfg: LearnerConfig = None) -> np.ndarray:
    """Sample ids with the largest weighted entropy; ties by ascending id."""
    cfg = cfg or state.cfg
    if len(state.pool_ids) == 0:
        raise ValueError("prediction pool is empty")
    e = _entropy_rows(state.pool_rho, state.pool_in_train)
    m_repeat = state.pool_in_train.sum(axis=1)
    w = 1.0 / np.maximum(m_repeat, 1)
    scores = w * e
    order = np.lexsort((state.pool_ids, -scores))
    take = min(cfg.n_add, len(state.pool_ids))
    return state.pool_ids[order[:take]]


def enrich(state: LearnerState, ids: np.ndarray) -> None:
    """Label the selected samples with ground-truth chain values, fold their
    unique vectors into the training set, and drop them from the pool."""
    for j in ids:
        state.label_sample(int(j))
    state.pool_ids = state.pool_ids[~np.isin(state.pool_ids, ids)]


def _labeled_counts(state: LearnerState) -> tuple[np.ndarray, np.ndarray]:
    ids = np.asarray(state.labeled_ids, dtype=np.int64)
    orders = state.all_orders[ids]
    k_ranks = np.asarray(
        [state.labeled_kranks[int(j)] for j in ids], dtype=np.int64
    )
    table = sig.accumulate(state.net, orders=orders, k_ranks=k_ranks)
    return table.n_surv, table.n_fail


def _assemble(state: LearnerState) -> sig.SignatureTable:
    n_surv, n_fail = _labeled_counts(state)
    if len(state.pool_ids):
        sig.accumulate_predicted(
            state.net,
            state.all_orders[state.pool_ids],
            state.pool_labels,
            base=(n_surv, n_fail),
        )
    return sig.table_from_counts(state.net, n_surv, n_fail)


def run_al_kst(
    net: Network, pool: SamplePool, cfg: LearnerConfig
) -> tuple[sig.SignatureTable, rf.Forest, dict]:
    """Full active-learning run; returns the signature table assembled from
    labeled and classifier-predicted chains, the trained classifier, and a
    per-iteration audit record."""
    state = init(net, pool, cfg)
    model = None
    while True:
        model = rf.train(
            state.train,
            ntree=cfg.ntree,
            mtry=cfg.mtry,
            seed=_forest_seed(cfg, state.iteration),
        )
        _predict_pool(state, model)
        n_rho = uncertainty_count(state)
        ratio = stop_ratio(state)
        passed = ratio <= cfg.delta
        state.consecutive_pass = state.consecutive_pass + 1 if passed else 0
        state.audit.append(
            {
                "iteration": state.iteration,
                "train_size": len(state.train),
                "labeled_samples": len(state.labeled_ids),
                "pool_size": int(len(state.pool_ids)),
                "n_rho": n_rho,
                "ratio": ratio,
                "passed": passed,
            }
        )
        if should_stop(state, cfg):
            break
        batch = select_batch(state, cfg)
        state.audit[-1]["selected"] = [int(j) for j in batch]
        enrich(state, batch)
        state.iteration += 1

    table = _assemble(state)
    iterations = state.iteration
    audit = {
        "n_ini": cfg.n_ini,
        "n_add": cfg.n_add,
        "iterations": iterations,
        "labeled_samples": len(state.labeled_ids),
        "checks": state.audit,
    }
    return table, model, audit


def run_rf_kst(
    net: Network, pool: SamplePool, cfg: LearnerConfig, n_train: int
) -> tuple[sig.SignatureTable, rf.Forest]:
    """Baseline: train once on uniformly random labeled samples, no
    acquisition loop, predict the rest."""
    if n_train > cfg.n_mcs:
        raise ValueError("n_train exceeds the pool size")
    state = init(
        net, pool,
        LearnerConfig(
            n_mcs=cfg.n_mcs, n_ini=1, n_add=1, delta=cfg.delta,
            ntree=cfg.ntree, mtry=cfg.mtry, seed=cfg.seed,
        ),
    )
    # discard init's bookkeeping; pick the labeled set uniformly instead
    state.labeled_ids = []
    state.labeled_kranks = {}
    state.train = rf.TrainingSet(n_features=net.m)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 104729)))
    chosen = np.sort(rng.choice(cfg.n_mcs, size=n_train, replace=False))
    for j in chosen:
        state.label_sample(int(j))
    state.pool_ids = np.setdiff1d(np.arange(cfg.n_mcs), chosen)
    model = rf.train(
        state.train, ntree=cfg.ntree, mtry=cfg.mtry,
        seed=_forest_seed(cfg, 0),
    )
    _predict_pool(state, model)
    return _assemble(state), model


def predict_variant(
    model: rf.Forest,
    variant: Network,
    mask: Mask,
    new_pool: SamplePool,
    dists,
    grid: np.ndarray = None,
) -> tuple[sig.ReliabilityCurve, sig.SignatureTable]:
    """Reliability of a component-deleted network from the pre-trained
    classifier alone: no spanning-tree labeling on the new pool."""
    if model.n_features != mask.m_original:
        raise ValueError(
            "classifier dimension does not match the original network"
        )
    m_v = variant.m
    if len(mask.keep) != m_v:
        raise ValueError("mask does not match the variant network")
    times = new_pool.times
    n = times.shape[0]
    idx = np.broadcast_to(np.arange(m_v), (n, m_v))
    orders = np.lexsort((idx, times), axis=1)
    keys = pack_chain_keys(orders)
    if (1 << m_v) <= max(4 * keys.size, 1 << 16):
        # the whole variant state space is smaller than the pool's chain
        # states: precompute the classifier's truth table and gather
        all_states = unpack_keys(np.arange(1 << m_v, dtype=np.int64), m_v)
        labels, _, _ = model.predict_batch(mask.embed(all_states))
        phi = labels[keys]
    else:
        uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
        labels, _, _ = model.predict_batch(mask.embed(unpack_keys(uniq, m_v)))
        phi = labels[inverse].reshape(n, m_v + 1)
    n_surv, n_fail = sig.accumulate_predicted(variant, orders, phi)
    table = sig.table_from_counts(variant, n_surv, n_fail)
    if grid is None:
        grid = sig.default_grid(variant, dists)
    curve = sig.reliability(table, variant, dists, grid)
    return curve, table
