"""Component lifetime distributions, sample pools, node->edge transformation.

Parameter conventions (matching the supported families):
  exponential(rate)          F(t) = 1 - exp(-rate * t)
  weibull(scale, shape)      F(t) = 1 - exp(-(t / scale) ** shape)
  lognormal(location, scale) location/scale of the underlying normal
  gamma(scale, shape)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .net_model import FailureMode, Network

KINDS = ("exponential", "weibull", "lognormal", "gamma")

# The lifetime of an edge between two perfectly reliable nodes; ordered
# after every finite lifetime so it can never become the bottleneck unless
# the network cannot fail at all.
NEVER_FAILS = np.inf

# Reserved class id for never-failing transformed edges, excluded from
# signature counting.
RELIABLE_CLASS = 0


@dataclass(frozen=True)
class LifetimeDistribution:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        n_expected = 1 if self.kind == "exponential" else 2
        if len(self.params) != n_expected:
            raise ValueError(
                f"{self.kind} takes {n_expected} parameter(s), got {len(self.params)}"
            )
        if self.kind == "lognormal":
            # the location is the underlying normal mean: any real is fine
            if not (self.params[1] > 0):
                raise ValueError("lognormal scale must be strictly positive")
        elif any(not (p > 0) for p in self.params):
            raise ValueError(f"{self.kind} parameters must be strictly positive")

    def _frozen(self):
        if self.kind == "exponential":
            (rate,) = self.params
            return stats.expon(scale=1.0 / rate)
        if self.kind == "weibull":
            scale, shape = self.params
            return stats.weibull_min(c=shape, scale=scale)
        if self.kind == "lognormal":
            loc, scale = self.params
            return stats.lognorm(s=scale, scale=np.exp(loc))
        scale, shape = self.params
        return stats.gamma(a=shape, scale=scale)

    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise ValueError("lifetime CDF is undefined for t < 0")
        return self._frozen().cdf(t)

    def ppf(self, q):
        return self._frozen().ppf(q)


@dataclass(frozen=True)
class SamplePool:
    """Fixed-size matrix of lifetime draws; row j = sample j, column i =
    component i in canonical order."""

    times: np.ndarray  # (n, M) float64
    seed: int

    @property
    def size(self) -> int:
        return self.times.shape[0]


def sample_pool(
    net: Network,
    dists: dict[int, LifetimeDistribution],
    n: int,
    seed: int,
) -> SamplePool:
    """Draw ``n`` independent lifetime samples via inverse-transform sampling.

    Uniforms come from a counter-based Philox stream keyed by ``seed``, so
    the element at (sample j, component i) is a fixed function of
    (seed, j, i) regardless of how work is later distributed.
    """
    if n < 1:
        raise ValueError("pool size must be >= 1")
    for s in range(1, net.n_classes + 1):
        if s not in dists:
            raise ValueError(f"missing distribution for class {s}")
    gen = np.random.Generator(np.random.Philox(key=seed))
    u = gen.random((n, net.m))
    # ppf(0) = 0 would violate the strict-positivity invariant.
    np.clip(u, 1e-300, 1.0 - 1e-16, out=u)
    times = np.empty((n, net.m), dtype=np.float64)
    cls = net.classes_array
    for s in range(1, net.n_classes + 1):
        cols = np.nonzero(cls == s)[0]
        if cols.size:
            times[:, cols] = dists[s].ppf(u[:, cols])
    return SamplePool(times=times, seed=seed)


def node_to_edge(
    net: Network, times: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Transform node lifetimes into equivalent edge lifetimes and classes.

    Works on a single sample (length M) or a batch (n, M). Each edge gets
    the minimum of its endpoints' lifetimes and the class of the endpoint
    that fails first (ties: lower component index). Perfectly reliable
    endpoints never fail; an edge between two reliable nodes gets an
    infinite lifetime and the reserved class 0.
    """
    if net.failure_mode is not FailureMode.NODE:
        raise ValueError("node_to_edge requires a node-failure network")
    times = np.asarray(times, dtype=np.float64)
    single = times.ndim == 1
    times = np.atleast_2d(times)
    if times.shape[1] != net.m:
        raise ValueError("sample length does not match component count")

    comp = net.node_component  # (n_v,), -1 for reliable nodes
    ee = net.edge_endpoints
    cu, cv = comp[ee[:, 0]], comp[ee[:, 1]]

    n = times.shape[0]
    inf_col = np.full((n, 1), NEVER_FAILS)
    padded = np.concatenate([times, inf_col], axis=1)  # comp -1 -> inf
    tu = padded[:, cu]
    tv = padded[:, cv]

    edge_times = np.minimum(tu, tv)
    cls = net.classes_array
    cls_u = np.where(cu >= 0, cls[cu], RELIABLE_CLASS)
    cls_v = np.where(cv >= 0, cls[cv], RELIABLE_CLASS)
    # Argmin endpoint; exact ties go to the lower-indexed component.
    u_wins = (tu < tv) | ((tu == tv) & _tie_low(cu, cv))
    edge_classes = np.where(u_wins, cls_u[None, :], cls_v[None, :])
    edge_classes = np.where(np.isinf(edge_times), RELIABLE_CLASS, edge_classes)

    if single:
        return edge_times[0], edge_classes[0]
    return edge_times, edge_classes


def critical_endpoint(net: Network, times: np.ndarray, edge: int) -> int:
    """Component index of the endpoint whose failure kills ``edge``.

    Ties between equal endpoint lifetimes go to the lower component index.
    Returns -1 when both endpoints are perfectly reliable.
    """
    comp = net.node_component
    u, v = net.edge_endpoints[edge]
    cu, cv = int(comp[u]), int(comp[v])
    tu = times[cu] if cu >= 0 else NEVER_FAILS
    tv = times[cv] if cv >= 0 else NEVER_FAILS
    if tu < tv:
        return cu
    if tv < tu:
        return cv
    if cu < 0:
        return cv
    if cv < 0:
        return cu
    return min(cu, cv)


def _tie_low(cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """Tie preference toward endpoint u, by lower component index.

    Reliable endpoints (index -1) lose ties against unreliable ones.
    """
    u_key = np.where(cu >= 0, cu, np.iinfo(np.int64).max)
    v_key = np.where(cv >= 0, cv, np.iinfo(np.int64).max)
    return u_key <= v_key
