"""End-to-end acceptance suite.

Each test prints a `[criterion N] ... PASS` line with the measured
quantities so a log review can confirm the margins, and asserts the stated
thresholds. Random fixtures are frozen by explicit generator seeds.
"""

import itertools
import json
import time

import numpy as np
import pytest

from conftest import (
    brute_signature,
    brute_widest_path,
    random_dists,
    random_edge_network,
    random_node_network,
)
from kstrel import cli, learner
from kstrel.forest import TrainingSet, train
from kstrel.kst import build_chain, chain_arrays, k_lifetime
from kstrel.learner import LearnerConfig
from kstrel.lifetimes import LifetimeDistribution, sample_pool
from kstrel.net_model import (
    FailureMode,
    Network,
    derive_variant,
    terminals_connected,
)
from kstrel.signature import (
    accumulate,
    combination_probability,
    default_grid,
    exact_signature,
    lattice_keys,
    relative_error,
    reliability,
)

RE_FLOOR_NOTE = "RE evaluated where exact R(t) >= 1e-3"


# -- shared random suite (criteria 5, 7, 8) -------------------------------

SUITE_SEED = 5
SUITE_SIZE = 20


def _build_suite():
    rng = np.random.default_rng(SUITE_SEED)
    suite = []
    for i in range(SUITE_SIZE):
        n_v = int(rng.integers(5, 8))
        n_extra = int(rng.integers(2, 4))
        n_cls = int(rng.integers(1, 4))
        net = random_edge_network(
            rng, n_v, n_extra, n_classes=n_cls, name=f"suite{i}"
        )
        dists = random_dists(rng, n_cls)
        suite.append((net, dists))
    return suite


@pytest.fixture(scope="module")
def suite():
    out = []
    for i, (net, dists) in enumerate(_build_suite()):
        assert net.m <= 20
        grid = default_grid(net, dists)
        truth = reliability(exact_signature(net), net, dists, grid)
        out.append((net, dists, grid, truth))
    return out


@pytest.fixture(scope="module")
def al_results(suite):
    """AL-KST runs over the shared suite (reused by criteria 7 and 8)."""
    results = []
    for i, (net, dists, grid, truth) in enumerate(suite):
        pool = sample_pool(net, dists, 10000, seed=200 + i)
        cfg = LearnerConfig.for_network(net, 10000, seed=300 + i)
        table, model, audit = learner.run_al_kst(net, pool, cfg)
        _, re_max = relative_error(
            truth, reliability(table, net, dists, grid)
        )
        results.append((pool, cfg, audit, re_max))
    return results


# -- criterion 1 ----------------------------------------------------------

def test_criterion_01_exact_oracle(bridge):
    t0 = time.perf_counter()
    table = exact_signature(bridge)
    elapsed = time.perf_counter() - t0
    expected = np.array([0.0, 0.0, 0.2, 0.8, 1.0, 1.0])
    assert np.allclose(table.phi_hat, expected, atol=1e-15)
    assert np.allclose(brute_signature(bridge), expected, atol=1e-15)
    assert elapsed < 1.0
    print(f"[criterion 1] bridge exact signature = {table.phi_hat.tolist()}"
          f" in {elapsed:.3f}s PASS")


# -- criterion 2 ----------------------------------------------------------

def test_criterion_02_analytic_reliability():
    # two-edge series path: R(t) = e^{-2t}
    series = Network.build(
        nodes=["s", "a", "t"],
        edges=[("s", "a"), ("a", "t")],
        terminals=["s", "t"],
        failure_mode=FailureMode.EDGE,
        class_members={1: ["e1", "e2"]},
        name="series2",
    )
    dists = {1: LifetimeDistribution("exponential", (1.0,))}
    grid = np.linspace(0.0, 3.0, 256)
    curve = reliability(exact_signature(series), series, dists, grid)
    err_series = float(np.max(np.abs(curve.values - np.exp(-2.0 * grid))))
    assert err_series <= 1e-10

    # parallel diamond: two independent 2-edge paths, R = 1 - (1 - p^2)^2
    diamond = Network.build(
        nodes=["s", "a", "b", "t"],
        edges=[("s", "a"), ("a", "t"), ("s", "b"), ("b", "t")],
        terminals=["s", "t"],
        failure_mode=FailureMode.EDGE,
        class_members={1: ["e1", "e2", "e3", "e4"]},
        name="diamond",
    )
    curve_d = reliability(exact_signature(diamond), diamond, dists, grid)
    p = np.exp(-grid)
    expect = 1.0 - (1.0 - p**2) ** 2
    err_diamond = float(np.max(np.abs(curve_d.values - expect)))
    assert err_diamond <= 1e-10
    print(f"[criterion 2] series max|err| = {err_series:.2e}, "
          f"diamond max|err| = {err_diamond:.2e} (tol 1e-10) PASS")


# -- criterion 3 ----------------------------------------------------------

def test_criterion_03_bottleneck_identity():
    rng = np.random.default_rng(33)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(10000):
        n_v = int(rng.integers(6, 13))
        net = random_edge_network(rng, n_v, int(rng.integers(0, 5)))
        weights = rng.uniform(0.0, 1.0, size=len(net.edges))
        t_k, _ = k_lifetime(net, weights)
        if t_k != brute_widest_path(net, weights):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    assert mismatches == 0
    assert elapsed < 60.0
    print(f"[criterion 3] 10000 graphs, {mismatches} mismatches, "
          f"{elapsed:.1f}s (< 60s) PASS")


# -- criterion 4 ----------------------------------------------------------

def test_criterion_04_chain_equivalence():
    rng = np.random.default_rng(44)
    mismatches = 0
    checked = 0
    for g in range(200):
        if g % 2 == 0:
            net = random_edge_network(
                rng, int(rng.integers(4, 9)), int(rng.integers(0, 4)),
                n_classes=int(rng.integers(1, 3)),
            )
        else:
            net = random_node_network(
                rng, int(rng.integers(5, 10)), int(rng.integers(1, 4)),
                n_classes=int(rng.integers(1, 3)),
            )
        assert net.m <= 12
        times = rng.uniform(0.05, 10.0, size=(100, net.m))
        for row in times:
            chain = build_chain(net, row)
            for vec, phi in zip(chain.vectors, chain.phi):
                mismatches += int(
                    bool(phi) != terminals_connected(net, vec)
                )
                checked += 1
    assert mismatches == 0
    print(f"[criterion 4] {checked} chain states vs direct connectivity, "
          f"{mismatches} mismatches PASS")


# -- criterion 5 ----------------------------------------------------------

def test_criterion_05_mc_kst_accuracy(suite):
    passed = 0
    worst = 0.0
    for i, (net, dists, grid, truth) in enumerate(suite):
        t0 = time.perf_counter()
        pool = sample_pool(net, dists, 50000, seed=100 + i)
        orders, k_ranks = chain_arrays(net, pool.times)
        table = accumulate(net, orders=orders, k_ranks=k_ranks)
        _, re_max = relative_error(
            truth, reliability(table, net, dists, grid)
        )
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0
        worst = max(worst, re_max)
        passed += re_max <= 0.025
    assert passed >= 18
    print(f"[criterion 5] MC-KST 50000 samples: {passed}/20 networks with "
          f"RE_max <= 2.5% (worst {worst:.2%}); {RE_FLOOR_NOTE} PASS")


# -- criterion 6 ----------------------------------------------------------

def test_criterion_06_node_failure_path():
    rng = np.random.default_rng(1)
    passed = 0
    worst = 0.0
    for i in range(10):
        net = random_node_network(
            rng, int(rng.integers(6, 10)), int(rng.integers(2, 5)),
            n_classes=int(rng.integers(1, 3)), name=f"node{i}",
        )
        assert net.m <= 12
        dists = random_dists(rng, net.n_classes)
        pool = sample_pool(net, dists, 50000, seed=400 + i)
        orders, k_ranks = chain_arrays(net, pool.times)
        table = accumulate(net, orders=orders, k_ranks=k_ranks)
        grid = default_grid(net, dists)
        truth = reliability(exact_signature(net), net, dists, grid)
        _, re_max = relative_error(
            truth, reliability(table, net, dists, grid)
        )
        worst = max(worst, re_max)
        passed += re_max <= 0.025
    assert passed == 10
    print(f"[criterion 6] node-failure MC vs exact node enumeration: "
          f"{passed}/10 with RE_max <= 2.5% (worst {worst:.2%}) PASS")


# -- criterion 7 ----------------------------------------------------------

def test_criterion_07_al_kst(suite, al_results):
    passed = 0
    worst = 0.0
    worst_frac = 0.0
    for (net, dists, grid, truth), (pool, cfg, audit, re_max) in zip(
        suite, al_results
    ):
        labeled = audit["labeled_samples"]
        assert labeled == min(
            10000, cfg.n_ini + audit["iterations"] * cfg.n_add
        )
        frac = labeled / 10000
        worst = max(worst, re_max)
        worst_frac = max(worst_frac, frac)
        passed += (frac <= 0.20 and re_max <= 0.05)
    assert passed >= 18
    print(f"[criterion 7] AL-KST pool 10000, delta 0.005: {passed}/20 with "
          f"labeled <= 20% and RE_max <= 5% (worst RE {worst:.2%}, worst "
          f"labeled fraction {worst_frac:.1%}) PASS")


# -- criterion 8 ----------------------------------------------------------

def test_criterion_08_al_beats_random(suite, al_results):
    re_al = []
    re_rf = []
    for (net, dists, grid, truth), (pool, cfg, audit, re_max) in zip(
        suite, al_results
    ):
        re_al.append(re_max)
        table_rf, _ = learner.run_rf_kst(
            net, pool, cfg, n_train=audit["labeled_samples"]
        )
        _, rr = relative_error(
            truth, reliability(table_rf, net, dists, grid)
        )
        re_rf.append(rr)
    med_al = float(np.median(re_al))
    med_rf = float(np.median(re_rf))
    assert med_al <= med_rf
    print(f"[criterion 8] matched budgets: median RE_max AL-KST "
          f"{med_al:.3%} <= RF-KST {med_rf:.3%} PASS")


# -- criterion 9 ----------------------------------------------------------

def _grid12():
    nodes = ["s", "n1", "n2", "n3", "n4", "n5", "n6", "t"]
    edges = [
        ("s", "n1"), ("s", "n2"), ("n1", "n2"), ("n1", "n3"), ("n2", "n4"),
        ("n3", "n4"), ("n3", "n5"), ("n4", "n6"), ("n5", "n6"), ("n5", "t"),
        ("n6", "t"), ("n1", "n4"),
    ]
    net = Network.build(
        nodes, edges, ["s", "t"], FailureMode.EDGE,
        {
            1: [f"e{i}" for i in (1, 2, 3, 4, 5, 6)],
            2: [f"e{i}" for i in (7, 8, 9, 10, 11, 12)],
        },
        name="grid12",
    )
    dists = {
        1: LifetimeDistribution("exponential", (1.0,)),
        2: LifetimeDistribution("weibull", (1.2, 1.8)),
    }
    return net, dists


def test_criterion_09_variant_reuse():
    net, dists = _grid12()
    assert net.m == 12
    pool = sample_pool(net, dists, 10000, seed=41)
    cfg = LearnerConfig.for_network(net, 10000, seed=42)
    _, model, _ = learner.run_al_kst(net, pool, cfg)

    variant, mask = derive_variant(net, ["e3", "e12"])
    vdists = {new: dists[old] for old, new in mask.class_map}
    vpool = sample_pool(variant, vdists, 10000, seed=77)
    vgrid = default_grid(variant, vdists)

    # warm both code paths, then time best-of-3 to suppress scheduler noise
    learner.predict_variant(model, variant, mask, vpool, vdists, grid=vgrid)
    chain_arrays(variant, vpool.times[:64])

    t_pred = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        curve, _ = learner.predict_variant(
            model, variant, mask, vpool, vdists, grid=vgrid
        )
        t_pred = min(t_pred, time.perf_counter() - t0)

    t_mc = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        orders, k_ranks = chain_arrays(variant, vpool.times)
        mc = accumulate(variant, orders=orders, k_ranks=k_ranks)
        reliability(mc, variant, vdists, vgrid)
        t_mc = min(t_mc, time.perf_counter() - t0)

    truth = reliability(exact_signature(variant), variant, vdists, vgrid)
    _, re_max = relative_error(truth, curve)
    assert re_max <= 0.06
    assert t_pred < 0.10 * t_mc
    print(f"[criterion 9] variant (2 of 12 components removed, zero new "
          f"labels): RE_max {re_max:.2%} <= 6%; predict {t_pred * 1e3:.1f}ms "
          f"vs MC {t_mc * 1e3:.1f}ms (ratio {t_pred / t_mc:.1%} < 10%) PASS")


# -- criterion 10 ---------------------------------------------------------

def test_criterion_10_degenerate_equivalence(bridge, bridge_dists):
    pool = sample_pool(bridge, bridge_dists, 1000, seed=10)
    cfg = LearnerConfig(n_mcs=1000, n_ini=1000, n_add=1, seed=10)
    table, _, audit = learner.run_al_kst(bridge, pool, cfg)
    orders, k_ranks = chain_arrays(bridge, pool.times)
    mc = accumulate(bridge, orders=orders, k_ranks=k_ranks)
    assert np.array_equal(table.n_surv, mc.n_surv)
    assert np.array_equal(table.n_fail, mc.n_fail)
    assert audit["labeled_samples"] == 1000
    print("[criterion 10] fully-labeled AL-KST table bit-identical to "
          "MC-KST PASS")


# -- criterion 11 ---------------------------------------------------------

def test_criterion_11_cli_determinism(tmp_path):
    doc = {
        "name": "bridge",
        "failure_mode": "edge",
        "nodes": ["s", "a", "b", "t"],
        "edges": [["s", "a"], ["s", "b"], ["a", "b"], ["a", "t"], ["b", "t"]],
        "terminals": ["s", "t"],
        "reliable_nodes": [],
        "classes": {
            "1": {
                "members": ["e1", "e2", "e3", "e4", "e5"],
                "distribution": {"kind": "exponential", "params": [1.0]},
            }
        },
    }
    net_file = tmp_path / "bridge.json"
    net_file.write_text(json.dumps(doc))
    runs = [
        ["exact", str(net_file)],
        ["mc-kst", str(net_file), "--samples", "5000", "--seed", "7"],
        ["al-kst", str(net_file), "--pool", "400", "--seed", "3"],
        ["rf-kst", str(net_file), "--pool", "400", "--train", "150",
         "--seed", "2"],
    ]
    compared = 0
    for argv in runs:
        out1 = tmp_path / f"a_{argv[0]}"
        out2 = tmp_path / f"b_{argv[0]}"
        assert cli.main(argv + ["--out", str(out1), "--threads", "1"]) == 0
        assert cli.main(argv + ["--out", str(out2), "--threads", "8"]) == 0
        files1 = sorted(p.name for p in out1.iterdir())
        assert files1 == sorted(p.name for p in out2.iterdir())
        for name in files1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
            compared += 1
    # variant reuses the al-kst model file
    model = tmp_path / "a_al-kst" / "bridge_al_model.json"
    vargs = ["variant", str(net_file), "--remove", "e3", "--model",
             str(model), "--pool", "500", "--seed", "9"]
    outs = []
    for tag, threads in (("a", "1"), ("b", "4")):
        out = tmp_path / f"{tag}_variant"
        assert cli.main(vargs + ["--out", str(out), "--threads", threads]) == 0
        outs.append(out)
    for name in sorted(p.name for p in outs[0].iterdir()):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        compared += 1
    print(f"[criterion 11] {compared} artifacts byte-identical across "
          f"re-runs and --threads values PASS")


# -- criterion 12 ---------------------------------------------------------

def test_criterion_12_property_suites(bridge_two_class):
    rng = np.random.default_rng(1212)

    # exact-signature monotonicity along every +1 lattice step
    for _ in range(5):
        net = random_edge_network(
            rng, int(rng.integers(4, 8)), int(rng.integers(0, 3)),
            n_classes=int(rng.integers(1, 3)),
        )
        table = exact_signature(net)
        keys = table.keys
        for s in range(len(net.class_sizes)):
            step = np.zeros(len(net.class_sizes), dtype=np.int64)
            step[s] = 1
            for i, k in enumerate(keys):
                up = k + step
                if np.all(up <= np.asarray(net.class_sizes)):
                    assert table.phi_hat[table.key_index(up)] >= table.phi_hat[i]

    # rho + sigma == 1 exactly
    x = np.array(
        list(itertools.product((0, 1), repeat=6)), dtype=np.uint8
    )
    y = (x.sum(axis=1) >= 2).astype(np.uint8)
    model = train(TrainingSet(n_features=6, x=x, y=y), ntree=93, seed=3)
    _, rho, sigma = model.predict_batch(x)
    assert np.all(rho + sigma == 1.0)

    # combination-probability normalization
    dists = {
        1: LifetimeDistribution("gamma", (1.0, 2.0)),
        2: LifetimeDistribution("lognormal", (0.0, 0.8)),
    }
    for t in (0.0, 0.4, 2.1):
        total = sum(
            combination_probability(bridge_two_class, dists, tuple(k), t)
            for k in lattice_keys(bridge_two_class.class_sizes)
        )
        assert total == pytest.approx(1.0, abs=1e-12)

    # stop-criterion consecutiveness + budget accounting on a live run
    pool = sample_pool(bridge_two_class, dists, 600, seed=12)
    cfg = LearnerConfig.for_network(bridge_two_class, 600, seed=12)
    table, _, audit = learner.run_al_kst(bridge_two_class, pool, cfg)
    checks = audit["checks"]
    last = checks[-1]
    assert last["pool_size"] == 0 or (
        last["passed"] and checks[-2]["passed"]
        and last["ratio"] <= cfg.delta and checks[-2]["ratio"] <= cfg.delta
    )
    assert audit["labeled_samples"] == min(
        600, cfg.n_ini + audit["iterations"] * cfg.n_add
    )
    assert (table.n_surv + table.n_fail).sum() == 600 * (
        bridge_two_class.m + 1
    )
    print("[criterion 12] monotonicity, rho+sigma identity, normalization, "
          "stop consecutiveness, budget accounting PASS")
