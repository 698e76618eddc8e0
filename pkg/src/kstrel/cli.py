"""Command-line interface.

Subcommands: exact, mc-kst, al-kst, rf-kst, variant, validate. Every run
embeds (seed, config hash, version) in its output headers; identical inputs
produce byte-identical artifacts. Exit codes: 0 ok, 2 validation failure,
3 exact enumeration intractable, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, learner, signature as sig
from .kst import chain_arrays
from .lifetimes import sample_pool
from .net_model import (
    InvalidRemoval,
    VariantDisconnected,
    derive_variant,
    validate,
)
from .signature import ExactIntractable

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INTRACTABLE = 3
EXIT_IO = 4

THREADS_ENV = "KSTREL_THREADS"


class ValidationFailure(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = violations


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("network", help="network JSON file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get(THREADS_ENV, "1")),
        help="worker count (results are identical at any value)",
    )


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-points", type=int, default=sig.GRID_POINTS_DEFAULT)
    p.add_argument(
        "--t-max", type=float, default=None,
        help="grid upper end (default: where the fastest class has decayed)",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kstrel",
        description="Two-terminal network reliability via survival "
        "signatures and spanning-tree Monte Carlo",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact signature by full enumeration")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--exact-limit", type=int, default=sig.EXACT_LIMIT_DEFAULT)

    p = sub.add_parser("mc-kst", help="Monte Carlo spanning-tree estimator")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-limit", type=int, default=sig.EXACT_LIMIT_DEFAULT)

    p = sub.add_parser("al-kst", help="active-learning estimator")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--pool", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.005)
    p.add_argument("--ntree", type=int, default=100)
    p.add_argument("--n-ini", type=int, default=None)
    p.add_argument("--n-add", type=int, default=None)

    p = sub.add_parser("rf-kst", help="random-training baseline")
    _add_common(p)
    _add_grid(p)
    p.add_argument("--pool", type=int, required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ntree", type=int, default=100)

    p = sub.add_parser(
        "variant", help="classifier reuse on a component-deleted network"
    )
    _add_common(p)
    _add_grid(p)
    p.add_argument("--remove", required=True, help="comma-separated ids")
    p.add_argument("--model", required=True, help="model file from al-kst")
    p.add_argument("--pool", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="structural validation report")
    _add_common(p)
    return ap


def _load(path):
    net, dists = fileio.load_network(path)
    report = validate(net)
    if not report.ok:
        raise ValidationFailure(report.violations)
    return net, dists


def _grid(net, dists, args) -> np.ndarray:
    if args.t_max is not None:
        return np.linspace(0.0, args.t_max, args.grid_points)
    return sig.default_grid(net, dists, args.grid_points)


def _base(net, args) -> str:
    name = net.name or Path(args.network).stem
    return "".join(c if (c.isalnum() or c in "-_") else "_" for c in name)


def _meta(args, config: dict) -> dict:
    meta = {"command": args.command, "config": fileio.config_hash(config)}
    if "seed" in config:
        meta["seed"] = config["seed"]
    return meta


def _out(args, filename: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / filename


def cmd_exact(args) -> int:
    net, dists = _load(args.network)
    table = sig.exact_signature(net, limit=args.exact_limit)
    grid = _grid(net, dists, args)
    curve = sig.reliability(table, net, dists, grid)
    config = {"grid_points": args.grid_points, "t_max": args.t_max}
    meta = _meta(args, config)
    base = _base(net, args)
    fileio.write_signature_csv(_out(args, f"{base}_exact_signature.csv"), table, meta)
    fileio.write_curve_csv(_out(args, f"{base}_exact_reliability.csv"), curve, meta)
    return EXIT_OK


def cmd_mc_kst(args) -> int:
    net, dists = _load(args.network)
    pool = sample_pool(net, dists, args.samples, args.seed)
    orders, k_ranks = chain_arrays(net, pool.times)
    table = sig.accumulate(net, orders=orders, k_ranks=k_ranks)
    grid = _grid(net, dists, args)
    curve = sig.reliability(table, net, dists, grid)
    re = None
    if net.m <= args.exact_limit:
        truth = sig.reliability(sig.exact_signature(net), net, dists, grid)
        re, _ = sig.relative_error(truth, curve)
    config = {
        "samples": args.samples, "seed": args.seed,
        "grid_points": args.grid_points, "t_max": args.t_max,
    }
    meta = _meta(args, config)
    base = _base(net, args)
    fileio.write_signature_csv(_out(args, f"{base}_mc_signature.csv"), table, meta)
    fileio.write_curve_csv(
        _out(args, f"{base}_mc_reliability.csv"), curve, meta, re=re
    )
    return EXIT_OK


def _learner_config(net, args) -> learner.LearnerConfig:
    overrides = {"delta": args.delta, "ntree": args.ntree, "seed": args.seed}
    if args.n_ini is not None:
        overrides["n_ini"] = args.n_ini
    if args.n_add is not None:
        overrides["n_add"] = args.n_add
    return learner.LearnerConfig.for_network(net, args.pool, **overrides)


def cmd_al_kst(args) -> int:
    net, dists = _load(args.network)
    cfg = _learner_config(net, args)
    pool = sample_pool(net, dists, cfg.n_mcs, args.seed)
    table, model, audit = learner.run_al_kst(net, pool, cfg)
    grid = _grid(net, dists, args)
    curve = sig.reliability(table, net, dists, grid)
    config = {
        "pool": cfg.n_mcs, "seed": args.seed, "delta": cfg.delta,
        "ntree": cfg.ntree, "n_ini": cfg.n_ini, "n_add": cfg.n_add,
        "grid_points": args.grid_points, "t_max": args.t_max,
    }
    meta = _meta(args, config)
    base = _base(net, args)
    fileio.write_curve_csv(_out(args, f"{base}_al_reliability.csv"), curve, meta)
    fileio.write_signature_csv(_out(args, f"{base}_al_signature.csv"), table, meta)
    fileio.write_json(_out(args, f"{base}_al_audit.json"), {"audit": audit}, meta)
    fileio.save_model(_out(args, f"{base}_al_model.json"), model, net)
    return EXIT_OK


def cmd_rf_kst(args) -> int:
    net, dists = _load(args.network)
    args.delta, args.n_ini, args.n_add = 0.005, None, None
    cfg = _learner_config(net, args)
    pool = sample_pool(net, dists, cfg.n_mcs, args.seed)
    table, _ = learner.run_rf_kst(net, pool, cfg, args.train)
    grid = _grid(net, dists, args)
    curve = sig.reliability(table, net, dists, grid)
    config = {
        "pool": cfg.n_mcs, "train": args.train, "seed": args.seed,
        "ntree": cfg.ntree, "grid_points": args.grid_points,
        "t_max": args.t_max,
    }
    meta = _meta(args, config)
    base = _base(net, args)
    fileio.write_curve_csv(_out(args, f"{base}_rf_reliability.csv"), curve, meta)
    return EXIT_OK


def cmd_variant(args) -> int:
    net, dists = _load(args.network)
    model = fileio.load_model(args.model, expected_hash=net.ordering_hash())
    removed = [r for r in args.remove.split(",") if r]
    variant, mask = derive_variant(net, removed)
    vdists = {new: dists[old] for old, new in mask.class_map}
    pool = sample_pool(variant, vdists, args.pool, args.seed)
    grid = None
    if args.t_max is not None:
        grid = np.linspace(0.0, args.t_max, args.grid_points)
    else:
        grid = sig.default_grid(variant, vdists, args.grid_points)
    curve, table = learner.predict_variant(
        model, variant, mask, pool, vdists, grid=grid
    )
    config = {
        "remove": sorted(removed), "pool": args.pool, "seed": args.seed,
        "grid_points": args.grid_points, "t_max": args.t_max,
    }
    meta = _meta(args, config)
    base = _base(net, args)
    fileio.write_curve_csv(
        _out(args, f"{base}_variant_reliability.csv"), curve, meta
    )
    fileio.write_signature_csv(
        _out(args, f"{base}_variant_signature.csv"), table, meta
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    net, _ = fileio.load_network(args.network)
    report = validate(net)
    print(json.dumps(
        {"ok": report.ok, "violations": report.violations}, sort_keys=True
    ))
    return EXIT_OK if report.ok else EXIT_VALIDATION


_COMMANDS = {
    "exact": cmd_exact,
    "mc-kst": cmd_mc_kst,
    "al-kst": cmd_al_kst,
    "rf-kst": cmd_rf_kst,
    "variant": cmd_variant,
    "validate": cmd_validate,
}


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps(
        {"error": {"type": kind, "message": message}}, sort_keys=True
    ))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationFailure as exc:
        return _error("validation", str(exc), EXIT_VALIDATION)
    except ExactIntractable as exc:
        return _error("intractable", str(exc), EXIT_INTRACTABLE)
    except (fileio.NetworkFormatError, fileio.ModelFormatError) as exc:
        return _error("format", str(exc), EXIT_IO)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)
    except (InvalidRemoval, VariantDisconnected, ValueError) as exc:
        return _error("invalid", str(exc), EXIT_VALIDATION)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
