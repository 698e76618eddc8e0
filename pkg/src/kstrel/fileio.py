"""Network file format, result serialization, and model files.

Networks are described by a single JSON document carrying the graph, the
terminals, the failure mode, and per-class member lists with their lifetime
distributions. Results serialize to CSV (with ``#`` header lines embedding
seed, config hash, and artifact version) or JSON; trained classifiers go to
versioned JSON model files guarded by the component-ordering hash.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .forest import Forest
from .lifetimes import LifetimeDistribution
from .net_model import FailureMode, Network
from .signature import ReliabilityCurve, SignatureTable

ARTIFACT_VERSION = "0.1.0"
MODEL_FORMAT_VERSION = 1


class NetworkFormatError(ValueError):
    """The network file is malformed or carries unknown fields."""


class ModelFormatError(ValueError):
    """The model file is malformed, or does not match the network."""


_TOP_FIELDS = {
    "name", "failure_mode", "nodes", "edges", "terminals",
    "reliable_nodes", "classes",
}
_CLASS_FIELDS = {"members", "distribution"}
_DIST_FIELDS = {"kind", "params"}


def parse_network(doc: dict) -> tuple[Network, dict[int, LifetimeDistribution]]:
    """Build a network and its per-class distributions from a parsed JSON
    document, rejecting unknown fields."""
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise NetworkFormatError(f"unknown fields: {sorted(unknown)}")
    for required in ("failure_mode", "nodes", "edges", "terminals", "classes"):
        if required not in doc:
            raise NetworkFormatError(f"missing required field {required!r}")
    try:
        mode = FailureMode(doc["failure_mode"])
    except ValueError:
        raise NetworkFormatError(
            f"failure_mode must be 'node' or 'edge', got {doc['failure_mode']!r}"
        )
    edges = []
    for e in doc["edges"]:
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise NetworkFormatError(f"edge {e!r} is not a [u, v] pair")
        edges.append((str(e[0]), str(e[1])))

    members: dict[int, list] = {}
    dists: dict[int, LifetimeDistribution] = {}
    for key, entry in dict(doc["classes"]).items():
        try:
            cls = int(key)
        except (TypeError, ValueError):
            raise NetworkFormatError(f"class id {key!r} is not an integer")
        if not isinstance(entry, dict):
            raise NetworkFormatError(f"class {key} entry must be an object")
        unknown = set(entry) - _CLASS_FIELDS
        if unknown:
            raise NetworkFormatError(
                f"unknown fields in class {key}: {sorted(unknown)}"
            )
        if "members" not in entry or "distribution" not in entry:
            raise NetworkFormatError(
                f"class {key} needs 'members' and 'distribution'"
            )
        dist = entry["distribution"]
        if not isinstance(dist, dict) or set(dist) != _DIST_FIELDS:
            raise NetworkFormatError(
                f"class {key} distribution needs exactly {sorted(_DIST_FIELDS)}"
            )
        members[cls] = [str(m) for m in entry["members"]]
        try:
            dists[cls] = LifetimeDistribution(
                kind=str(dist["kind"]),
                params=tuple(float(p) for p in dist["params"]),
            )
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"class {key} distribution: {exc}")

    try:
        net = Network.build(
            nodes=[str(n) for n in doc["nodes"]],
            edges=edges,
            terminals=[str(t) for t in doc["terminals"]],
            failure_mode=mode,
            class_members=members,
            reliable_nodes=[str(n) for n in doc.get("reliable_nodes", [])],
            name=str(doc.get("name", "")),
        )
    except ValueError as exc:
        raise NetworkFormatError(str(exc))
    return net, dists


def load_network(path) -> tuple[Network, dict[int, LifetimeDistribution]]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"invalid JSON: {exc}")
    return parse_network(doc)


def network_document(
    net: Network, dists: dict[int, LifetimeDistribution]
) -> dict:
    """Inverse of :func:`parse_network` (lossless round trip)."""
    classes = {}
    for s in range(1, net.n_classes + 1):
        classes[str(s)] = {
            "members": [
                cid for cid, c in zip(net.component_ids, net.classes) if c == s
            ],
            "distribution": {
                "kind": dists[s].kind,
                "params": list(dists[s].params),
            },
        }
    return {
        "name": net.name,
        "failure_mode": net.failure_mode.value,
        "nodes": list(net.nodes),
        "edges": [list(e) for e in net.edges],
        "terminals": list(net.terminals),
        "reliable_nodes": sorted(net.reliable_nodes),
        "classes": classes,
    }


# -- result serialization -------------------------------------------------

def config_hash(config: dict) -> str:
    """Stable digest of the run parameters embedded in output headers."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _header_lines(meta: dict) -> list[str]:
    lines = [f"# version: {ARTIFACT_VERSION}"]
    for key in sorted(meta):
        lines.append(f"# {key}: {meta[key]}")
    return lines


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(
    path, curve: ReliabilityCurve, meta: dict, re: np.ndarray = None
) -> None:
    """Reliability CSV: columns t, R and optionally RE (blank where the
    truth value sits below the reporting floor)."""
    lines = _header_lines(meta)
    lines.append("t,R,RE" if re is not None else "t,R")
    for i, (t, r) in enumerate(zip(curve.grid, curve.values)):
        row = f"{_fmt(t)},{_fmt(r)}"
        if re is not None:
            row += "," + ("" if np.isnan(re[i]) else _fmt(re[i]))
        lines.append(row)
    _write_text(path, lines)


def write_signature_csv(path, table: SignatureTable, meta: dict) -> None:
    """Signature CSV: l_1..l_S, n_surv, n_fail, phi_hat, flag.

    The flag column is ``envelope`` for combinations resolved by the
    monotone envelope and empty otherwise."""
    n_cls = len(table.class_sizes)
    lines = _header_lines(meta)
    cols = [f"l_{s + 1}" for s in range(n_cls)]
    lines.append(",".join(cols + ["n_surv", "n_fail", "phi_hat", "flag"]))
    keys = table.keys
    for i in range(table.size):
        phi = table.phi_hat[i]
        row = [str(int(k)) for k in keys[i]]
        row += [
            str(int(table.n_surv[i])),
            str(int(table.n_fail[i])),
            "" if np.isnan(phi) else _fmt(phi),
            "envelope" if table.filled[i] else "",
        ]
        lines.append(",".join(row))
    _write_text(path, lines)


def table_document(table: SignatureTable) -> dict:
    return {
        "class_sizes": list(table.class_sizes),
        "n_surv": [int(v) for v in table.n_surv],
        "n_fail": [int(v) for v in table.n_fail],
        "phi_hat": [None if np.isnan(v) else float(v) for v in table.phi_hat],
        "provenance": table.provenance,
        "filled": [bool(b) for b in table.filled],
    }


def table_from_document(doc: dict) -> SignatureTable:
    phi = np.array(
        [np.nan if v is None else v for v in doc["phi_hat"]], dtype=np.float64
    )
    return SignatureTable(
        class_sizes=tuple(doc["class_sizes"]),
        n_surv=np.asarray(doc["n_surv"], dtype=np.int64),
        n_fail=np.asarray(doc["n_fail"], dtype=np.int64),
        phi_hat=phi,
        provenance=doc["provenance"],
        filled=np.asarray(doc["filled"], dtype=bool),
    )


def write_json(path, payload: dict, meta: dict) -> None:
    doc = {"version": ARTIFACT_VERSION, **meta, **payload}
    _write_text(path, [json.dumps(doc, sort_keys=True, indent=1)])


def _write_text(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- model files ----------------------------------------------------------

def save_model(path, model: Forest, net: Network) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "artifact_version": ARTIFACT_VERSION,
        "ordering_hash": net.ordering_hash(),
        "n_features": model.n_features,
        "ntree": model.ntree,
        "mtry": model.mtry,
        "seed": model.seed,
        "feat": [int(v) for v in model.feat],
        "left": [int(v) for v in model.left],
        "right": [int(v) for v in model.right],
        "label": [int(v) for v in model.label],
        "offsets": [int(v) for v in model.offsets],
    }
    _write_text(path, [json.dumps(doc, sort_keys=True)])


def load_model(path, expected_hash: str = None) -> Forest:
    """Read a model file; refuse version or component-ordering mismatches."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON: {exc}")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {doc.get('format_version')!r}"
        )
    if expected_hash is not None and doc.get("ordering_hash") != expected_hash:
        raise ModelFormatError(
            "model was trained on a network with a different component "
            "ordering"
        )
    return Forest(
        n_features=int(doc["n_features"]),
        ntree=int(doc["ntree"]),
        mtry=int(doc["mtry"]),
        seed=int(doc["seed"]),
        feat=np.asarray(doc["feat"], dtype=np.int64),
        left=np.asarray(doc["left"], dtype=np.int64),
        right=np.asarray(doc["right"], dtype=np.int64),
        label=np.asarray(doc["label"], dtype=np.uint8),
        offsets=np.asarray(doc["offsets"], dtype=np.int64),
    )
