"""Readers and writers for .sym matrices, .graph files, instance metadata and JSON reports.

.sym: first line ``N nnz``, then nnz lines ``i j w`` (0-based, i <= j).
Weights are decimals; ``p/q`` and bare integers are read as exact rationals.
A JSON mirror {"n", "nnz", "entries": [[i, j, w], ...]} is accepted too.

.graph: first line ``n m``, then m lines ``u v`` (0-based).
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from spectral_ising.core import SymmetricInteraction
from spectral_ising.gadget import CliqueGadget, RegularGadget
from spectral_ising.reduction import MaxCutInstance, ReducedInstance, ReductionParams

SCHEMA_VERSION = "1.0"


class FormatError(ValueError):
    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def parse_weight(token: str):
    token = token.strip()
    if "/" in token:
        return Fraction(token)
    try:
        return int(token)
    except ValueError:
        return float(token)


def format_weight(w) -> str:
    if isinstance(w, Fraction):
        return str(w)
    if isinstance(w, (int, np.integer)):
        return str(int(w))
    return repr(float(w))


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _header(lines, path, what):
    try:
        lineno, tok = next(lines)
    except StopIteration:
        raise FormatError(path, None, "empty file") from None
    if len(tok) != 2:
        raise FormatError(path, lineno, f"header must be '{what}'")
    try:
        a, b = int(tok[0]), int(tok[1])
    except ValueError:
        raise FormatError(path, lineno, f"header must be two integers '{what}'") from None
    if a < 1 or b < 0:
        raise FormatError(path, lineno, f"invalid header values {a} {b}")
    return a, b


def _entries_to_matrix(n, items, path):
    """items: (lineno, i, j, w). Normalizes i <= j and reports the offending line."""
    seen = {}
    entries = []
    for lineno, i, j, w in items:
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(path, lineno, f"index ({i}, {j}) out of range for N={n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise FormatError(path, lineno, f"duplicate entry {key} (first on line {seen[key]})")
        seen[key] = lineno
        if isinstance(w, float) and not math.isfinite(w):
            raise FormatError(path, lineno, "weight must be finite")
        entries.append((key[0], key[1], w))
    return SymmetricInteraction.from_entries(n, entries)


def parse_matrix_text(text: str, path="<string>") -> SymmetricInteraction:
    lines = _data_lines(text)
    n, nnz = _header(lines, path, "N nnz")
    items = []
    for lineno, tok in lines:
        if len(tok) != 3:
            raise FormatError(path, lineno, "expected 'i j w'")
        try:
            i, j = int(tok[0]), int(tok[1])
            w = parse_weight(tok[2])
        except (ValueError, ZeroDivisionError):
            raise FormatError(path, lineno, f"cannot parse entry {' '.join(tok)!r}") from None
        if i > j:
            raise FormatError(path, lineno, f"entry ({i}, {j}) must have i <= j")
        items.append((lineno, i, j, w))
    if len(items) != nnz:
        raise FormatError(path, None, f"header announces {nnz} entries, found {len(items)}")
    return _entries_to_matrix(n, items, path)


def matrix_from_json(obj, path="<json>") -> SymmetricInteraction:
    """JSON mirror. Entries may list both (i, j) and (j, i) as long as they agree."""
    if not isinstance(obj, dict) or "n" not in obj or "entries" not in obj:
        raise FormatError(path, None, "JSON matrix needs 'n' and 'entries'")
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise FormatError(path, None, "'n' must be a positive integer")
    upper, lower = [], {}
    for k, e in enumerate(obj["entries"]):
        if not (isinstance(e, list) and len(e) == 3):
            raise FormatError(path, f"entries[{k}]", "expected [i, j, w]")
        i, j, w = e
        if isinstance(w, str):
            w = parse_weight(w)
        if i > j:
            lower[(j, i)] = (k, w)
        else:
            upper.append((f"entries[{k}]", i, j, w))
    ukeys = {(i, j): w for _, i, j, w in upper}
    for key, (k, w) in lower.items():
        if key in ukeys:
            if ukeys[key] != w:
                raise FormatError(path, f"entries[{k}]", f"mirror of {key} has weight {w} != {ukeys[key]}")
        else:
            upper.append((f"entries[{k}]", key[0], key[1], w))
    if "nnz" in obj and obj["nnz"] != len(upper):
        raise FormatError(path, None, f"'nnz' is {obj['nnz']} but {len(upper)} distinct entries were given")
    return _entries_to_matrix(n, upper, path)


def matrix_to_json(J: SymmetricInteraction) -> dict:
    ents = [[i, j, w if isinstance(w, (int, float)) else str(w)] for i, j, w in J.entries()]
    return {"n": J.n, "nnz": J.nnz, "entries": ents}


def parse_matrix(path) -> SymmetricInteraction:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(path, exc.lineno, exc.msg) from None
        return matrix_from_json(obj, path)
    return parse_matrix_text(text, path)


def format_matrix(J: SymmetricInteraction) -> str:
    out = [f"{J.n} {J.nnz}"]
    out += [f"{i} {j} {format_weight(w)}" for i, j, w in J.entries()]
    return "\n".join(out) + "\n"


def write_matrix(J: SymmetricInteraction, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(matrix_to_json(J)) + "\n")
    else:
        path.write_text(format_matrix(J))


def parse_graph_text(text: str, path="<string>") -> MaxCutInstance:
    lines = _data_lines(text)
    n, m = _header(lines, path, "n m")
    edges, seen = [], {}
    for lineno, tok in lines:
        if len(tok) != 2:
            raise FormatError(path, lineno, "expected 'u v'")
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise FormatError(path, lineno, f"cannot parse edge {' '.join(tok)!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(path, lineno, f"vertex out of range in ({u}, {v}) for n={n}")
        if u == v:
            raise FormatError(path, lineno, f"self-loop at {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise FormatError(path, lineno, f"duplicate edge {key} (first on line {seen[key]})")
        seen[key] = lineno
        edges.append(key)
    if len(edges) != m:
        raise FormatError(path, None, f"header announces {m} edges, found {len(edges)}")
    return MaxCutInstance.from_edges(n, edges)


def parse_graph(path) -> MaxCutInstance:
    path = Path(path)
    return parse_graph_text(path.read_text(), path)


def format_graph(H: MaxCutInstance) -> str:
    return "\n".join([f"{H.m} {len(H.edges)}"] + [f"{u} {v}" for u, v in H.edges]) + "\n"


def write_graph(H: MaxCutInstance, path) -> None:
    Path(path).write_text(format_graph(H))


def instance_meta(inst: ReducedInstance) -> dict:
    """Everything needed to rebuild a reduced instance without resampling."""
    block = inst.block
    if isinstance(block, CliqueGadget):
        bmeta = {"kind": "clique", "n": block.n, "t": block.t, "beta": float(block.beta), "strict": block.strict}
    else:
        bmeta = {"kind": "regular", "n": block.n, "d": block.d, "t": block.t, "beta": float(block.beta),
                 "seed": block.seed, "edges": [list(e) for e in block.edges]}
    return {
        "schema_version": SCHEMA_VERSION,
        "params": inst.params.to_dict() if inst.params else None,
        "graph": {"m": inst.graph.m, "edges": [list(e) for e in inst.graph.edges]} if inst.graph else None,
        "block": bmeta,
        "m": inst.m,
        "size": inst.size,
        "decomposition": {
            "D": "block-diagonal copies of the gadget; block v spans vertices v*n .. v*n+n-1",
            "E": [[i, j, float(w)] for i, j, w in inst.matchings],
        },
        "gadget_map": {str(v): {"offset": v * inst.n, "terminals": list(range(v * inst.n, v * inst.n + inst.t)),
                                "groups": inst.groups.get(v)} for v in range(inst.m)},
    }


def instance_from_meta(meta: dict) -> ReducedInstance:
    b = meta["block"]
    if b["kind"] == "clique":
        block = CliqueGadget(b["n"], b["t"], b["beta"], strict=b.get("strict", True))
    elif b["kind"] == "regular":
        block = RegularGadget(b["n"], b["d"], b["t"], b["beta"], tuple(tuple(e) for e in b["edges"]), b["seed"])
    else:
        raise ValueError(f"unknown block kind {b['kind']!r}")
    p = meta.get("params")
    params = None
    if p:
        params = ReductionParams(p["variant"], p["gamma"], p["t"], p["n"], p.get("d"), p.get("eta"),
                                 p.get("seed"), p.get("strict", True))
    graph = MaxCutInstance.from_edges(meta["graph"]["m"], meta["graph"]["edges"]) if meta.get("graph") else None
    matchings = tuple((int(i), int(j), float(w)) for i, j, w in meta["decomposition"]["E"])
    groups = {int(v): g["groups"] for v, g in meta["gadget_map"].items() if g.get("groups") is not None}
    return ReducedInstance(block, meta["m"], matchings, params, graph, groups)


def load_meta(path) -> ReducedInstance:
    return instance_from_meta(json.loads(Path(path).read_text()))


def jsonable(obj):
    """Convert numpy scalars/arrays, Fractions and non-finite floats for JSON output.

    Non-finite floats become the strings "inf", "-inf" or "nan".
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    # repr-based floats: shortest string that round-trips (at most 17 significant digits)
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
