"""Readers and writers for graphs, fields, descriptors and traces."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .functionals import Functional
from .graph import WeightedGraph, grid_graph


def read_graph_tsv(path) -> WeightedGraph:
    """Edge list ``i<TAB>j<TAB>w``; ``#`` comments; optional ``n=<count>`` header."""
    n = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("n="):
            n = int(line[2:])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'i<TAB>j<TAB>w'")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed edge {line!r}") from None
    if n is None:
        n = 1 + max((max(i, j) for i, j, _ in edges), default=0)
    return WeightedGraph(n, edges)


def write_graph_tsv(g: WeightedGraph, path):
    lines = [f"n={g.n}"] + [f"{i}\t{j}\t{w!r}" for i, j, w in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def grid_from_spec(spec: dict) -> WeightedGraph:
    """``{"kind":"grid2d","nx":N,"ny":M,"h":h,"stencil":"nearest"}``."""
    if spec.get("kind") != "grid2d":
        raise ValueError("grid spec needs kind 'grid2d'")
    if spec.get("stencil", "nearest") != "nearest":
        raise ValueError("only the nearest-neighbour stencil is supported")
    nx = int(spec["nx"])
    ny = int(spec.get("ny", nx))
    return grid_graph(nx, ny, h=spec.get("h"))


def load_graph(path) -> WeightedGraph:
    p = Path(path)
    if p.suffix.lower() == ".json":
        return grid_from_spec(json.loads(p.read_text()))
    return read_graph_tsv(p)


def load_functional(path, graph) -> Functional:
    return Functional.from_dict(json.loads(Path(path).read_text()), graph)


def read_field_csv(path) -> np.ndarray:
    vals = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals.append(float(line.split(",")[0]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    u = np.array(vals, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{path}: field contains non-finite values")
    return u


def write_field_csv(u, path):
    # repr round-trips doubles exactly
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in np.asarray(u, dtype=float)))


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def to_json(obj, **kw) -> str:
    return json.dumps(_clean(obj), **kw)


def write_jsonl(records, path, keys=None):
    with open(path, "w") as fh:
        for r in records:
            if keys is not None:
                r = {k: r.get(k) for k in keys}
            fh.write(to_json(r) + "\n")


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
