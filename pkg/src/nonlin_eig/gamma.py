"""Refinement families and ground-state convergence tables.

Each level carries a graph, an energy of the same kind, and the vertex mass
``1 / n``. Rayleigh quotients are reported with the mass-weighted norm and a
mass-scaled energy for the sum-type kinds, so values are comparable across
levels. Fields are compared on the finest level after nearest-neighbour
injection, unit normalisation and sign alignment.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .functionals import GRAPH_LIPSCHITZ, Functional, evaluate, nullspace_component
from .graph import WeightedGraph, grid_graph, random_geometric_graph
from .power import PowerConfig, certify, run_power

FAMILY_KINDS = ("grid2d", "random_geometric")


class DisconnectedLevelError(ValueError):
    pass


def two_moons(n, noise=0.05, seed=0):
    """Two interleaved half circles with Gaussian jitter (``n // 2`` points each)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n1 = n // 2
    n2 = n - n1
    t1 = np.linspace(0.0, np.pi, n1)
    t2 = np.linspace(0.0, np.pi, n2)
    upper = np.column_stack([np.cos(t1), np.sin(t1)])
    lower = np.column_stack([1.0 - np.cos(t2), 0.5 - np.sin(t2)])
    pts = np.vstack([upper, lower])
    return pts + noise * rng.standard_normal(pts.shape)


@dataclass
class Level:
    graph: WeightedGraph
    functional: Functional
    mass: float


@dataclass
class RefinementFamily:
    kind: str
    sizes: list
    levels: list
    spec: dict = field(default_factory=dict)

    @property
    def finest(self) -> Level:
        return self.levels[-1]

    def prolong(self, k, u) -> np.ndarray:
        """Nearest-neighbour injection of a level-``k`` field to the finest level."""
        src = self.levels[k].graph.positions
        dst = self.finest.graph.positions
        if k == len(self.levels) - 1:
            return np.asarray(u, dtype=float).copy()
        _, idx = cKDTree(src).query(dst)
        return np.asarray(u, dtype=float)[idx]


def _functional_for(fspec, g: WeightedGraph, mass):
    d = dict(fspec)
    kind = d["kind"]
    if kind == GRAPH_LIPSCHITZ:
        cons = d.get("constraint", [])
        pts = d.get("constraint_points")
        if pts is not None:
            _, idx = cKDTree(g.positions).query(np.atleast_2d(np.asarray(pts, dtype=float)))
            d["constraint"] = np.unique(idx).tolist()
        elif isinstance(cons, str) and cons == "boundary" and g.grid_shape is None:
            raise ValueError("boundary constraint needs a grid family")
        d.pop("constraint_points", None)
    elif kind in ("graph_tv", "graph_dirichlet"):
        d["scale"] = mass
    elif kind == "grid_tv_central":
        d["scale"] = mass
    return Functional.from_dict(d, g)


def build_family(spec: dict, functional) -> RefinementFamily:
    """Build a refinement family.

    ``spec`` is ``{"kind": "grid2d", "levels": [8, 16, 32]}`` or
    ``{"kind": "random_geometric", "levels": [200, 400], "eps": 0.2 | "eps_scale": 2.0, "seed": 0}``
    (uniform points in the unit square; ``eps_scale`` gives
    ``eps = eps_scale * sqrt(log n / n)``). ``functional`` is one descriptor
    dict for all levels, or a list with one per level of a common kind.
    """
    kind = spec.get("kind")
    if kind not in FAMILY_KINDS:
        raise ValueError(f"family kind must be one of {FAMILY_KINDS}")
    sizes = [int(s) for s in spec.get("levels", [])]
    if not sizes:
        raise ValueError("family needs at least one level")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("levels must be strictly increasing")
    fspecs = functional if isinstance(functional, list) else [functional] * len(sizes)
    if len(fspecs) != len(sizes):
        raise ValueError("one functional descriptor per level")
    if len({f["kind"] for f in fspecs}) != 1:
        raise ValueError("all levels must use the same functional kind")
    levels = []
    seed = int(spec.get("seed", 0))
    for idx, (n, fs) in enumerate(zip(sizes, fspecs)):
        if kind == "grid2d":
            g = grid_graph(n)
        else:
            rng = np.random.Generator(np.random.PCG64([seed, idx]))
            pts = rng.random((n, 2))
            eps = float(spec["eps"]) if "eps" in spec else float(spec.get("eps_scale", 2.0)) * math.sqrt(math.log(n) / n)
            g = random_geometric_graph(pts, eps)
        if not g.is_connected:
            raise DisconnectedLevelError(f"level {idx} (size {n}) is disconnected")
        mass = 1.0 / g.n
        levels.append(Level(g, _functional_for(fs, g, mass), mass))
    return RefinementFamily(kind, sizes, levels, dict(spec))


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    fields: list = field(default_factory=list, repr=False)

    def column(self, key):
        return [r[key] for r in self.rows]

    def to_csv(self) -> str:
        keys = ["level", "size", "n", "lambda", "distance", "iterations", "runtime", "converged", "certified"]
        lines = [",".join(keys)]
        for r in self.rows:
            lines.append(",".join("" if r[k] is None else repr(r[k]) for k in keys))
        return "\n".join(lines) + "\n"


def level_lambda(level: Level, u) -> float:
    """Rayleigh quotient with mass-weighted norm and mass-scaled energy."""
    J = level.functional
    r = u - nullspace_component(J, u)
    nr = math.sqrt(level.mass) * np.linalg.norm(r)
    return float(J.alpha * evaluate(J, u) / nr ** J.alpha)


def _default_init(level: Level, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    g = level.graph
    if level.functional.kind == GRAPH_LIPSCHITZ:
        u = np.ones(g.n)
    else:
        u = rng.standard_normal(g.n)
        if g.positions is not None:
            # a smooth component keeps coarse and fine starts comparable
            u = u + 10.0 * (g.positions[:, 0] - g.positions[:, 0].mean())
    u[level.functional.constraint] = 0.0
    return u


def ground_state_per_level(fam: RefinementFamily, power: dict | None = None, inits=None, seed=0, workers=1):
    """Run the power method on every level and tabulate ``lambda_k`` and successor distances."""
    power = dict(power or {})

    def solve(k):
        lev = fam.levels[k]
        u0 = inits[k] if inits is not None else _default_init(lev, seed)
        cfg = PowerConfig(lev.functional, **power)
        t0 = time.perf_counter()
        res, trace = run_power(cfg, u0)
        dt = time.perf_counter() - t0
        cert = certify(res, lev.functional, cfg.data_p) if cfg.hilbert else None
        return res, trace, dt, cert

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(solve, range(len(fam.levels))))
    else:
        out = [solve(k) for k in range(len(fam.levels))]
    table = ConvergenceTable()
    up = []
    for k, (res, trace, dt, cert) in enumerate(out):
        v = fam.prolong(k, res.u)
        up.append(v / np.linalg.norm(v))
    for k, (res, trace, dt, cert) in enumerate(out):
        dist = None
        if k + 1 < len(out):
            a, b = up[k], up[k + 1]
            s = 1.0 if np.dot(a, b) >= 0 else -1.0
            dist = float(np.linalg.norm(s * a - b))
        table.rows.append({
            "level": k, "size": fam.sizes[k], "n": fam.levels[k].graph.n,
            "lambda": level_lambda(fam.levels[k], res.u), "distance": dist,
            "iterations": res.iterations, "runtime": dt, "converged": res.converged,
            "certified": None if cert is None else cert.certified,
        })
        table.fields.append(res.u)
    return table


@dataclass
class ConvergenceReport:
    lambda_gaps: list
    distances: list
    lambda_pass: bool
    distance_pass: bool

    @property
    def passed(self) -> bool:
        return self.lambda_pass and self.distance_pass

    def lines(self):
        fmt = lambda ok: "PASS" if ok else "FAIL"
        return [f"{fmt(self.lambda_pass)} successor eigenvalue gaps decreasing: {self.lambda_gaps}",
                f"{fmt(self.distance_pass)} successor field distances decreasing: {self.distances}"]


def _decreasing_tail(vals):
    a, b = vals[-2], vals[-1]
    return bool(b < a or (a == 0.0 and b == 0.0))


def convergence_report(table: ConvergenceTable) -> ConvergenceReport:
    """Check the last two successor gaps in ``lambda`` and in the aligned fields."""
    if len(table.rows) < 3:
        raise ValueError("convergence report needs at least three levels")
    lam = table.column("lambda")
    gaps = [float(abs(b - a)) for a, b in zip(lam, lam[1:])]
    dists = [d for d in table.column("distance") if d is not None]
    return ConvergenceReport(gaps, dists, _decreasing_tail(gaps), _decreasing_tail(dists))


__all__ = [
    "RefinementFamily", "Level", "ConvergenceTable", "ConvergenceReport", "build_family",
    "ground_state_per_level", "convergence_report", "level_lambda", "two_moons", "DisconnectedLevelError",
]
