"""Weighted graphs, vertex/edge fields and the graph differential operators.

Edges are stored once with ``i < j``. Edge fields hold one value per stored
edge; the reverse orientation is the negation (antisymmetric extension), so
sums over ordered vertex pairs count every stored edge twice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc


class DimensionError(ValueError):
    """Field length does not match the graph it is used with."""


class NormKind(enum.Enum):
    L1 = 1.0
    L2 = 2.0
    LINF = math.inf

    @property
    def p(self) -> float:
        return self.value

    @property
    def dual(self) -> "NormKind":
        return {NormKind.L1: NormKind.LINF, NormKind.L2: NormKind.L2, NormKind.LINF: NormKind.L1}[self]

    @classmethod
    def parse(cls, tag) -> "NormKind":
        if isinstance(tag, NormKind):
            return tag
        key = str(tag).lower().replace("ℓ", "l")
        aliases = {"l1": cls.L1, "1": cls.L1, "l2": cls.L2, "2": cls.L2,
                   "linf": cls.LINF, "inf": cls.LINF, "l∞": cls.LINF}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown norm {tag!r}") from None


class WeightedGraph:
    """Undirected graph with positive edge weights.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : sequence of (i, j, w)
        Each unordered pair at most once (in either orientation). Zero
        weights are dropped; negative weights and self-loops are rejected.
    positions : array_like, optional
        Vertex coordinates, used by refinement families for prolongation.
    """

    def __init__(self, n, edges, positions=None, grid_shape=None):
        n = int(n)
        if n <= 0:
            raise ValueError("graph needs at least one vertex")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 3))
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("edges must be (i, j, w) triples")
        i = arr[:, 0].astype(np.int64)
        j = arr[:, 1].astype(np.int64)
        w = arr[:, 2]
        if np.any(i != arr[:, 0]) or np.any(j != arr[:, 1]):
            raise ValueError("vertex indices must be integers")
        if np.any((i < 0) | (i >= n) | (j < 0) | (j >= n)):
            raise ValueError(f"vertex index out of range [0, {n})")
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("edge weights must be finite and nonnegative")
        keep = w > 0
        i, j, w = i[keep], j[keep], w[keep]
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        key = lo * n + hi
        order = np.argsort(key, kind="stable")
        key, lo, hi, w = key[order], lo[order], hi[order], w[order]
        if key.size and np.any(key[1:] == key[:-1]):
            dup = np.flatnonzero(key[1:] == key[:-1])[0]
            a, b = lo[dup], hi[dup]
            if w[dup] != w[dup + 1]:
                raise ValueError(f"nonsymmetric weights on edge ({a}, {b})")
            raise ValueError(f"edge ({a}, {b}) given twice")
        self.n = n
        self.src = lo
        self.dst = hi
        self.weights = w
        self.positions = None if positions is None else np.asarray(positions, dtype=float)
        if self.positions is not None and self.positions.shape[0] != n:
            raise ValueError("positions must have one row per vertex")
        self.grid_shape = None if grid_shape is None else tuple(int(s) for s in grid_shape)
        for a in (self.src, self.dst, self.weights):
            a.setflags(write=False)

    @property
    def m(self) -> int:
        return self.src.size

    @property
    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weights.tolist()))

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Sparse weighted incidence ``D`` with ``(D u)_e = sqrt(w_e) (u_j - u_i)``."""
        sw = np.sqrt(self.weights)
        rows = np.repeat(np.arange(self.m), 2)
        cols = np.column_stack([self.src, self.dst]).ravel()
        vals = np.column_stack([-sw, sw]).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    @cached_property
    def incidence_t(self) -> sp.csr_matrix:
        return self.incidence.T.tocsr()

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        a = sp.coo_matrix((self.weights, (self.src, self.dst)), shape=(self.n, self.n))
        return (a + a.T).tocsr()

    def neighbors(self, x: int):
        """Neighbors of ``x`` and the connecting weights, in O(deg)."""
        adj = self.adjacency
        sl = slice(adj.indptr[x], adj.indptr[x + 1])
        return adj.indices[sl], adj.data[sl]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def laplacian_matvec(self, u):
        """``L u`` with ``(L u)(x) = sum_y w(x,y) (u(x) - u(y))``, matrix-free."""
        D = self.incidence
        return self.incidence_t @ (D @ u)

    @cached_property
    def operator_norm_sq_bound(self) -> float:
        """Upper bound on ``||D||^2``: twice the largest weighted degree."""
        return float(2.0 * self.degrees.max()) if self.m else 0.0

    @cached_property
    def components(self) -> np.ndarray:
        _, labels = _cc(self.adjacency, directed=False)
        return labels.astype(np.int64)

    @property
    def is_connected(self) -> bool:
        return self.n == 1 or int(self.components.max()) == 0

    def check(self, u, name="field") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise DimensionError(f"{name} has shape {u.shape}, expected ({self.n},)")
        return u

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class EdgeField:
    """One value per stored edge ``(i, j)``, ``i < j``; ``h(j, i) = -h(i, j)``."""

    graph: WeightedGraph
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.graph.m,):
            raise DimensionError(f"edge field has shape {v.shape}, expected ({self.graph.m},)")
        object.__setattr__(self, "values", v)


def grad(g: WeightedGraph, u) -> EdgeField:
    u = g.check(u)
    return EdgeField(g, g.incidence @ u)


def div(g: WeightedGraph, h) -> np.ndarray:
    """Graph divergence, ``div h(x) = sum_y sqrt(w(x,y)) (h(y,x) - h(x,y))``.

    With this sign ``<grad u, h> = <u, div h>`` over ordered pairs.
    """
    if isinstance(h, EdgeField):
        if h.graph is not g:
            raise DimensionError("edge field belongs to a different graph")
        vals = h.values
    else:
        vals = np.asarray(h, dtype=float)
        if vals.shape != (g.m,):
            raise DimensionError(f"edge field has shape {vals.shape}, expected ({g.m},)")
    return 2.0 * (g.incidence_t @ vals)


def edge_inner(h1: EdgeField, h2: EdgeField) -> float:
    """Inner product over ordered vertex pairs (each stored edge twice)."""
    return 2.0 * float(np.dot(h1.values, h2.values))


def norm(u, kind=NormKind.L2) -> float:
    """p-norm of a vertex field (array) or an edge field (ordered-pair sum)."""
    kind = NormKind.parse(kind)
    if isinstance(u, EdgeField):
        a = np.abs(u.values)
        if a.size == 0:
            return 0.0
        if kind is NormKind.LINF:
            return float(a.max())
        if kind is NormKind.L1:
            return float(2.0 * a.sum())
        return float(math.sqrt(2.0) * np.linalg.norm(a))
    a = np.asarray(u, dtype=float)
    if kind is NormKind.LINF:
        return float(np.abs(a).max()) if a.size else 0.0
    if kind is NormKind.L1:
        return float(np.abs(a).sum())
    return float(np.linalg.norm(a))


def connected_components(g: WeightedGraph) -> np.ndarray:
    return g.components.copy()


def componentwise_mean(g: WeightedGraph, u) -> np.ndarray:
    u = g.check(u)
    labels = g.components
    sums = np.bincount(labels, weights=u)
    counts = np.bincount(labels)
    return (sums / counts)[labels]


def nullspace_project(g: WeightedGraph, u, functional=None) -> np.ndarray:
    """Orthogonal projection of ``u`` onto the nullspace of ``functional``.

    Componentwise constants for the unconstrained energies; the zero field
    when the functional has a trivial nullspace (Lipschitz with a constraint
    set).
    """
    u = g.check(u)
    if functional is not None and functional.trivial_nullspace:
        return np.zeros_like(u)
    return componentwise_mean(g, u)


# ---------------------------------------------------------------- builders

def grid_graph(nx: int, ny: int | None = None, h: float | None = None, weight=None) -> WeightedGraph:
    """4-neighbour grid on cell centres of the unit square.

    Vertex ``(i, j)`` (``i`` along x) has index ``i * ny + j``. Weights
    default to ``1 / h**2`` with ``h = 1 / nx``.
    """
    ny = nx if ny is None else ny
    h = 1.0 / nx if h is None else float(h)
    w = 1.0 / h ** 2 if weight is None else float(weight)
    idx = np.arange(nx * ny).reshape(nx, ny)
    right = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    up = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    pairs = np.vstack([right, up])
    edges = np.column_stack([pairs, np.full(len(pairs), w)])
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pos = np.column_stack([(ii.ravel() + 0.5) * h, (jj.ravel() + 0.5) * h])
    return WeightedGraph(nx * ny, edges, positions=pos, grid_shape=(nx, ny))


def grid_boundary(nx: int, ny: int | None = None) -> np.ndarray:
    ny = nx if ny is None else ny
    idx = np.arange(nx * ny).reshape(nx, ny)
    mask = np.zeros((nx, ny), dtype=bool)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
    return idx[mask]


def path_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    edges = [(k, k + 1, weight) for k in range(n - 1)]
    return WeightedGraph(n, edges, positions=np.arange(n, dtype=float)[:, None])


def random_geometric_graph(points, eps: float) -> WeightedGraph:
    """epsilon-ball graph with weights ``1 / eps**2`` inside the ball."""
    from scipy.spatial import cKDTree

    pts = np.asarray(points, dtype=float)
    pairs = cKDTree(pts).query_pairs(eps, output_type="ndarray")
    w = np.full(len(pairs), 1.0 / eps ** 2)
    edges = np.column_stack([pairs, w]) if len(pairs) else np.zeros((0, 3))
    return WeightedGraph(len(pts), edges, positions=pts)


def dijkstra_distance(g: WeightedGraph, sources) -> np.ndarray:
    """Geodesic distance to ``sources`` with edge lengths ``1 / sqrt(w)``."""
    from scipy.sparse.csgraph import dijkstra

    lengths = sp.coo_matrix((1.0 / np.sqrt(g.weights), (g.src, g.dst)), shape=(g.n, g.n))
    return dijkstra(lengths.tocsr(), directed=False, indices=np.asarray(sources), min_only=True)
