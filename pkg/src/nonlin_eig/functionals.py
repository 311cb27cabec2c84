"""Absolutely homogeneous energies on weighted graphs and grids.

All sum-type energies follow the ordered-pair convention: every stored edge
contributes twice. The Lipschitz energy is a maximum and is unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graph import NormKind, WeightedGraph, componentwise_mean, norm as _norm

GRAPH_DIRICHLET = "graph_dirichlet"
GRAPH_TV = "graph_tv"
GRID_TV_CENTRAL = "grid_tv_central"
GRAPH_LIPSCHITZ = "graph_lipschitz"
KINDS = (GRAPH_DIRICHLET, GRAPH_TV, GRID_TV_CENTRAL, GRAPH_LIPSCHITZ)


class InfeasibleError(ValueError):
    """Field violates the constraint set of a constrained energy."""


class DegenerateInputError(ValueError):
    """Input lies in the nullspace (or argmin) where the quantity is undefined."""


class Infeasible:
    """Typed stand-in for ``J(u) = +inf``; refuses arithmetic on purpose."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"

    def __bool__(self):
        return False


INFEASIBLE = Infeasible()


def _central_diff_1d(n: int) -> sp.csr_matrix:
    # replicate padding: u[-1] = u[0], u[n] = u[n-1]
    rows, cols, vals = [], [], []
    for i in range(n):
        hi, lo = min(i + 1, n - 1), max(i - 1, 0)
        if hi != lo:
            rows += [i, i]
            cols += [hi, lo]
            vals += [1.0, -1.0]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class Functional:
    """Energy descriptor bound to a graph.

    Parameters
    ----------
    kind : str
        One of ``graph_dirichlet``, ``graph_tv``, ``grid_tv_central``,
        ``graph_lipschitz``.
    graph : WeightedGraph
    p : float
        Exponent of the Dirichlet energy (forced to 1 for ``graph_tv``).
    h : float
        Grid spacing for ``grid_tv_central``.
    constraint : array of int
        Vertices where ``u`` must vanish (``graph_lipschitz`` only).
    scale : float
        Constant factor in front of the energy, e.g. a vertex mass in
        refinement families.
    """

    kind: str
    graph: WeightedGraph
    p: float = 1.0
    h: float | None = None
    constraint: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == GRAPH_TV:
            object.__setattr__(self, "p", 1.0)
        if self.kind in (GRID_TV_CENTRAL, GRAPH_LIPSCHITZ):
            object.__setattr__(self, "p", 1.0)
        if self.p < 1:
            raise ValueError("Dirichlet exponent must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        c = np.unique(np.asarray(self.constraint, dtype=np.int64).ravel())
        if c.size and self.kind != GRAPH_LIPSCHITZ:
            raise ValueError("only graph_lipschitz takes a constraint set")
        if c.size and (c.min() < 0 or c.max() >= self.graph.n):
            raise ValueError("constraint vertex out of range")
        object.__setattr__(self, "constraint", c)
        if self.kind == GRID_TV_CENTRAL:
            if self.graph.grid_shape is None:
                raise ValueError("grid_tv_central needs a graph built from a grid")
            if self.h is None:
                object.__setattr__(self, "h", 1.0 / self.graph.grid_shape[0])
            if self.h <= 0:
                raise ValueError("grid spacing must be positive")

    # ------------------------------------------------------------ metadata
    @property
    def alpha(self) -> float:
        """Degree of absolute homogeneity."""
        return float(self.p) if self.kind == GRAPH_DIRICHLET else 1.0

    @property
    def one_homogeneous(self) -> bool:
        return self.alpha == 1.0

    @property
    def trivial_nullspace(self) -> bool:
        return self.kind == GRAPH_LIPSCHITZ and self.constraint.size > 0

    @cached_property
    def free_mask(self) -> np.ndarray:
        m = np.ones(self.graph.n, dtype=bool)
        m[self.constraint] = False
        return m

    @cached_property
    def operator(self) -> sp.csr_matrix:
        """Linear map ``K`` such that ``J(u) = scale * g(K u)``."""
        if self.kind != GRID_TV_CENTRAL:
            return self.graph.incidence
        nx, ny = self.graph.grid_shape
        cx = sp.kron(_central_diff_1d(nx), sp.identity(ny))
        cy = sp.kron(sp.identity(nx), _central_diff_1d(ny))
        return (sp.vstack([cx, cy]) / (2.0 * self.h)).tocsr()

    @cached_property
    def operator_t(self) -> sp.csr_matrix:
        return self.operator.T.tocsr()

    @cached_property
    def operator_norm_sq(self) -> float:
        if self.kind != GRID_TV_CENTRAL:
            return self.graph.operator_norm_sq_bound
        a = abs(self.operator)
        return float(np.asarray(a.sum(axis=1)).max() * np.asarray(a.sum(axis=0)).max())

    def edge_energy(self, y) -> float:
        """``g(y)`` with ``J(u) = scale * g(K u)``."""
        if self.kind == GRAPH_LIPSCHITZ:
            return float(np.abs(y).max()) if y.size else 0.0
        if self.kind == GRID_TV_CENTRAL:
            n = self.graph.n
            return float(np.hypot(y[:n], y[n:]).sum())
        if self.p == 1.0:
            return 2.0 * float(np.abs(y).sum())
        return 2.0 * float(np.sum(np.abs(y) ** self.p))

    # ---------------------------------------------------------------- I/O
    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == GRAPH_DIRICHLET:
            d["p"] = self.p
        if self.kind == GRID_TV_CENTRAL:
            d["h"] = self.h
        if self.kind == GRAPH_LIPSCHITZ:
            d["constraint"] = self.constraint.tolist()
        if self.scale != 1.0:
            d["scale"] = self.scale
        return d

    @classmethod
    def from_dict(cls, d: dict, graph: WeightedGraph) -> "Functional":
        d = dict(d)
        kind = d.pop("kind")
        constraint = d.pop("constraint", [])
        if isinstance(constraint, str):
            if constraint != "boundary" or graph.grid_shape is None:
                raise ValueError(f"constraint {constraint!r} needs a grid graph")
            from .graph import grid_boundary

            constraint = grid_boundary(*graph.grid_shape)
        return cls(kind, graph, p=float(d.pop("p", 1.0)), h=d.pop("h", None),
                   constraint=np.asarray(constraint, dtype=np.int64), scale=float(d.pop("scale", 1.0)))


def graph_dirichlet(g, p=2.0, scale=1.0):
    return Functional(GRAPH_DIRICHLET, g, p=p, scale=scale)


def graph_tv(g, scale=1.0):
    return Functional(GRAPH_TV, g, scale=scale)


def grid_tv_central(g, h=None, scale=1.0):
    return Functional(GRID_TV_CENTRAL, g, h=h, scale=scale)


def graph_lipschitz(g, constraint=(), scale=1.0):
    return Functional(GRAPH_LIPSCHITZ, g, constraint=np.asarray(constraint, dtype=np.int64), scale=scale)


# -------------------------------------------------------------------- ops

def is_feasible(f: Functional, u, atol=1e-12) -> bool:
    if not f.constraint.size:
        return True
    u = np.asarray(u, dtype=float)
    return bool(np.all(np.abs(u[f.constraint]) <= atol * (1.0 + np.abs(u).max())))


def evaluate(f: Functional, u):
    """Energy value, or ``INFEASIBLE`` when a constraint is violated."""
    u = f.graph.check(u)
    if not is_feasible(f, u):
        return INFEASIBLE
    return f.scale * f.edge_energy(f.operator @ u)


def subgradient(f: Functional, u) -> np.ndarray:
    """A deterministic element of the subdifferential at ``u``.

    Kinks use ``sign(0) = 0``; for the Lipschitz energy the subgradient is
    spread uniformly over all maximising edges and set to zero on the
    constraint set (any value there is admissible).
    """
    u = f.graph.check(u)
    if not is_feasible(f, u):
        raise InfeasibleError("u violates the constraint set")
    K, KT = f.operator, f.operator_t
    y = K @ u
    if f.kind == GRAPH_LIPSCHITZ:
        a = np.abs(y)
        top = a.max() if a.size else 0.0
        if top == 0.0:
            return np.zeros_like(u)
        arg = a >= top * (1.0 - 1e-12)
        q = np.where(arg, np.sign(y), 0.0) / arg.sum()
        z = KT @ q
        z[f.constraint] = 0.0
        return f.scale * z
    if f.kind == GRID_TV_CENTRAL:
        n = f.graph.n
        mag = np.hypot(y[:n], y[n:])
        inv = np.divide(1.0, mag, out=np.zeros_like(mag), where=mag > 0)
        return f.scale * (KT @ (y * np.concatenate([inv, inv])))
    p = f.p
    if p == 1.0:
        q = np.sign(y)
    else:
        q = np.abs(y) ** (p - 1.0) * np.sign(y)
    return f.scale * 2.0 * p * (KT @ q)


def nullspace_component(f: Functional, u) -> np.ndarray:
    u = f.graph.check(u)
    if f.trivial_nullspace:
        return np.zeros_like(u)
    return componentwise_mean(f.graph, u)


def rayleigh(f: Functional, u, exponent=None, norm=NormKind.L2, mass: float = 1.0) -> float:
    """``alpha J(u) / ||u - u_bar||**e`` with ``u_bar`` the nullspace projection.

    ``exponent`` defaults to the homogeneity ``alpha`` (scale invariant).
    ``mass`` weights every vertex in the norm, ``||v|| = mass**(1/p) ||v||_p``.
    """
    u = f.graph.check(u)
    e = f.alpha if exponent is None else float(exponent)
    kind = NormKind.parse(norm)
    r = u - nullspace_component(f, u)
    nr = _norm(r, kind)
    if kind is not NormKind.LINF:
        nr *= mass ** (1.0 / kind.p)
    if nr <= 1e-14 * (1.0 + _norm(u, kind)):
        raise DegenerateInputError("u lies in the nullspace; the Rayleigh quotient is undefined")
    J = evaluate(f, u)
    if J is INFEASIBLE:
        raise InfeasibleError("u violates the constraint set")
    return f.alpha * J / nr ** e


def project_out_nullspace(H, zeta, graph=None) -> np.ndarray:
    if isinstance(H, Functional):
        return np.asarray(zeta, dtype=float) - nullspace_component(H, zeta)
    if graph is None:
        return np.asarray(zeta, dtype=float)
    return graph.check(zeta) - componentwise_mean(graph, zeta)


def dual_seminorm(H, zeta, graph=None, method="auto", tol=1e-6) -> float:
    """Dual seminorm ``sup {<zeta, u> : H(u) <= 1}`` on ``N(H)^perp``.

    ``H`` is either the string ``"l2"`` (the Euclidean norm on the quotient
    by componentwise constants of ``graph``; pass ``graph=None`` for the
    plain norm) or a one-homogeneous :class:`Functional`. ``zeta`` is
    projected onto the orthogonal complement of the nullspace first.

    ``method`` selects ``"lp"`` (exact linear program, polyhedral kinds),
    ``"prox"`` (bisection on the extinction threshold of the proximal map,
    relative accuracy ``tol``) or ``"auto"``.
    """
    z = project_out_nullspace(H, zeta, graph)
    if isinstance(H, str):
        if NormKind.parse(H) is not NormKind.L2:
            raise ValueError("only the l2 norm is supported as a string H")
        return float(np.linalg.norm(z))
    if not H.one_homogeneous:
        raise ValueError("dual seminorm needs an absolutely 1-homogeneous functional")
    if not np.any(z):
        return 0.0
    if method == "auto":
        method = "prox" if H.kind == GRID_TV_CENTRAL else "lp"
    if method == "lp":
        return _dual_seminorm_lp(H, z)
    if method == "prox":
        return _dual_seminorm_prox(H, z, tol=tol)
    raise ValueError(f"unknown method {method!r}")


def _dual_seminorm_lp(H: Functional, z) -> float:
    from scipy.optimize import linprog

    if H.kind == GRID_TV_CENTRAL:
        raise ValueError("grid TV is not polyhedral; use method='prox'")
    n = H.graph.n
    K = H.operator
    m = K.shape[0]
    # variables (u, t): maximise <z, u> s.t. |K u| <= t, weight . t <= 1
    c = np.concatenate([-z, np.zeros(m)])
    I = sp.identity(m, format="csr")
    A = sp.vstack([sp.hstack([K, -I]), sp.hstack([-K, -I])]).tocsr()
    b = np.zeros(2 * m)
    if H.kind == GRAPH_LIPSCHITZ:
        # t_e <= 1 / scale
        bounds = [(None, None)] * n + [(0.0, 1.0 / H.scale)] * m
        A_ub, b_ub = A, b
        for v in H.constraint:
            bounds[v] = (0.0, 0.0)
    else:
        row = sp.csr_matrix(np.concatenate([np.zeros(n), np.full(m, 2.0 * H.scale)])[None, :])
        A_ub = sp.vstack([A, row]).tocsr()
        b_ub = np.concatenate([b, [1.0]])
        bounds = [(None, None)] * n + [(0.0, None)] * m
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dual seminorm LP failed: {res.message}")
    return float(-res.fun)


def _dual_seminorm_prox(H: Functional, z, tol=1e-6) -> float:
    from .prox import ProxProblem, solve_prox

    # prox_{tH}(z) lies in N(H) iff H_*(z) <= t
    def extinct(t):
        sol = solve_prox(ProxProblem(z, t, H, data_p=2, tol=1e-10, max_iter=20000))
        r = sol.u - nullspace_component(H, sol.u)
        return np.linalg.norm(r) <= 1e-5 * tol * np.linalg.norm(z)

    lo, hi = 0.0, 1.0
    # <z, z> <= H_*(z) H(z) gives a lower bound to start from
    Hz = evaluate(H, z)
    if Hz is not INFEASIBLE and Hz > 0:
        lo = float(np.dot(z, z)) / Hz
        hi = max(2.0 * lo, 1e-300)
    while not extinct(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if extinct(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


__all__ = [
    "Functional", "INFEASIBLE", "Infeasible", "InfeasibleError", "DegenerateInputError",
    "evaluate", "subgradient", "rayleigh", "dual_seminorm", "nullspace_component",
    "graph_dirichlet", "graph_tv", "grid_tv_central", "graph_lipschitz", "is_feasible",
    "KINDS", "GRAPH_DIRICHLET", "GRAPH_TV", "GRID_TV_CENTRAL", "GRAPH_LIPSCHITZ",
]

