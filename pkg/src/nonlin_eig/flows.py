"""Discrete flows towards nonlinear eigenvectors.

Minimizing movements (implicit, via the prox), the normalized gradient flow
built on them, and explicit Euler schemes for the Rayleigh-quotient flows
with ``H = ||.||_2`` on the orthogonal complement of the nullspace. For an
``alpha``-homogeneous energy the quotient is taken as
``R(u) = alpha J(u) / H(u)``, which is the choice that keeps ``||u||``
constant along the continuous flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (
    DegenerateInputError, Functional, evaluate, nullspace_component, rayleigh, subgradient,
)
from .power import PowerConfig, run_power
from .prox import ProxProblem, solve_prox

FLOW_KINDS = ("minmove", "ngf", "fagp", "nossek")


class FlowBlowUpError(RuntimeError):
    """Explicit scheme left the stability region."""


@dataclass
class FlowConfig:
    """Settings of one flow simulation.

    ``dt`` is the time step (``tau`` for the implicit schemes). ``dt=None``
    picks ``1e-3 / R(f)`` for the explicit schemes.
    """

    kind: str
    functional: Functional
    dt: float | None = None
    steps: int = 100
    data_p: int = 2
    H: str = "l2"
    inner_tol: float = 1e-8
    inner_max_iter: int = 50000
    reparametrize: bool = False
    store_iterates: bool = False
    blowup: float = 10.0

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"flow kind must be one of {FLOW_KINDS}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.H != "l2":
            raise ValueError("only H = l2 is supported")
        if self.kind == "ngf" and self.data_p != 2:
            raise ValueError("the normalized gradient flow uses data_p = 2")


@dataclass
class FlowTrace:
    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    normalized: list = field(default_factory=list)
    extinct: bool = False
    dt: float = math.nan
    alpha: float = 1.0

    def __len__(self):
        return len(self.records)

    def column(self, key) -> np.ndarray:
        return np.array([np.nan if r.get(key) is None else r[key] for r in self.records], dtype=float)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1] if self.iterates else None


def _record(J, u, t, ubar, **extra):
    r = u - ubar
    nr = float(np.linalg.norm(r))
    try:
        R = rayleigh(J, u)
    except DegenerateInputError:
        R = None
    rec = {"t": t, "J": evaluate(J, u), "norm": nr, "rayleigh": R}
    rec.update(extra)
    return rec


def run_minmove(cfg: FlowConfig, f) -> FlowTrace:
    """``u^{k+1} = prox^p_{tau^(p-1) J}(u^k)``; stops once the nullspace is reached."""
    J = cfg.functional
    u = J.graph.check(f).copy()
    u[J.constraint] = 0.0
    tau = cfg.dt if cfg.dt is not None else 1e-2
    weight = tau ** (cfg.data_p - 1)
    ubar = nullspace_component(J, u)
    tr = FlowTrace(dt=tau, alpha=J.alpha)
    tr.records.append(_record(J, u, 0.0, ubar))
    tr.iterates.append(u.copy())
    scale0 = np.linalg.norm(u - ubar)
    for k in range(1, cfg.steps + 1):
        if np.linalg.norm(u - ubar) <= 1e-12 * max(scale0, 1e-300):
            tr.extinct = True
            break
        sol = solve_prox(ProxProblem(u, weight, J, cfg.data_p, None, cfg.inner_tol, cfg.inner_max_iter))
        u = sol.u
        if sol.hit_extinction:
            u = nullspace_component(J, u)
        tr.records.append(_record(J, u, k * tau, ubar, inner_gap=sol.gap))
        tr.iterates.append(u.copy())
    return tr


def run_normalized_gf(cfg: FlowConfig, f) -> FlowTrace:
    """Minimizing movements for ``u' + dJ(u) = 0`` and ``w = (u - f_bar) / ||u - f_bar||``.

    The trace is truncated at extinction (``trace.extinct``). Records carry
    the Rayleigh quotient of ``w`` and the step ``ds = tau ||u - f_bar||^(alpha-2)``
    of the rescaled time.
    """
    J = cfg.functional
    u = J.graph.check(f).copy()
    u[J.constraint] = 0.0
    tau = cfg.dt if cfg.dt is not None else 1e-2
    fbar = nullspace_component(J, u)
    alpha = J.alpha
    tr = FlowTrace(dt=tau, alpha=alpha)
    d = np.linalg.norm(u - fbar)
    if d == 0.0:
        raise DegenerateInputError("initial datum lies in the nullspace")
    tr.iterates.append(u.copy())
    tr.normalized.append((u - fbar) / d)
    tr.records.append({"t": 0.0, "J": evaluate(J, u), "norm": d, "rayleigh": rayleigh(J, u), "ds": None})
    d0 = d
    for k in range(1, cfg.steps + 1):
        sol = solve_prox(ProxProblem(u, tau, J, 2, None, cfg.inner_tol, cfg.inner_max_iter))
        u_new = sol.u
        d_new = np.linalg.norm(u_new - fbar)
        # p-homogeneous energies with alpha >= 2 only decay, never extinguish
        if d_new <= 1e-14 * d0 or (alpha < 2.0 and sol.hit_extinction):
            tr.extinct = True
            break
        ds = tau * d ** (alpha - 2.0)
        u, d = u_new, d_new
        tr.iterates.append(u.copy())
        tr.normalized.append((u - fbar) / d)
        tr.records.append({"t": k * tau, "J": evaluate(J, u), "norm": d,
                           "rayleigh": rayleigh(J, tr.normalized[-1]), "ds": ds, "inner_gap": sol.gap})
    return tr


def _project(J, v):
    return v - nullspace_component(J, v)


def _explicit_init(cfg, f):
    J = cfg.functional
    u = J.graph.check(f).copy()
    u[J.constraint] = 0.0
    u = _project(J, u)
    n = np.linalg.norm(u)
    if n == 0.0:
        raise DegenerateInputError("initial datum lies in the nullspace")
    u = u / n
    dt = cfg.dt if cfg.dt is not None else 1e-3 / rayleigh(J, u)
    return J, u, dt


def fagp_velocity(J: Functional, u) -> np.ndarray:
    """``R(u) q - zeta`` with ``q = u / ||u||``, ``R = alpha J / ||u||``."""
    nu = np.linalg.norm(u)
    zeta = subgradient(J, u)
    return J.alpha * evaluate(J, u) / nu * (u / nu) - zeta


def run_fagp(cfg: FlowConfig, f) -> FlowTrace:
    """Explicit Euler for ``u' = R(u) q - zeta`` without renormalisation."""
    J, u, dt = _explicit_init(cfg, f)
    tr = FlowTrace(dt=dt, alpha=J.alpha)
    tr.iterates.append(u.copy())
    for k in range(cfg.steps + 1):
        vel = fagp_velocity(J, u)
        tr.records.append(_record(J, u, k * dt, 0.0 * u, velocity=float(np.linalg.norm(vel))))
        if k == cfg.steps:
            break
        u = u + dt * vel
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > cfg.blowup:
            raise FlowBlowUpError(f"FAGP blew up at step {k + 1} (||u|| = {np.linalg.norm(u):.3g}); reduce dt")
        if cfg.store_iterates or k + 1 == cfg.steps:
            tr.iterates.append(u.copy())
    return tr


def nossek_velocity(J: Functional, v):
    """``r - eta / H_*(eta)`` and ``H_*(eta)`` for ``H = ||.||_2`` on the nullspace complement."""
    nv = np.linalg.norm(v)
    eta = subgradient(J, v)
    hstar = np.linalg.norm(_project(J, eta))
    if hstar <= 1e-14 * (1.0 + np.linalg.norm(eta)):
        raise FlowBlowUpError("H_*(eta) vanished; the flow reached the nullspace")
    return v / nv - eta / hstar, hstar


def run_nossek(cfg: FlowConfig, f) -> FlowTrace:
    """Explicit Euler for ``v' = r - eta / H_*(eta)``.

    Records the quotient ``<eta, v> / (H(v) H_*(eta))`` (``= alpha J / (H H_*)``)
    and, with ``reparametrize``, the time ``t`` of the equivalent FAGP-type
    flow obtained from ``phi' = alpha J(v(phi)) / H(v(phi))``, integrated by
    Euler on the inverse map ``dt/ds = H / (alpha J)``.
    """
    J, v, ds = _explicit_init(cfg, f)
    tr = FlowTrace(dt=ds, alpha=J.alpha)
    tr.iterates.append(v.copy())
    t_fagp = 0.0
    for k in range(cfg.steps + 1):
        vel, hstar = nossek_velocity(J, v)
        H = np.linalg.norm(v)
        Jv = evaluate(J, v)
        rate = J.alpha * Jv / H
        rec = _record(J, v, k * ds, 0.0 * v, quotient=J.alpha * Jv / (H * hstar), ivp_rate=rate,
                      velocity=float(np.linalg.norm(vel)))
        if cfg.reparametrize:
            rec["t_reparam"] = t_fagp
        tr.records.append(rec)
        if k == cfg.steps:
            break
        v = v + ds * vel
        t_fagp += ds / rate
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) > cfg.blowup:
            raise FlowBlowUpError(f"Nossek flow blew up at step {k + 1}; reduce dt")
        if cfg.store_iterates or k + 1 == cfg.steps:
            tr.iterates.append(v.copy())
    return tr


def run_flow(cfg: FlowConfig, f) -> FlowTrace:
    return {"minmove": run_minmove, "ngf": run_normalized_gf, "fagp": run_fagp, "nossek": run_nossek}[cfg.kind](cfg, f)


@dataclass
class RescaledFlowReport:
    residuals: np.ndarray
    max_residual: float
    mean_residual: float


def rescaled_flow_check(trace: FlowTrace, J: Functional, alpha=None) -> RescaledFlowReport:
    """Residual of ``v' = alpha J(v) v - zeta(v)`` along a normalized-gradient-flow trace.

    Uses the implicit subgradient ``zeta = (u^k - u^{k+1}) / tau`` of the
    minimizing-movement step, rescaled by ``||u^{k+1} - f_bar||^(1-alpha)``
    to the normalized curve, and the rescaled time step
    ``ds = tau ||u^k - f_bar||^(alpha-2)``.
    """
    alpha = J.alpha if alpha is None else float(alpha)
    tau = trace.dt
    res = []
    for k in range(len(trace.normalized) - 1):
        u0, u1 = trace.iterates[k], trace.iterates[k + 1]
        w0, w1 = trace.normalized[k], trace.normalized[k + 1]
        d1 = trace.records[k + 1]["norm"]
        ds = trace.records[k + 1]["ds"]
        zeta_w = (u0 - u1) / tau * d1 ** (1.0 - alpha)
        rhs = alpha * evaluate(J, w1) * w1 - zeta_w
        res.append(np.linalg.norm((w1 - w0) / ds - rhs))
    res = np.asarray(res)
    if res.size == 0:
        return RescaledFlowReport(res, 0.0, 0.0)
    return RescaledFlowReport(res, float(res.max()), float(res.mean()))


def mm_power_equivalence(J: Functional, f, taus, inner_tol=1e-8):
    """Normalized minimizing movements versus the power method with ``sigma^k = tau^k ||u^k - f_bar||^(alpha-2)``.

    Returns ``(w_mm, w_power, max_deviation)`` with the iterate lists.
    """
    J.graph.check(f)
    u = np.asarray(f, dtype=float).copy()
    fbar = nullspace_component(J, u)
    alpha = J.alpha
    sigmas, w_mm = [], [(u - fbar) / np.linalg.norm(u - fbar)]
    for tau in taus:
        sigmas.append(tau * np.linalg.norm(u - fbar) ** (alpha - 2.0))
        u = solve_prox(ProxProblem(u, tau, J, 2, None, inner_tol)).u
        w_mm.append((u - fbar) / np.linalg.norm(u - fbar))
    cfg = PowerConfig(J, data_p=2, max_iter=len(taus), sigmas=sigmas, inner_tol=inner_tol,
                      angle_tol=1e-300, rq_stall_tol=1e-300, store_iterates=True)
    _, trace = run_power(cfg, f)
    w_pw = trace.iterates
    n = min(len(w_mm), len(w_pw))
    dev = max(float(np.linalg.norm(a - b)) for a, b in zip(w_mm[:n], w_pw[:n]))
    return w_mm, w_pw, dev


__all__ = [
    "FlowConfig", "FlowTrace", "FlowBlowUpError", "run_minmove", "run_normalized_gf", "run_fagp",
    "run_nossek", "run_flow", "rescaled_flow_check", "RescaledFlowReport", "mm_power_equivalence",
    "fagp_velocity", "nossek_velocity", "FLOW_KINDS",
]
