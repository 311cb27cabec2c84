"""Proximal power method ``u <- prox(u) / ||prox(u)||`` with diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (
    INFEASIBLE, DegenerateInputError, Functional, evaluate, nullspace_component, rayleigh,
)
from .graph import NormKind, norm as _norm
from .prox import ExtinctionError, ProxProblem, extinction_bounds, solve_prox

log = logging.getLogger(__name__)

RULES = ("constant", "variable")


@dataclass
class PowerConfig:
    """Settings of one power-method run.

    ``data_norm`` defaults to the normalisation norm, so the data term and
    the Rayleigh quotient live in the same space. ``sigmas`` overrides the
    parameter rule with an explicit schedule (one value per iteration).
    ``project_nullspace=False`` keeps the nullspace component of the
    iterates, which is what positivity preservation is stated for.
    """

    functional: Functional
    data_p: int = 2
    norm: NormKind | str = NormKind.L2
    data_norm: NormKind | str | None = None
    rule: str = "variable"
    c: float = 0.5
    max_iter: int = 100
    angle_tol: float = 1e-6
    affinity_tol: float = 1e-4
    rq_stall_tol: float = 1e-10
    stall_window: int = 5
    ext_eps: float | None = None
    inner_tol: float = 1e-8
    inner_max_iter: int = 50000
    project_nullspace: bool = True
    sigmas: list | None = None
    store_iterates: bool = False

    def __post_init__(self):
        self.norm = NormKind.parse(self.norm)
        self.data_norm = self.norm if self.data_norm is None else NormKind.parse(self.data_norm)
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        if self.data_p not in (1, 2):
            raise ValueError("data_p must be 1 or 2")
        for name in ("angle_tol", "affinity_tol", "rq_stall_tol", "inner_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def hilbert(self) -> bool:
        return self.data_p == 2 and self.norm is NormKind.L2 and self.data_norm is NormKind.L2

    def to_dict(self) -> dict:
        return {
            "functional": self.functional.to_dict(), "data_p": self.data_p, "norm": self.norm.name.lower(),
            "data_norm": self.data_norm.name.lower(), "rule": self.rule, "c": self.c,
            "max_iter": self.max_iter, "angle_tol": self.angle_tol, "affinity_tol": self.affinity_tol,
            "rq_stall_tol": self.rq_stall_tol, "stall_window": self.stall_window, "ext_eps": self.ext_eps,
            "inner_tol": self.inner_tol, "inner_max_iter": self.inner_max_iter,
            "project_nullspace": self.project_nullspace,
        }


@dataclass
class PowerTrace:
    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, key) -> np.ndarray:
        return np.array([np.nan if r[key] is None else r[key] for r in self.records], dtype=float)


@dataclass
class EigenResult:
    u: np.ndarray
    lam: float
    mu: float
    sigma: float
    residual: float
    iterations: int
    converged: bool
    u_half: np.ndarray = field(repr=False, default=None)
    stop_reason: str = ""


def step_sizes(rule, c, J_history) -> float:
    """``sigma^k`` from the constant (``c / J(u^0)``) or variable (``c / J(u^k)``) rule."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if not J_history:
        raise ValueError("empty energy history")
    J = J_history[0] if rule == "constant" else J_history[-1]
    if J is INFEASIBLE or not J > 0:
        raise DegenerateInputError("step size needs J(u) > 0")
    return c / J


def angle_metric(u_half, u_prev, p=2, norm=NormKind.L2):
    """``||u_half - u_prev||^p - | ||u_half|| - 1 |^p`` and, for the Hilbert case, the cosine."""
    kind = NormKind.parse(norm)
    u_half = np.asarray(u_half, dtype=float)
    u_prev = np.asarray(u_prev, dtype=float)
    nh = _norm(u_half, kind)
    if nh == 0.0:
        raise DegenerateInputError("u_half is zero")
    metric = _norm(u_half - u_prev, kind) ** p - abs(nh - 1.0) ** p
    cos = None
    if p == 2 and kind is NormKind.L2:
        cos = float(np.dot(u_half, u_prev) / (nh * np.linalg.norm(u_prev)))
    return max(metric, 0.0) if metric > -1e-15 else metric, cos


def affinity(u_prev, u_half, sigma, J: Functional) -> float:
    """``||zeta||^2 / J(zeta)`` with ``zeta = (u_prev - u_half) / sigma``."""
    if not J.one_homogeneous:
        raise ValueError("affinity is defined for absolutely 1-homogeneous energies")
    zeta = (np.asarray(u_prev, dtype=float) - np.asarray(u_half, dtype=float)) / sigma
    Jz = evaluate(J, zeta)
    if Jz is INFEASIBLE:
        raise ValueError("zeta violates the constraint set")
    if Jz <= 1e-300 or not np.any(zeta):
        raise ExtinctionError("zeta vanishes; affinity undefined")
    return float(np.dot(zeta, zeta) / Jz)


def _prepare_init(J: Functional, u0, cfg: PowerConfig):
    u = J.graph.check(u0).copy()
    u[J.constraint] = 0.0
    if cfg.project_nullspace:
        u = u - nullspace_component(J, u)
    nu = _norm(u, cfg.norm)
    r = u - nullspace_component(J, u)
    if nu == 0.0 or _norm(r, cfg.norm) <= 1e-14 * max(nu, 1e-300):
        raise DegenerateInputError("initial field lies in the nullspace of J")
    return u / nu


def run_power(cfg: PowerConfig, u0):
    """Run the proximal power method from ``u0``.

    Returns ``(EigenResult, PowerTrace)``. Trace record ``k`` describes the
    step from ``u^k`` to ``u^{k+1}``; ``rayleigh`` is the quotient at
    ``u^k`` and ``rayleigh_half`` at ``u^{k+1/2}``.
    """
    J = cfg.functional
    u = _prepare_init(J, u0, cfg)
    eps = cfg.ext_eps if cfg.ext_eps is not None else 1e-8 * _norm(u, cfg.norm)
    alpha = J.alpha
    J_hist = [evaluate(J, u)]
    trace = PowerTrace()
    if cfg.store_iterates:
        trace.iterates.append(u.copy())
    R = rayleigh(J, u, norm=cfg.norm)
    converged, reason = False, "max_iter"
    stall = 0
    sigma = mu = math.nan
    u_half = u
    k = 0
    for k in range(cfg.max_iter):
        if cfg.sigmas is not None:
            sigma = float(cfg.sigmas[k])
        else:
            sigma = step_sizes(cfg.rule, cfg.c, J_hist)
        sol = solve_prox(ProxProblem(u, sigma, J, cfg.data_p, cfg.data_norm, cfg.inner_tol, cfg.inner_max_iter))
        if not sol.converged:
            log.warning("inner prox at k=%d stopped with gap %.2e", k, sol.gap)
        u_half = sol.u
        if cfg.project_nullspace:
            u_half = u_half - nullspace_component(J, u_half)
        resid = u_half - nullspace_component(J, u_half)
        if _norm(resid, cfg.norm) < eps:
            lower, _ = extinction_bounds(u, J, cfg.data_p, norm=cfg.data_norm)
            raise ExtinctionError(
                f"prox step at k={k} with sigma={sigma:.6g} reached the nullspace; reduce sigma "
                f"below the extinction threshold (lower bound {lower:.6g})",
                sigma=sigma, sigma_dstar_lower=lower, trace=trace)
        mu = _norm(u_half, cfg.norm)
        angle, cos = angle_metric(u_half, u, cfg.data_p, cfg.norm)
        aff = affinity(u, u_half, sigma, J) if (cfg.hilbert and J.one_homogeneous and np.any(u != u_half)) else None
        R_half = rayleigh(J, u_half, norm=cfg.norm)
        u_next = u_half / mu
        trace.records.append({
            "k": k, "sigma": sigma, "J": J_hist[-1], "rayleigh": R, "rayleigh_half": R_half,
            "angle": angle, "cos": cos, "affinity": aff, "mu": mu,
            "min_entry": float(u_next.min()), "inner_iters": sol.iters, "inner_gap": sol.gap,
        })
        stall = stall + 1 if abs(R_half - R) <= cfg.rq_stall_tol * max(1.0, abs(R)) else 0
        u = u_next
        J_hist.append(evaluate(J, u))
        R = R_half
        if cfg.store_iterates:
            trace.iterates.append(u.copy())
        if angle <= cfg.angle_tol and (aff is None or aff >= 1.0 - cfg.affinity_tol):
            converged, reason = True, "angle"
            break
        if stall >= cfg.stall_window:
            converged, reason = True, "rayleigh_stall"
            break
    lam = rayleigh(J, u, norm=cfg.norm)
    res = EigenResult(u=u, lam=lam, mu=mu, sigma=sigma, residual=math.nan, iterations=len(trace),
                      converged=converged, u_half=u_half, stop_reason=reason)
    if cfg.hilbert:
        res.residual = _eigen_residual(res, alpha)
    return res, trace


def lambda_from_mu(mu, sigma, data_p=2, alpha=1.0) -> float:
    """Eigenvalue implied by ``mu u in prox_{sigma J}(u)``.

    ``(1 - mu) |1 - mu|^(p-2) / (sigma mu^(alpha-1))``.
    """
    d = 1.0 - mu
    return d * abs(d) ** (data_p - 2) / (sigma * mu ** (alpha - 1.0)) if d != 0 else 0.0


def _eigen_residual(res: EigenResult, alpha) -> float:
    # zeta in dJ(u_half) = mu^(alpha-1) dJ(u) by optimality of the last prox step
    u_prev = res.u_half / res.mu
    zeta = (u_prev - res.u_half) / (res.sigma * res.mu ** (alpha - 1.0))
    return float(np.linalg.norm(res.lam * res.u - zeta))


@dataclass
class Certificate:
    certified: bool
    lam_rayleigh: float
    lam_mu: float
    residual: float
    subgradient_violation: float
    reason: str = ""


def certify(result: EigenResult, J: Functional, data_p=2, residual_tol=1e-6, samples=100, seed=0) -> Certificate:
    """Check ``lam u* in dJ(u*)`` from the last prox step (Hilbert case only)."""
    if data_p != 2:
        return Certificate(False, result.lam, math.nan, math.nan, math.nan,
                           "only the Hilbert case data_p = 2 certifies subdifferential eigenvectors")
    alpha = J.alpha
    u = result.u
    u_prev = result.u_half / result.mu
    zeta = (u_prev - result.u_half) / (result.sigma * result.mu ** (alpha - 1.0))
    lam_mu = lambda_from_mu(result.mu, result.sigma, 2, alpha)
    residual = float(np.linalg.norm(result.lam * u - zeta))
    rng = np.random.default_rng(seed)
    Ju = evaluate(J, u)
    worst = 0.0
    for _ in range(samples):
        v = u + rng.standard_normal(u.size)
        v[J.constraint] = 0.0
        worst = max(worst, Ju + float(np.dot(zeta, v - u)) - evaluate(J, v))
    ok = residual <= residual_tol and worst <= 1e-6 * (1.0 + Ju)
    return Certificate(bool(ok), result.lam, lam_mu, residual, worst,
                       "" if ok else "eigen-residual or subgradient inequality above tolerance")


def positivity_guard(trace: PowerTrace, tol=1e-10) -> bool:
    """True iff no recorded iterate has an entry below ``-tol``."""
    mins = [r["min_entry"] for r in trace.records]
    if trace.iterates:
        mins.append(float(trace.iterates[0].min()))
    return bool(all(m >= -tol for m in mins))


def rayleigh_monotone(trace: PowerTrace, slack: float) -> bool:
    """Half-step Rayleigh quotients never increase by more than ``slack``."""
    R = [trace.records[0]["rayleigh"]] + [r["rayleigh_half"] for r in trace.records]
    return bool(all(b <= a + slack for a, b in zip(R, R[1:])))


__all__ = [
    "PowerConfig", "PowerTrace", "EigenResult", "Certificate", "run_power", "step_sizes",
    "angle_metric", "affinity", "certify", "positivity_guard", "rayleigh_monotone", "lambda_from_mu",
]
