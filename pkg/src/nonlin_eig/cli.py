"""Command line front end: ``nonlin-eig {prox,power,flow,gamma,bounds}``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure
(non-convergence, extinction, degenerate input) with a JSON diagnostic on
stderr. Every run writes a manifest with the resolved configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .flows import FlowBlowUpError, FlowConfig, run_flow
from .functionals import DegenerateInputError, InfeasibleError, nullspace_component
from .gamma import build_family, convergence_report, ground_state_per_level
from .graph import NormKind
from .io import (
    file_digest, load_functional, load_graph, read_field_csv, to_json, write_field_csv, write_jsonl,
)
from .power import PowerConfig, certify, run_power
from .prox import (
    ExtinctionError, ProxProblem, exact_reconstruction_bound, exact_reconstruction_time,
    extinction_bounds, solve_prox,
)

TRACE_KEYS = ["k", "sigma", "J", "rayleigh", "angle", "cos", "affinity", "mu", "min_entry"]
USAGE, NUMERIC = 2, 3


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, diag: dict):
        super().__init__(diag.get("message", ""))
        self.diag = diag


def random_init(graph, functional, seed):
    """Mean-zero (nullspace-free), unit-norm standard normal draw from PCG64(seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.standard_normal(graph.n)
    u[functional.constraint] = 0.0
    u = u - nullspace_component(functional, u)
    return u / np.linalg.norm(u)


def _load_inputs(args, inputs):
    try:
        g = load_graph(args.graph)
        inputs[args.graph] = file_digest(args.graph)
        J = load_functional(args.functional, g)
        inputs[args.functional] = file_digest(args.functional)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc
    return g, J


def _load_field(path, g, inputs):
    try:
        u = read_field_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if u.size != g.n:
        raise UsageError(f"{path}: field has {u.size} entries, graph has {g.n} vertices")
    inputs[path] = file_digest(path)
    return u


def cmd_prox(args, ctx):
    g, J = _load_inputs(args, ctx["inputs"])
    f = _load_field(args.input, g, ctx["inputs"])
    try:
        pb = ProxProblem(f, args.sigma, J, args.data_p, args.data_norm, args.tol, args.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sol = solve_prox(pb)
    cert = {"gap": sol.gap, "iters": sol.iters, "converged": sol.converged, "objective": sol.objective,
            "hit_exact_reconstruction": sol.hit_exact_reconstruction, "hit_extinction": sol.hit_extinction}
    write_field_csv(sol.u, args.out)
    ctx["outputs"].append(args.out)
    if args.cert:
        Path(args.cert).write_text(to_json(cert, indent=2) + "\n")
        ctx["outputs"].append(args.cert)
    print(to_json(cert))
    if not sol.converged:
        raise NumericalFailure({"error": "non_convergence", "message": "prox did not reach tol", **cert})
    if sol.hit_extinction and not sol.hit_exact_reconstruction and np.any(f - nullspace_component(J, f)):
        lower, _ = extinction_bounds(f, J, args.data_p, norm=pb.data_norm)
        raise NumericalFailure({"error": "extinction", "sigma": args.sigma, "sigma_dstar_lower": lower,
                                "message": "sigma is at or above the extinction threshold; reduce sigma"})


def _init_field(spec, g, J, ctx):
    if spec.startswith("random"):
        _, _, s = spec.partition(":")
        seed = int(s) if s else ctx["seed"]
        ctx["config"]["init_seed"] = seed
        return random_init(g, J, seed)
    return _load_field(spec, g, ctx["inputs"])


def cmd_power(args, ctx):
    g, J = _load_inputs(args, ctx["inputs"])
    try:
        cfg = PowerConfig(J, data_p=args.data_p, norm=args.norm, rule=args.rule, c=args.c,
                          max_iter=args.max_iter, inner_tol=args.inner_tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ctx["config"]["power"] = cfg.to_dict()
    u0 = _init_field(args.init, g, J, ctx)
    res, trace = run_power(cfg, u0)
    write_field_csv(res.u, args.out)
    ctx["outputs"].append(args.out)
    if args.trace:
        write_jsonl(trace.records, args.trace, TRACE_KEYS)
        ctx["outputs"].append(args.trace)
    summary = {"lambda": res.lam, "mu": res.mu, "sigma": res.sigma, "iterations": res.iterations,
               "converged": res.converged, "stop_reason": res.stop_reason, "residual": res.residual}
    if cfg.hilbert:
        c = certify(res, J, cfg.data_p)
        summary.update(certified=c.certified, lambda_from_mu=c.lam_mu)
    print(to_json(summary))
    if not res.converged:
        raise NumericalFailure({"error": "non_convergence", "message": "power method hit max_iter", **summary})


def cmd_flow(args, ctx):
    g, J = _load_inputs(args, ctx["inputs"])
    f = _init_field(args.input, g, J, ctx)
    try:
        cfg = FlowConfig(args.kind, J, dt=args.dt, steps=args.steps, data_p=args.data_p,
                         reparametrize=args.kind == "nossek")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tr = run_flow(cfg, f)
    if args.trace:
        recs = [dict(r, k=i) for i, r in enumerate(tr.records)]
        write_jsonl(recs, args.trace)
        ctx["outputs"].append(args.trace)
    final = tr.normalized[-1] if tr.normalized else tr.final
    if args.out:
        write_field_csv(final, args.out)
        ctx["outputs"].append(args.out)
    print(to_json({"steps": len(tr.records) - 1, "dt": tr.dt, "extinct": tr.extinct,
                   "final_rayleigh": tr.records[-1]["rayleigh"]}))


def cmd_gamma(args, ctx):
    try:
        fam_spec = json.loads(Path(args.family).read_text())
        fspec = json.loads(Path(args.functional).read_text())
        ctx["inputs"][args.family] = file_digest(args.family)
        ctx["inputs"][args.functional] = file_digest(args.functional)
        fam = build_family(fam_spec, fspec)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc
    power = {"data_p": args.data_p, "rule": args.rule, "max_iter": args.max_iter}
    ctx["config"]["power"] = power
    table = ground_state_per_level(fam, power, seed=ctx["seed"], workers=ctx["threads"])
    Path(args.out).write_text(table.to_csv())
    ctx["outputs"].append(args.out)
    out = {"rows": table.rows}
    if len(table.rows) >= 3:
        rep = convergence_report(table)
        out.update(lambda_pass=rep.lambda_pass, distance_pass=rep.distance_pass)
        for line in rep.lines():
            print(line, file=sys.stderr)
    print(to_json(out))


def cmd_bounds(args, ctx):
    g, J = _load_inputs(args, ctx["inputs"])
    f = _load_field(args.input, g, ctx["inputs"])
    norm = NormKind.parse(args.norm)
    if args.lambda1 is not None and not args.lambda1 > 0:
        raise UsageError("--lambda1 must be positive")
    out = {"sigma_star_upper": exact_reconstruction_bound(f, J, norm)}
    exact = exact_reconstruction_time(f, J, norm)
    if exact is not None:
        out["sigma_star_exact"] = exact
    lower, upper = extinction_bounds(f, J, args.data_p, lambda1=args.lambda1, norm=norm)
    out["sigma_dstar_lower"] = lower
    if upper is not None:
        out["sigma_dstar_upper"] = upper
    print(to_json(out))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (results do not depend on it)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for random initialisations")
    common.add_argument("--manifest", default=argparse.SUPPRESS, help="path of the run manifest JSON")

    p = argparse.ArgumentParser(prog="nonlin-eig", parents=[common],
                                description="Nonlinear eigenvectors via proximal power methods.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def graph_args(sp):
        sp.add_argument("--graph", required=True, help="TSV edge list or grid JSON")
        sp.add_argument("--functional", required=True, help="functional descriptor JSON")

    sp = sub.add_parser("prox", parents=[common], help="evaluate one p-proximal map")
    graph_args(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--data-p", type=int, choices=(1, 2), default=2)
    sp.add_argument("--data-norm", choices=("l1", "l2"), default=None)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=50000)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cert")
    sp.set_defaults(func=cmd_prox)

    sp = sub.add_parser("power", parents=[common], help="proximal power method")
    graph_args(sp)
    sp.add_argument("--init", default="random", help="CSV path or random[:seed]")
    sp.add_argument("--rule", choices=("constant", "variable"), default="variable")
    sp.add_argument("--c", type=float, default=0.5)
    sp.add_argument("--data-p", type=int, choices=(1, 2), default=2)
    sp.add_argument("--norm", choices=("l1", "l2"), default="l2")
    sp.add_argument("--max-iter", type=int, default=100)
    sp.add_argument("--inner-tol", type=float, default=1e-8)
    sp.add_argument("--trace")
    sp.add_argument("--out", default="eigvec.csv")
    sp.set_defaults(func=cmd_power)

    sp = sub.add_parser("flow", parents=[common], help="simulate an eigenvector flow")
    graph_args(sp)
    sp.add_argument("--kind", choices=("fagp", "nossek", "minmove", "ngf"), required=True)
    sp.add_argument("--input", default="random", help="CSV path or random[:seed]")
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--data-p", type=int, choices=(1, 2), default=2)
    sp.add_argument("--trace")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_flow)

    sp = sub.add_parser("gamma", parents=[common], help="ground states over a refinement family")
    sp.add_argument("--family", required=True)
    sp.add_argument("--functional", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--data-p", type=int, choices=(1, 2), default=2)
    sp.add_argument("--rule", choices=("constant", "variable"), default="variable")
    sp.add_argument("--max-iter", type=int, default=300)
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("bounds", parents=[common], help="exact reconstruction and extinction bounds")
    graph_args(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--data-p", type=int, choices=(1, 2), default=2)
    sp.add_argument("--norm", choices=("l1", "l2", "linf"), default="l2")
    sp.add_argument("--lambda1", type=float, default=None)
    sp.set_defaults(func=cmd_bounds)
    return p


def _manifest_path(args):
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    out = getattr(args, "out", None)
    return Path(f"{out}.manifest.json") if out else Path("nonlin-eig-manifest.json")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    config = {k: v for k, v in vars(args).items() if k != "func"}
    ctx = {"seed": getattr(args, "seed", 0), "threads": getattr(args, "threads", 1),
           "inputs": {}, "outputs": [], "config": config}
    config.setdefault("seed", ctx["seed"])
    config.setdefault("threads", ctx["threads"])
    if ctx["threads"] < 1:
        parser.print_usage(sys.stderr)
        print("nonlin-eig: error: --threads must be positive", file=sys.stderr)
        return USAGE
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    code = 0
    try:
        args.func(args, ctx)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nonlin-eig: error: {exc}", file=sys.stderr)
        code = USAGE
    except NumericalFailure as exc:
        print(to_json(exc.diag), file=sys.stderr)
        code = NUMERIC
    except ExtinctionError as exc:
        print(to_json({"error": "extinction", "message": str(exc), "sigma": exc.sigma,
                       "sigma_dstar_lower": exc.sigma_dstar_lower}), file=sys.stderr)
        code = NUMERIC
    except (DegenerateInputError, InfeasibleError, FlowBlowUpError) as exc:
        print(to_json({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        code = NUMERIC
    manifest = {
        "subcommand": args.command, "config": config, "seed": ctx["seed"], "inputs": ctx["inputs"],
        "outputs": ctx["outputs"], "started": started, "wall_clock": time.perf_counter() - t0,
        "version": __version__, "exit_code": code,
    }
    _manifest_path(args).write_text(to_json(manifest, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
