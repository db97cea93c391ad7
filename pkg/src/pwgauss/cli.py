"""Command-line driver: ``pwgauss {gen,interp,sweep,rate,selftest}``.

Exit codes: 0 success (or rate verdict true), 1 usage or configuration
error, 2 hypothesis violation, 3 numerical failure, 4 rate verdict false.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, config, geometry, kernel, nodes, pwspace, selftest
from .errors import HypothesisViolation, PWGaussError, SizeCapExceeded
from .interpolator import build_from_samples, build_interpolant, interp_eval

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3
EXIT_VERDICT_FALSE = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for hypothesis violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _setup(args) -> tuple:
    cfg = config.load(args.config) if args.config else config.resolve({})
    if args.out is not None:
        cfg["output_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise config.ConfigError("--threads must be >= 1")
        cfg["threads"] = args.threads
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return cfg, out


def _warn_hypotheses(cfg) -> list:
    if cfg["function"]["kind"] == "samples":
        return []
    msgs = config.hypothesis_warnings(config.domain_of(cfg), float(cfg["function"]["beta"]),
                                      cfg["nodes"]["kind"])
    for m in msgs:
        _log(f"warning: {m}")
    return msgs


def _node_file(cfg, out: Path) -> nodes.NodeSet:
    path = Path(cfg["nodes"]["file"]) if cfg["nodes"]["file"] else out / "nodes.csv"
    if not path.exists():
        raise config.ConfigError(f"node file {path} not found (run 'pwgauss gen' first)")
    return nodes.read_nodes(path)


def cmd_gen(args) -> int:
    cfg, out = _setup(args)
    if cfg["nodes"]["kind"] == "file":
        raise config.ConfigError("gen builds lattice or kadec nodes; node kind is 'file'")
    nd = config.recipe_of(cfg).build()
    nodes.write_nodes(nd, out / "nodes.csv")
    print(f"N = {len(nd)}")
    print(f"q = {nodes.separation(nd):.17g}")
    return EXIT_OK


def cmd_interp(args) -> int:
    cfg, out = _setup(args)
    lam = args.lam if args.lam is not None else cfg["lambda"]
    if lam is None:
        raise config.ConfigError("interp needs --lambda or a 'lambda' config entry")
    lam = float(lam)
    if not lam > 0:
        raise config.ConfigError("lambda must be positive")
    nd = _node_file(cfg, out)
    if nd.dim != int(cfg["domain"]["dim"]):
        raise config.ConfigError(f"node file is {nd.dim}-d but domain.dim is {cfg['domain']['dim']}")
    _warn_hypotheses(cfg)
    fn = cfg["function"]
    if fn["kind"] == "samples":
        values = fn["values"]
        if values is None or len(values) != len(nd):
            raise config.ConfigError(f"function.values must list {len(nd)} samples")
        samples = np.asarray(values, dtype=float)
        interp = build_from_samples(nd, lam, samples)
    else:
        f = config.function_of(cfg)
        if not pwspace.support_in(f, config.domain_of(cfg)):
            raise HypothesisViolation("function spectrum is not contained in the domain Z")
        interp = build_interpolant(f, nd, lam)
        samples = pwspace.pw_eval(f, nd.points)
    nodes_ref = str(Path(cfg["nodes"]["file"]).resolve()) if cfg["nodes"]["file"] \
        else "nodes.csv"
    interp.save(out / "interpolant.json", nodes_ref)
    node_err = float(np.max(np.abs(interp_eval(interp, nd.points) - samples)))
    report = {"lambda": lam, "N": len(nd), "node_max_error": node_err}
    report.update(interp.diagnostics.to_dict())
    (out / "residual.json").write_text(json.dumps(report, indent=2) + "\n")
    if cfg["dump_gram"]:
        kernel.write_gram(kernel.assemble_gram(kernel.GaussianKernel(lam, nd.dim), nd),
                          out / "gram.bin")
    print(f"N = {len(nd)}  lambda = {lam:g}  residual_inf = {report['residual_inf']:.3e}  "
          f"cond_est = {report['condition_estimate']:.3e}")
    return EXIT_OK


def _rate_payload(reports, cfg, warnings_, extra=None) -> tuple:
    dom = config.domain_of(cfg)
    delta = geometry.inscribed_delta(dom)
    beta = float(cfg["function"]["beta"])
    tol = float(cfg["rate_tolerance"])
    sup_fit = analysis.fit_rate(reports, delta, beta, "sup_error", tol)
    payload = sup_fit.to_dict()
    try:
        payload["l2_fit"] = analysis.fit_rate(reports, delta, beta, "l2_error", tol).to_dict()
    except ValueError as exc:
        payload["l2_fit"] = {"error": str(exc)}
    payload["delta"] = delta
    payload["beta"] = beta
    payload["beyond_theorem"] = bool(warnings_)
    payload["warnings"] = list(warnings_)
    if extra:
        payload.update(extra)
    return sup_fit, payload


def _print_fit(fit) -> None:
    print(f"slope = {fit.slope:.6g}  theoretical = {fit.theoretical_exponent:.6g}  "
          f"r^2 = {fit.r_squared:.6g}  verdict = {str(fit.verdict).lower()}")


def cmd_sweep(args) -> int:
    cfg, out = _setup(args)
    warns = _warn_hypotheses(cfg)
    if cfg["function"]["kind"] == "samples":
        raise config.ConfigError("sweep needs a bandlimited function, not raw samples")
    f = config.function_of(cfg)
    dom = config.domain_of(cfg)
    lambdas = [float(v) for v in cfg["lambdas"]]
    if len(lambdas) < 4:
        raise config.ConfigError("sweep needs at least 4 lambda values")
    if any(not v > 0 for v in lambdas):
        raise config.ConfigError("lambda values must be positive")
    tr = cfg["truncation"]
    kw = dict(density=cfg["grid_density"], n_points=int(cfg["quadrature_points"]),
              threads=int(cfg["threads"]))
    extra = {}
    if cfg["nodes"]["kind"] == "file":
        nd = _node_file(cfg, out)
        reports = analysis.lambda_sweep(f, nd, lambdas, dom, cfg["window"], **kw)
    else:
        recipe = config.recipe_of(cfg)
        if not tr["enabled"]:
            reports = analysis.lambda_sweep(f, recipe, lambdas, dom, cfg["window"], **kw)
        elif tr["base_radius"] is not None or not tr["certify"]:
            base = tr["base_radius"] if tr["base_radius"] is not None \
                else tr["start_spacings"] * recipe.spacing
            policy = analysis.TruncationPolicy(float(base), float(tr["c"]))
            reports = analysis.lambda_sweep(f, recipe, lambdas, dom, cfg["window"], policy, **kw)
            extra["truncation_radius"] = float(base)
        else:
            reports, radius, rows = analysis.certified_sweep(
                f, recipe, lambdas, dom, float(tr["start_spacings"]), float(tr["c"]),
                float(tr["tolerance"]), int(tr["max_doublings"]), cfg["window"], **kw)
            analysis.write_truncation(rows, out / "truncation.csv")
            extra["truncation_radius"] = radius
    analysis.write_reports(reports, out / "errors.csv")
    for r in reports:
        if not r.ok:
            _log(f"warning: lambda={r.lam:g} {r.status}")
    fit, payload = _rate_payload(reports, cfg, warns, extra)
    (out / "ratefit.json").write_text(json.dumps(payload, indent=2) + "\n")
    _print_fit(fit)
    return EXIT_OK if fit.verdict else EXIT_VERDICT_FALSE


def cmd_rate(args) -> int:
    cfg, out = _setup(args)
    path = out / "errors.csv"
    if not path.exists():
        raise config.ConfigError(f"{path} not found (run 'pwgauss sweep' first)")
    reports = analysis.read_reports(path)
    warns = _warn_hypotheses(cfg)
    fit, payload = _rate_payload(reports, cfg, warns)
    (out / "ratefit.json").write_text(json.dumps(payload, indent=2) + "\n")
    _print_fit(fit)
    return EXIT_OK if fit.verdict else EXIT_VERDICT_FALSE


def cmd_selftest(args) -> int:
    results = selftest.run(args.inject_fault)
    failed = [name for name, ok, _ in results if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (JSON)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--threads", metavar="K", type=int, help="worker threads for sweeps")

    parser = _Parser(prog="pwgauss",
                     description="Gaussian interpolation of bandlimited functions in the "
                                 "flat limit: node generation, interpolation and rate sweeps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen", parents=[common], help="write the node set and its provenance") \
        .set_defaults(func=cmd_gen)
    p = sub.add_parser("interp", parents=[common], help="build one interpolant")
    p.add_argument("--lambda", dest="lam", metavar="F", type=float, help="kernel parameter")
    p.set_defaults(func=cmd_interp)
    sub.add_parser("sweep", parents=[common], help="lambda sweep, error table and rate fit") \
        .set_defaults(func=cmd_sweep)
    sub.add_parser("rate", parents=[common], help="refit the rate from an existing errors.csv") \
        .set_defaults(func=cmd_rate)
    p = sub.add_parser("selftest", help="run the invariant suite at small scale")
    p.add_argument("--inject-fault", choices=selftest.FAULTS, default=None,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HypothesisViolation as exc:
        _log(f"hypothesis violation: {exc}")
        return EXIT_HYPOTHESIS
    except (config.ConfigError, SizeCapExceeded) as exc:
        _log(f"config error: {exc}")
        return EXIT_USAGE
    except PWGaussError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
