"""Command-line front end: parse, classify, verify, multivar, campaign.

Exit codes: 0 success (certified / all bounds hold / no violations),
1 usage or input error, 2 refuted or violated, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .bounds import (THEOREMS, ALIASES, BoundEvaluation, ParameterError, canonical_theorem,
                     needs_params, verify)
from .expr import (BinOp, Call, Const, ExprError, ExprSyntaxError, Neg, NonDifferentiableError,
                   Var, parse)
from .harness import CampaignConfig, ConfigError, run_campaign
from .invex import (CLASSES, EtaMap, InvexDomain, NotInvexError, PositivityError,
                    ScalarFunction, classify)
from .multivar import (CertificationError, ConditionCError, PathError, parse_function,
                       parse_point, verify_multivar)
from .report import TRIALS_COLUMNS, VERIFY_COLUMNS, csv_text, dumps, report_document, trials_rows

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ast(node) -> dict:
    if isinstance(node, Const):
        return {"const": node.value}
    if isinstance(node, Var):
        return {"var": node.name}
    if isinstance(node, Neg):
        return {"neg": _ast(node.arg)}
    if isinstance(node, BinOp):
        return {"op": node.op, "left": _ast(node.left), "right": _ast(node.right)}
    if isinstance(node, Call):
        return {"call": node.name, "args": [_ast(a) for a in node.args]}
    raise TypeError(type(node).__name__)


def _emit(text: str):
    sys.stdout.write(text)
    sys.stdout.flush()


def _verdict_code(verdicts) -> int:
    if "violated" in verdicts:
        return EXIT_VIOLATED
    if "inconclusive" in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ------------------------------------------------------------ subcommands

def cmd_parse(args) -> int:
    names = [v.strip() for v in args.vars.split(",") if v.strip()]
    e = parse(args.expr, names)
    derivatives = {}
    for name in names:
        try:
            derivatives[name] = str(e.differentiate(name))
        except NonDifferentiableError as exc:
            derivatives[name] = None
            print(f"warning: d/d{name}: {exc}", file=sys.stderr)
    doc = report_document(
        {"subcommand": "parse"}, {"expr": args.expr, "vars": names},
        summary={"ast": _ast(e.root), "rendered": str(e), "derivatives": derivatives})
    _emit(dumps(doc))
    return EXIT_OK


def cmd_classify(args) -> int:
    lo, hi = args.domain
    if not lo < hi:
        raise UsageError("--domain needs lo < hi")
    f = ScalarFunction.from_source(args.f)
    eta = EtaMap.from_source(args.eta)
    domain = InvexDomain.interval(lo, hi, eta)
    inputs = {"f": args.f, "eta": args.eta, "domain": [lo, hi], "target": args.target,
              "grid": args.grid, "t_grid": args.t_grid, "tol": args.tol}
    try:
        cert = classify(f.value, domain, args.target, args.grid, args.t_grid, args.tol)
    except (NotInvexError, PositivityError) as exc:
        record = {"target": args.target, "class": "none", "worst_margin": None,
                  "witness": getattr(exc, "witness", None), "reason": str(exc)}
        _emit(dumps(report_document({"subcommand": "classify"}, inputs, [record],
                                    summary={"certified": False})))
        return EXIT_VIOLATED
    _emit(dumps(report_document({"subcommand": "classify"}, inputs, [cert.to_dict()],
                                summary={"certified": cert.certified})))
    return EXIT_OK if cert.certified else EXIT_VIOLATED


def _theorem_list(raw: Sequence[str]) -> list:
    names = [t.strip() for item in raw for t in item.split(",") if t.strip()]
    if not names:
        raise UsageError("--theorems must name at least one theorem")
    try:
        return [canonical_theorem(t) for t in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _eval_row(ev: BoundEvaluation) -> dict:
    d = ev.to_dict()
    d["key"] = ev.key
    d["classification"] = None
    return d


def cmd_verify(args) -> int:
    theorems = _theorem_list(args.theorems)
    for th in theorems:
        used = needs_params(th)
        if used == ("p",) and args.p is None:
            raise UsageError(f"{th} needs --p")
        if used == ("q",) and args.q is None:
            raise UsageError(f"{th} needs --q")
        if len(used) == 2 and args.p is None and args.q is None:
            raise UsageError(f"{th} needs --p or --q")
    f = ScalarFunction.from_source(args.f)
    eta = EtaMap.from_source(args.eta)
    evaluations = [verify(th, f, eta, args.a, args.b, args.p, args.q, tol=args.tol, tau=args.tau)
                   for th in theorems]
    rows = [_eval_row(ev) for ev in evaluations]
    if args.out == "csv":
        _emit(csv_text(VERIFY_COLUMNS, [dict(r, theorem=r["key"]) for r in rows]))
    else:
        inputs = {"f": args.f, "eta": args.eta, "a": args.a, "b": args.b, "theorems": theorems,
                  "p": args.p, "q": args.q, "tol": args.tol, "tau": args.tau}
        verdicts = [r["verdict"] for r in rows]
        summary = {v: verdicts.count(v) for v in ("holds", "violated", "inconclusive")}
        _emit(dumps(report_document({"subcommand": "verify"}, inputs, [], rows, summary)))
    return _verdict_code([ev.verdict for ev in evaluations])


def cmd_multivar(args) -> int:
    x, y = parse_point(args.x), parse_point(args.y)
    if x.shape != y.shape:
        raise UsageError("--x and --y need the same dimension")
    dim = x.size
    f = parse_function(args.f, dim)
    eta = EtaMap.from_source(args.eta, dim)
    ev = verify_multivar(args.theorem, f, x, y, eta, args.a, args.b, args.p, args.q,
                         tol=args.tol, tau=args.tau, grid=args.grid,
                         require_certificate=not args.no_certify)
    row = _eval_row(ev)
    certs = [row["details"].pop("certificate")] if "certificate" in row["details"] else []
    inputs = {"f": args.f, "x": x.tolist(), "y": y.tolist(), "eta": args.eta, "a": args.a,
              "b": args.b, "theorem": args.theorem, "p": args.p, "q": args.q}
    _emit(dumps(report_document({"subcommand": "multivar"}, inputs, certs, [row],
                                {"verdict": ev.verdict})))
    return _verdict_code([ev.verdict])


def cmd_campaign(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    config = CampaignConfig.from_dict(raw)
    result = run_campaign(config)
    os.makedirs(args.out, exist_ok=True)
    doc = report_document({"subcommand": "campaign", "config": os.path.basename(args.config)},
                          config.to_dict(), summary=result.summary)
    _write(os.path.join(args.out, "summary.json"), dumps(doc))
    _write(os.path.join(args.out, "trials.csv"), csv_text(TRIALS_COLUMNS, trials_rows(result.reports)))
    _write(os.path.join(args.out, "trials.jsonl"),
           "".join(dumps(rep.to_dict(), indent=0).replace("\n", "") + "\n" for rep in result.reports))
    _emit(dumps({"violations": result.summary["violations"], "trials": result.summary["trials"],
                 "out": args.out}))
    return EXIT_VIOLATED if result.summary["violations"] else EXIT_OK


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------- parser

def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError("need at least 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hhinvex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hhinvex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse an expression and print its AST and derivatives")
    p.add_argument("--expr", required=True)
    p.add_argument("--vars", required=True, help="comma-separated variable names")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("classify", help="certify or refute a generalized-convexity class")
    p.add_argument("--f", required=True, help="function of x")
    p.add_argument("--eta", required=True, help="eta(v, u) in v and u")
    p.add_argument("--domain", nargs=2, type=_finite, required=True, metavar=("LO", "HI"))
    p.add_argument("--target", choices=CLASSES, default="preinvex")
    p.add_argument("--grid", type=_positive_int, default=64)
    p.add_argument("--t-grid", type=_positive_int, default=33)
    p.add_argument("--tol", type=_finite, default=1e-9)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="evaluate bounds on [a, a + eta(b, a)]")
    p.add_argument("--f", required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--a", type=_finite, required=True)
    p.add_argument("--b", type=_finite, required=True)
    p.add_argument("--theorems", nargs="+", required=True,
                   help=f"ids from {', '.join(THEOREMS)} (alias {', '.join(ALIASES)})")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.add_argument("--tol", type=_finite, default=1e-10)
    p.add_argument("--tau", type=_finite, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("multivar", help="eta-path bounds in R^n")
    p.add_argument("--f", required=True, help="function of z1..zn")
    p.add_argument("--x", required=True, help="comma-separated point")
    p.add_argument("--y", required=True, help="comma-separated point")
    p.add_argument("--eta", required=True, help="n components in v1..vn, u1..un")
    p.add_argument("--a", type=_finite, required=True)
    p.add_argument("--b", type=_finite, required=True)
    p.add_argument("--theorem", choices=("Eq1", "Eq2"), default="Eq1")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--grid", type=_positive_int, default=33)
    p.add_argument("--no-certify", action="store_true",
                   help="skip the eta-path log-preinvexity certificate")
    p.add_argument("--tol", type=_finite, default=1e-10)
    p.add_argument("--tau", type=_finite, default=1e-9)
    p.set_defaults(func=cmd_multivar)

    p = sub.add_parser("campaign", help="run a seeded randomized campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_campaign)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0, usage errors 1
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ExprSyntaxError as exc:
        print(f"hhinvex: parse error: {exc}", file=sys.stderr)
    except (UsageError, ConfigError, ParameterError, ExprError, PathError, ConditionCError,
            CertificationError, ValueError, ArithmeticError) as exc:
        print(f"hhinvex: error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
