"""Seeded randomized campaigns over function families.

Each trial draws its own generator from ``SeedSequence([seed, trial])`` so
a trial can be replayed alone and the campaign result does not depend on
how trials are scheduled across worker processes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .bounds import (TAU_VERIFY, canonical_theorem, conjugate, needs_params, tight_kernel, verify)
from .expr import DomainError, ExprError
from .invex import (LOG_PREINVEX, PREINVEX, PREQUASIINVEX, EtaMap, GridSample,
                    InvexDomain, NotInvexError, PositivityError, ScalarFunction)
from .quadrature import DEFAULT_TOL

__all__ = [
    "FAMILIES", "ConfigError", "Tolerances", "FamilySpec", "CampaignConfig",
    "TrialReport", "CampaignResult", "sample_instance", "expand_theorems",
    "hypothesis_for", "run_trial", "run_campaign", "summarize",
    "search_counterexamples", "HIST_EDGES", "worker_count",
]

FAMILIES = ("poly-convex", "exp-affine", "exp-convex", "abs-kink", "custom-expression")
DEFAULT_P = (1.1, 1.5, 2.0, 3.0, 5.0, 10.0)
DEFAULT_Q = (1.0, 1.5, 2.0, 3.0, 5.0, 10.0)
HIST_EDGES = np.logspace(-12, 3, 65)
MAX_REJECTIONS = 100

# family -> default coefficient ranges
_RANGES = {
    "poly-convex": {"c": (0.1, 2.0), "alpha": (-2.0, 2.0), "beta": (-1.0, 1.0)},
    "exp-affine": {"alpha": (-3.0, 3.0), "beta": (-1.0, 1.0)},
    "exp-convex": {"c": (0.05, 1.0), "alpha": (-1.0, 1.0), "beta": (-1.0, 1.0)},
    "abs-kink": {"c": (0.1, 2.0), "alpha": (-1.0, 1.0), "beta": (-1.0, 1.0)},
    "custom-expression": {},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    quad: float = DEFAULT_TOL
    verify: float = TAU_VERIFY
    classify: float = 1e-9
    grid: int = 33
    t_grid: int = 13


@dataclass(frozen=True)
class FamilySpec:
    id: str
    expr: Optional[str] = None
    ranges: tuple = ()          # sorted (name, (lo, hi)) pairs overriding defaults
    positive: bool = False

    def range(self, name):
        return dict(self.ranges).get(name, _RANGES[self.id][name])


@dataclass(frozen=True)
class CampaignConfig:
    families: tuple
    theorems: tuple
    trials: int
    seed: int
    p_values: tuple = DEFAULT_P
    q_values: tuple = DEFAULT_Q
    domain: tuple = (-2.0, 2.0)
    eta: str = "v-u"
    tolerances: Tolerances = field(default_factory=Tolerances)
    interval: Optional[tuple] = None

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"families", "theorems", "trials", "seed", "p_values", "q_values",
                 "domain", "eta", "tolerances", "interval"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("families", "theorems", "trials", "seed"):
            if key not in d:
                raise ConfigError(f"missing required key {key!r}")
        families = tuple(_family(f) for f in _list(d, "families"))
        if not families:
            raise ConfigError("families must be non-empty")
        theorems = []
        for t in _list(d, "theorems"):
            try:
                theorems.append(canonical_theorem(str(t)))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not theorems:
            raise ConfigError("theorems must be non-empty")
        trials = d["trials"]
        seed = d["seed"]
        if not isinstance(trials, int) or isinstance(trials, bool) or trials < 0:
            raise ConfigError("trials must be a non-negative integer")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        p_values = tuple(float(p) for p in d.get("p_values", DEFAULT_P))
        q_values = tuple(float(q) for q in d.get("q_values", DEFAULT_Q))
        if any(not (p > 1 and math.isfinite(p)) for p in p_values):
            raise ConfigError("every p must be a finite real > 1")
        if any(not (q >= 1 and math.isfinite(q)) for q in q_values):
            raise ConfigError("every q must be a finite real >= 1")
        dom = d.get("domain", {"lo": -2.0, "hi": 2.0})
        try:
            domain = (float(dom["lo"]), float(dom["hi"]))
        except (TypeError, KeyError, ValueError):
            raise ConfigError("domain must be an object {lo, hi}") from None
        if not (math.isfinite(domain[0]) and math.isfinite(domain[1]) and domain[0] < domain[1]):
            raise ConfigError("domain needs finite lo < hi")
        eta = str(d.get("eta", "v-u"))
        try:
            EtaMap.from_source(eta)
        except ExprError as exc:
            raise ConfigError(f"bad eta: {exc}") from None
        tol = d.get("tolerances", {})
        if not isinstance(tol, dict) or set(tol) - {"quad", "verify", "classify", "grid", "t_grid"}:
            raise ConfigError("tolerances accepts quad, verify, classify, grid, t_grid")
        base = Tolerances()
        tolerances = Tolerances(
            quad=float(tol.get("quad", base.quad)), verify=float(tol.get("verify", base.verify)),
            classify=float(tol.get("classify", base.classify)),
            grid=int(tol.get("grid", base.grid)), t_grid=int(tol.get("t_grid", base.t_grid)))
        if not (tolerances.quad > 0 and tolerances.verify >= 0 and tolerances.classify >= 0):
            raise ConfigError("tolerances must be non-negative (quad positive)")
        if tolerances.grid < 3 or tolerances.t_grid < 3:
            raise ConfigError("grid and t_grid need at least 3 points")
        interval = d.get("interval")
        if interval is not None:
            try:
                interval = (float(interval[0]), float(interval[1]))
            except (TypeError, IndexError, ValueError):
                raise ConfigError("interval must be [a, b]") from None
        return cls(families, tuple(theorems), trials, seed, p_values, q_values, domain,
                   eta, tolerances, interval)

    def to_dict(self) -> dict:
        return {
            "families": [_family_dict(f) for f in self.families],
            "theorems": list(self.theorems), "trials": self.trials, "seed": self.seed,
            "p_values": list(self.p_values), "q_values": list(self.q_values),
            "domain": {"lo": self.domain[0], "hi": self.domain[1]}, "eta": self.eta,
            "tolerances": {"quad": self.tolerances.quad, "verify": self.tolerances.verify,
                           "classify": self.tolerances.classify, "grid": self.tolerances.grid,
                           "t_grid": self.tolerances.t_grid},
            "interval": list(self.interval) if self.interval else None,
        }


def _list(d, key):
    v = d[key]
    if not isinstance(v, list):
        raise ConfigError(f"{key} must be a list")
    return v


def _family(spec) -> FamilySpec:
    if isinstance(spec, str):
        spec = {"id": spec}
    if not isinstance(spec, dict) or "id" not in spec:
        raise ConfigError(f"bad family entry {spec!r}")
    fid = spec["id"]
    if fid not in FAMILIES:
        raise ConfigError(f"unknown family {fid!r}; expected one of {FAMILIES}")
    expr = spec.get("expr")
    if fid == "custom-expression" and not isinstance(expr, str):
        raise ConfigError("custom-expression needs an 'expr' string in x")
    if expr is not None:
        if not isinstance(expr, str):
            raise ConfigError("family 'expr' must be a string in x")
        try:
            ScalarFunction.from_source(expr)
        except ExprError as exc:
            raise ConfigError(f"bad custom expression: {exc}") from None
    ranges = spec.get("ranges", {})
    for name, r in ranges.items():
        if name not in _RANGES[fid] or len(r) != 2 or not r[0] <= r[1]:
            raise ConfigError(f"bad range {name!r} for family {fid!r}")
    return FamilySpec(fid, expr, tuple(sorted((k, (float(r[0]), float(r[1])))
                                              for k, r in ranges.items())),
                      bool(spec.get("positive", fid.startswith("exp"))))


def _family_dict(f: FamilySpec) -> dict:
    d = {"id": f.id}
    if f.expr is not None:
        d["expr"] = f.expr
    if f.ranges:
        d["ranges"] = {k: list(v) for k, v in f.ranges}
    return d


# ------------------------------------------------------------- instances

def _num(x: float) -> str:
    x = float(x)
    return repr(x) if x >= 0 else f"(-{repr(-x)})"


def sample_instance(family: FamilySpec, rng: np.random.Generator, domain: tuple) -> dict:
    """Draw one family member; returns its source text and coefficients."""
    lo, hi = domain
    u = lambda name: float(rng.uniform(*family.range(name)))
    fid = family.id
    if family.expr is not None:
        # a pinned member of the family
        return {"family": fid, "expr": family.expr, "coefficients": {}}
    if fid == "exp-affine":
        alpha, beta = u("alpha"), u("beta")
        return {"family": fid, "expr": f"exp({_num(alpha)}*x+{_num(beta)})",
                "coefficients": {"alpha": alpha, "beta": beta}}
    if fid == "exp-convex":
        c, s, alpha, beta = u("c"), float(rng.uniform(lo, hi)), u("alpha"), u("beta")
        return {"family": fid,
                "expr": f"exp({_num(c)}*(x-{_num(s)})^2+{_num(alpha)}*x+{_num(beta)})",
                "coefficients": {"c": c, "s": s, "alpha": alpha, "beta": beta}}
    if fid == "abs-kink":
        c, s, alpha, beta = u("c"), float(rng.uniform(lo, hi)), u("alpha"), u("beta")
        return {"family": fid,
                "expr": f"{_num(c)}*abs(x-{_num(s)})+{_num(alpha)}*x+{_num(beta)}",
                "coefficients": {"c": c, "s": s, "alpha": alpha, "beta": beta}}
    # poly-convex: positive multiples of even powers plus an affine part
    n_terms = int(rng.integers(1, 4))
    terms, coeffs = [], {}
    for k in range(n_terms):
        c, s = u("c"), float(rng.uniform(lo, hi))
        m = 2 * int(rng.integers(1, 3))
        terms.append(f"{_num(c)}*(x-{_num(s)})^{m}")
        coeffs.update({f"c{k}": c, f"s{k}": s, f"m{k}": m})
    alpha, beta = u("alpha"), u("beta")
    coeffs.update({"alpha": alpha, "beta": beta})
    terms.append(f"{_num(alpha)}*x+{_num(beta)}")
    return {"family": fid, "expr": "+".join(terms), "coefficients": coeffs}


def expand_theorems(theorems: Iterable[str], p_values, q_values) -> list:
    """(theorem, p, q) instances after applying the parameter sweep."""
    out = []
    for th in theorems:
        used = needs_params(th)
        if used == ("p",):
            out.extend((th, p, None) for p in p_values)
        elif used == ("q",):
            out.extend((th, None, q) for q in q_values)
        elif used:
            out.extend((th, *conjugate(p=p)) for p in p_values)
        else:
            out.append((th, None, None))
    return out


def hypothesis_for(theorem: str, p, q) -> tuple:
    """(subject, power, class, eta) that the theorem assumes.

    ``subject`` is ``"f"`` or ``"|f'|"``; ``eta`` is ``"config"`` or
    ``"canonical"`` (the classical results use v - u).
    """
    if theorem == "HHchain":
        return ("f", 1.0, PREINVEX, "config")
    if theorem == "T1.2":
        return ("|f'|", 1.0, PREINVEX, "canonical")
    if theorem == "T2.2":
        return ("|f'|", p / (p - 1.0), PREQUASIINVEX, "config")
    if theorem == "T2.3":
        return ("|f'|", 1.0, PREQUASIINVEX, "config")
    if theorem == "T3.1":
        return ("|f'|", 1.0, PREINVEX, "config")
    if theorem in ("T3.2", "T3.3"):
        return ("|f'|", p / (p - 1.0), PREINVEX, "config")
    if theorem in ("T3.4", "T3.5"):
        return ("|f'|", q, PREINVEX, "config")
    if theorem == "Tz":
        return ("|f'|", 1.0, LOG_PREINVEX, "config")
    if theorem == "Tfd":
        return ("|f'|", q, LOG_PREINVEX, "config")
    if theorem == "Cq":
        return ("|f'|", 1.0, LOG_PREINVEX, "canonical")
    if theorem == "Cq1":
        return ("|f'|", q, LOG_PREINVEX, "canonical")
    raise ValueError(theorem)


def _hyp_key(h) -> str:
    subject, power, cls, eta = h
    base = subject if power == 1.0 else f"{subject}^{power:.17g}"
    return f"{base} {cls} [{eta} eta]"


def _row_key(theorem, p, q) -> str:
    parts = [f"{k}={v:g}" for k, v in (("p", p), ("q", q)) if v is not None]
    return theorem + (f"[{','.join(parts)}]" if parts else "")


# ---------------------------------------------------------------- trials

@dataclass
class TrialReport:
    seed: int
    trial: int
    instance: dict
    certificates: dict
    evaluations: list
    failures: list
    skipped: Optional[str] = None

    def to_dict(self) -> dict:
        return {"seed": self.seed, "trial": self.trial, "instance": self.instance,
                "certificates": self.certificates, "evaluations": self.evaluations,
                "failures": self.failures, "skipped": self.skipped}


class _Certifier:
    def __init__(self, f: ScalarFunction, config: CampaignConfig):
        self.f = f
        self.config = config
        self.samples = {}
        self.results = {}

    def _sample(self, subject, eta_kind):
        key = (subject, eta_kind)
        if key not in self.samples:
            eta = EtaMap.canonical() if eta_kind == "canonical" else EtaMap.from_source(self.config.eta)
            domain = InvexDomain.interval(*self.config.domain, eta)
            g = self.f.value if subject == "f" else self.f.abs_derivative()
            tol = self.config.tolerances
            try:
                self.samples[key] = GridSample(g, domain, tol.grid, tol.t_grid)
            except (NotInvexError, DomainError) as exc:
                self.samples[key] = exc
        return self.samples[key]

    def certify(self, hyp) -> dict:
        if hyp in self.results:
            return self.results[hyp]
        subject, power, cls, eta_kind = hyp
        sample = self._sample(subject, eta_kind)
        if isinstance(sample, Exception):
            out = {"certified": False, "class": "none", "reason": str(sample)}
        else:
            try:
                cert = sample.certify(cls, power, self.config.tolerances.classify, refine=False,
                                     fallback=False)
                out = {"certified": cert.certified, "class": cert.cls,
                       "worst_margin": cert.worst_margin}
            except PositivityError as exc:
                out = {"certified": False, "class": "none", "reason": str(exc)}
        self.results[hyp] = out
        return out


def _scalar_memo(fn):
    """Cache scalar calls of a vectorized callable; arrays pass straight through."""
    seen = {}

    def call(x):
        if np.ndim(x) != 0:
            return fn(x)
        key = float(x)
        if key not in seen:
            seen[key] = fn(x)
        return seen[key]
    return call


def _sample_interval(rng, eta: EtaMap, domain):
    lo, hi = domain
    for _ in range(MAX_REJECTIONS):
        a, b = (float(v) for v in rng.uniform(lo, hi, 2))
        try:
            L = eta.at(b, a)
        except DomainError:
            continue
        if L > 0 and lo <= a + L <= hi:
            return a, b
    return None


def _row(theorem, p, q, **kw) -> dict:
    row = {"theorem": theorem, "key": _row_key(theorem, p, q), "p": p, "q": q,
           "lhs": None, "rhs": None, "margin": None, "error_budget": None,
           "verdict": "skipped", "classification": None, "reason": None}
    row.update(kw)
    return row


def _confirm(theorem, f, eta, a, b, p, q, tol: Tolerances):
    """Soundness gate: recompute at 10x tighter quadrature; attach the kernel cross-check."""
    tight = verify(theorem, f, eta, a, b, p, q, tol=tol.quad / 10, tau=tol.verify)
    info = {"gate_lhs": tight.lhs, "gate_margin": tight.margin, "gate_verdict": tight.verdict}
    if theorem not in ("HHchain", "T2.2", "T2.3"):
        k_eta = EtaMap.canonical() if theorem in ("T1.2", "Cq", "Cq1") else eta
        kernel = tight_kernel(f, k_eta, a, b, tol.quad / 10)
        info["tight_kernel"] = kernel.value
        info["kernel_dominates_lhs"] = bool(kernel.value + kernel.error + tight.error_budget >= tight.lhs)
    return tight.verdict == "violated", info


def run_trial(config: CampaignConfig, trial: int) -> TrialReport:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, trial]))
    family = config.families[int(rng.integers(len(config.families)))]
    instance = sample_instance(family, rng, config.domain)
    instances = expand_theorems(config.theorems, config.p_values, config.q_values)
    eta = EtaMap.from_source(config.eta)
    tol = config.tolerances
    report = TrialReport(config.seed, trial, instance, {}, [], [])

    if config.interval is not None:
        ab = config.interval
    else:
        ab = _sample_interval(rng, eta, config.domain)
    if ab is None:
        report.skipped = "no admissible (a, b) after rejection sampling"
        report.evaluations = [_row(t, p, q, classification="precondition-unmet",
                                   reason=report.skipped) for t, p, q in instances]
        return report
    a, b = ab
    instance["a"], instance["b"] = a, b
    try:
        f = ScalarFunction.from_source(instance["expr"])
    except ExprError as exc:
        report.skipped = f"cannot build function: {exc}"
        report.evaluations = [_row(t, p, q, verdict="error", reason=report.skipped)
                              for t, p, q in instances]
        return report
    instance["derivative"] = f.derivative_source
    f = ScalarFunction(_scalar_memo(f.value), _scalar_memo(f.derivative), f.source,
                       f.derivative_source)

    certifier = _Certifier(f, config)
    memo = {}
    for theorem, p, q in instances:
        hyp = hypothesis_for(theorem, p, q)
        cert = certifier.certify(hyp)
        report.certificates[_hyp_key(hyp)] = cert
        if not cert["certified"]:
            report.evaluations.append(_row(theorem, p, q, classification="precondition-unmet",
                                           reason=f"hypothesis {_hyp_key(hyp)} not certified"))
            continue
        try:
            ev = verify(theorem, f, eta, a, b, p, q, tol=tol.quad, tau=tol.verify, cache=memo)
        except (ValueError, ArithmeticError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            cls = "precondition-unmet" if theorem in ("T1.2", "Cq", "Cq1") and a >= b \
                else "numerical-inconclusive"
            report.evaluations.append(_row(theorem, p, q, verdict="error",
                                           classification=cls, reason=reason))
            report.failures.append({"key": _row_key(theorem, p, q), "classification": cls,
                                    "reason": reason})
            continue
        row = _row(theorem, p, q, lhs=ev.lhs, rhs=ev.rhs, margin=ev.margin,
                   error_budget=ev.error_budget, verdict=ev.verdict)
        if ev.verdict == "violated":
            confirmed, info = _confirm(theorem, f, eta, a, b, p, q, tol)
            cls = "paper-as-printed-violation" if confirmed else "numerical-inconclusive"
            row["classification"] = cls
            report.failures.append({"key": row["key"], "classification": cls, **info})
            if not confirmed:
                row["verdict"] = "inconclusive"
        elif ev.verdict == "inconclusive":
            row["classification"] = "numerical-inconclusive"
            report.failures.append({"key": row["key"], "classification": "numerical-inconclusive"})
        report.evaluations.append(row)
    return report


# --------------------------------------------------------------- campaign

def worker_count() -> int:
    raw = os.environ.get("HHINVEX_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _run_chunk(args):
    config, trials = args
    return [run_trial(config, t) for t in trials]


def _trials(config: CampaignConfig, workers: Optional[int] = None) -> list:
    workers = worker_count() if workers is None else workers
    indices = list(range(config.trials))
    if workers <= 1 or config.trials < 64:
        return [run_trial(config, t) for t in indices]
    size = max(1, config.trials // (workers * 4))
    chunks = [(config, indices[i:i + size]) for i in range(0, len(indices), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]


def _histogram(margins) -> dict:
    m = np.asarray(margins, dtype=float)
    counts, _ = np.histogram(m[(m >= HIST_EDGES[0]) & (m <= HIST_EDGES[-1])], bins=HIST_EDGES)
    return {"counts": counts.tolist(), "below": int(np.count_nonzero(m < HIST_EDGES[0])),
            "above": int(np.count_nonzero(m > HIST_EDGES[-1]))}


def summarize(reports: list) -> dict:
    """Order-insensitive reduction: counts, minima and histograms per theorem."""
    per = {}
    for rep in reports:
        for row in rep.evaluations:
            s = per.setdefault(row["theorem"], {
                "rows": 0, "evaluated": 0, "holds": 0, "violated": 0, "inconclusive": 0,
                "skipped": 0, "errors": 0, "min_margin": None, "min_margin_at": None,
                "_margins": []})
            s["rows"] += 1
            v = row["verdict"]
            if v == "skipped":
                s["skipped"] += 1
                continue
            if v == "error":
                s["errors"] += 1
                continue
            s["evaluated"] += 1
            s[v] += 1
            s["_margins"].append(row["margin"])
            at = {"trial": rep.trial, "key": row["key"]}
            if s["min_margin"] is None or (row["margin"], rep.trial) < (s["min_margin"], s["min_margin_at"]["trial"]):
                s["min_margin"], s["min_margin_at"] = row["margin"], at
    for s in per.values():
        s["histogram"] = _histogram(s.pop("_margins"))
    relax = {"T3.2<=T3.3": [0, 0], "T3.4<=T3.5": [0, 0]}
    for rep in reports:
        by_key = {row["key"]: row for row in rep.evaluations if row["rhs"] is not None}
        for lo_t, hi_t, name in (("T3.2", "T3.3", "T3.2<=T3.3"), ("T3.4", "T3.5", "T3.4<=T3.5")):
            for key, row in by_key.items():
                if row["theorem"] != lo_t:
                    continue
                other = by_key.get(key.replace(lo_t, hi_t, 1))
                if other is None:
                    continue
                relax[name][0] += 1
                if row["rhs"] > other["rhs"] * (1 + 1e-12):
                    relax[name][1] += 1
    failures = {}
    for rep in reports:
        for fail in rep.failures:
            failures[fail["classification"]] = failures.get(fail["classification"], 0) + 1
    violations = sum(s["violated"] for s in per.values())
    confirmed = sorted((dict(fail, trial=rep.trial) for rep in reports for fail in rep.failures
                        if fail["classification"] == "paper-as-printed-violation"),
                       key=lambda d: (d["trial"], d["key"]))
    return {
        "trials": len(reports),
        "skipped_trials": sum(1 for r in reports if r.skipped),
        "theorems": {k: per[k] for k in sorted(per)},
        "violations": violations,
        "violation_list": confirmed,
        "failure_classes": {k: failures[k] for k in sorted(failures)},
        "relaxation_order": {k: {"checked": v[0], "failed": v[1]} for k, v in relax.items()},
        "histogram_edges": HIST_EDGES.tolist(),
    }


@dataclass
class CampaignResult:
    config: CampaignConfig
    reports: list
    summary: dict


def run_campaign(config: CampaignConfig | dict, workers: Optional[int] = None) -> CampaignResult:
    if isinstance(config, dict):
        config = CampaignConfig.from_dict(config)
    reports = _trials(config, workers)
    return CampaignResult(config, reports, summarize(reports))


# --------------------------------------------------------- counterexamples

def _descend(theorem, f, eta, a, b, p, q, config: CampaignConfig, steps: int = 100):
    lo, hi = config.domain
    tol = config.tolerances
    best = verify(theorem, f, eta, a, b, p, q, tol=tol.quad, tau=tol.verify)
    h = 0.05 * (hi - lo)
    for _ in range(steps):
        improved = None
        for da, db in ((h, 0), (-h, 0), (0, h), (0, -h)):
            na, nb = best.a + da, best.b + db
            if not (lo <= na <= hi and lo <= nb <= hi):
                continue
            try:
                L = eta.at(nb, na)
                if not (L > 0 and lo <= na + L <= hi):
                    continue
                ev = verify(theorem, f, eta, na, nb, p, q, tol=tol.quad, tau=tol.verify)
            except (ValueError, ArithmeticError):
                continue
            if ev.margin < (improved or best).margin:
                improved = ev
        if improved is None:
            h *= 0.5
        else:
            best = improved
    return best


def search_counterexamples(config: CampaignConfig | dict, workers: Optional[int] = None,
                           steps: int = 100) -> list:
    """Campaign plus local descent on the margin around near-tight trials.

    Only violations that survive the refinement and the tighter-quadrature
    gate are returned, each tagged ``paper-as-printed-violation``.
    """
    result = run_campaign(config, workers)
    config = result.config
    eta = EtaMap.from_source(config.eta)
    found = []
    for rep in result.reports:
        f = None
        for row in rep.evaluations:
            if row["margin"] is None or row["margin"] >= 10 * config.tolerances.verify:
                continue
            if f is None:
                f = ScalarFunction.from_source(rep.instance["expr"])
            th, p, q = row["theorem"], row["p"], row["q"]
            best = _descend(th, f, eta, rep.instance["a"], rep.instance["b"], p, q, config, steps)
            if best.verdict != "violated":
                continue
            confirmed, info = _confirm(th, f, eta, best.a, best.b, p, q, config.tolerances)
            if not confirmed:
                continue
            found.append({"trial": rep.trial, "seed": rep.seed, "key": row["key"],
                          "expr": rep.instance["expr"], "a": best.a, "b": best.b,
                          "lhs": best.lhs, "rhs": best.rhs, "margin": best.margin,
                          "classification": "paper-as-printed-violation", **info})
    return found
