"""Bounds along eta-paths in R^n.

For ``x, y`` in a box and an n-dimensional eta-map, the path
``t -> x + t*eta(y, x)`` reduces an n-variable ``f`` to the 1-D restriction
``phi(t)``. Its running integral ``Phi(t) = int_0^t phi`` is a function with
``Phi' = phi >= 0``, so the log-convex midpoint bounds apply to ``Phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bounds import (BoundEvaluation, ParameterError, conjugate, tfd_value,
                     tz_value, verdict_for, TAU_VERIFY)
from .expr import Expression, parse
from .invex import (ClassCertificate, ConditionCReport, EtaMap, InvexDomain,
                    LOG_PREINVEX, NONE, PositivityError, check_condition_c)
from .quadrature import DEFAULT_TOL, integrate

__all__ = [
    "EtaPath", "PathAccumulator", "PathError", "ConditionCError",
    "CertificationError", "QPowerReport", "function_variables", "parse_function",
    "parse_point", "path_restriction", "check_path_logpreinvex",
    "check_q_power_equivalence", "verify_multivar",
]

_EPS = float(np.finfo(float).eps)


class PathError(ValueError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConditionCError(ValueError):
    def __init__(self, message, report: ConditionCReport):
        super().__init__(message)
        self.report = report


class CertificationError(ValueError):
    def __init__(self, message, certificate: ClassCertificate):
        super().__init__(message)
        self.certificate = certificate


def function_variables(dim: int) -> tuple:
    return tuple(f"z{i}" for i in range(1, dim + 1))


def parse_function(source: str, dim: int) -> Expression:
    """Parse an n-variable function written in ``z1..zn``."""
    return parse(source, function_variables(dim))


def parse_point(text: str) -> np.ndarray:
    """``"0, 1.5"`` -> array([0., 1.5])."""
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise ValueError(f"bad point {text!r}: expected comma-separated reals") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise ValueError(f"bad point {text!r}")
    return np.array(values)


@dataclass(frozen=True)
class EtaPath:
    f: Expression
    x: np.ndarray
    y: np.ndarray
    eta: EtaMap
    direction: np.ndarray = field(init=False)
    endpoint: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be points of the same dimension")
        if self.eta.dim != x.size or len(self.f.variables) != x.size:
            raise ValueError(f"dimension mismatch: x has {x.size} coordinates, "
                             f"eta has {self.eta.dim}, f has {len(self.f.variables)}")
        direction = np.asarray(self.eta.at(y, x), dtype=float).reshape(x.shape)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "endpoint", x + direction)

    @property
    def dim(self) -> int:
        return self.x.size

    def points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.x + t[..., None] * self.direction

    def phi(self, t):
        """The restriction ``f(x + t*eta(y, x))``, vectorized in ``t``."""
        z = self.points(t)
        return self.f.vectorized(*(z[..., i] for i in range(self.dim)))

    __call__ = phi

    def bounding_box(self, samples: int = 65) -> tuple:
        pts = np.vstack([self.x, self.y, self.endpoint, self.points(np.linspace(0, 1, samples))])
        return tuple(pts.min(axis=0)), tuple(pts.max(axis=0))


def path_restriction(f: Expression, x, y, eta: EtaMap,
                     domain: Optional[InvexDomain] = None, samples: int = 257) -> EtaPath:
    """Build phi(t) = f(x + t eta(y, x)); if ``domain`` is given the path must stay inside."""
    path = EtaPath(f, np.asarray(x, float), np.asarray(y, float), eta)
    if domain is not None:
        ts = np.linspace(0.0, 1.0, samples)
        exc = domain.excess(path.points(ts))
        if np.any(exc > domain.tau_dom):
            t = float(ts[int(np.argmax(exc > domain.tau_dom))])
            raise PathError(f"eta-path leaves the domain at t={t!r}", t)
    return path


class PathAccumulator:
    """``Phi(t) = int_0^t phi(s) ds`` from cached per-cell integrals.

    Cell integrals over ``[k/cells, (k+1)/cells]`` are computed once at
    construction, so a shared accumulator is read-only afterwards.
    """

    def __init__(self, phi: Callable, cells: int = 64, tol: float = DEFAULT_TOL):
        self.phi = phi
        self.cells = cells
        self.tol = tol
        self.edges = np.linspace(0.0, 1.0, cells + 1)
        values, errors = [0.0], [0.0]
        for k in range(cells):
            res = integrate(phi, self.edges[k], self.edges[k + 1], tol / cells)
            values.append(res.value)
            errors.append(res.error)
        self.prefix = np.cumsum(values)
        self.prefix_err = np.cumsum(errors)

    def evaluate(self, t: float) -> tuple:
        """(value, error) of Phi at a single ``t`` in [0, 1]."""
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t!r}")
        k = min(int(t * self.cells), self.cells - 1)
        if t == self.edges[k]:
            return float(self.prefix[k]), float(self.prefix_err[k])
        res = integrate(self.phi, self.edges[k], t, self.tol / self.cells)
        return float(self.prefix[k] + res.value), float(self.prefix_err[k] + res.error)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([self.evaluate(ti)[0] for ti in t.ravel()])
        return out.reshape(t.shape)

    def error(self, t) -> float:
        return self.evaluate(t)[1]


# ------------------------------------------------------------ certification

def _log_convexity_grid(phi: Callable, grid: int):
    ts = np.linspace(0.0, 1.0, grid)
    T1 = ts[:, None, None]
    T2 = ts[None, :, None]
    lam = ts[None, None, :]
    p1 = np.asarray(phi(ts), dtype=float)
    pm = np.asarray(phi((1.0 - lam) * T1 + lam * T2), dtype=float)
    return ts, p1, pm, lam


def _require_positive(values, where: str):
    bad = ~(np.asarray(values) > 0.0)
    if np.any(bad):
        raise PositivityError(f"phi is not positive on the {where} grid")


def check_path_logpreinvex(f: Expression, x, y, eta: EtaMap, grid: int = 33,
                           tol: float = 1e-9, condition_grid: Optional[int] = None,
                           ) -> ClassCertificate:
    """Certify log-preinvexity of ``f`` along the eta-path via log-convexity of phi.

    The equivalence needs Condition C, which is checked first on the
    smallest box holding x, y, the endpoint and the sampled path; the check
    refuses to certify without it.
    """
    path = path_restriction(f, x, y, eta)
    lo, hi = path.bounding_box()
    box = InvexDomain(lo, hi, eta)
    report = check_condition_c(eta, box, condition_grid)
    if not report.passed:
        raise ConditionCError(
            f"Condition C fails on the path box (residual {report.worst_residual:.3g})", report)
    ts, p1, pm, lam = _log_convexity_grid(path.phi, grid)
    _require_positive(p1, "(t1, t2)")
    _require_positive(pm, "interior")
    bound = p1[:, None, None] ** (1.0 - lam) * p1[None, :, None] ** lam
    margin = (pm - bound) / np.maximum(1.0, bound)
    k = int(np.argmax(margin))
    i, j, l = np.unravel_index(k, margin.shape)
    worst = float(margin.flat[k])
    witness = {"t1": float(ts[i]), "t2": float(ts[j]), "lambda": float(ts[l])}
    cls = LOG_PREINVEX if worst <= tol else NONE
    return ClassCertificate(LOG_PREINVEX, cls, (grid, grid, grid), tol, worst, witness,
                            {LOG_PREINVEX: worst}, label="sampled certificate (eta-path)")


@dataclass(frozen=True)
class QPowerReport:
    q: float
    phi_certified: bool
    power_certified: bool
    agree: bool
    disagreements: int
    max_scaling_error: float
    phi_witness: dict
    power_witness: dict


def check_q_power_equivalence(phi: Callable, q: float, grid: int = 33,
                              tol: float = 1e-9) -> QPowerReport:
    """Compare log-convexity of ``phi`` and ``phi**q`` point by point.

    In the log domain the margin of ``phi**q`` is exactly ``q`` times the
    margin of ``phi``; the report records the largest departure from that
    scaling and whether the pointwise verdicts (tolerance ``tol`` for phi,
    ``q*tol`` for the power) coincide.
    """
    if not q > 0:
        raise ParameterError(f"q must be positive, got {q!r}")
    ts, p1, pm, lam = _log_convexity_grid(phi, grid)
    _require_positive(p1, "(t1, t2)")
    _require_positive(pm, "interior")
    with np.errstate(over="ignore", under="ignore"):
        q1, qm = p1 ** q, pm ** q
    _require_positive(q1, "(t1, t2) power")
    _require_positive(qm, "interior power")

    def log_margin(v1, vm):
        return np.log(vm) - ((1.0 - lam) * np.log(v1)[:, None, None] + lam * np.log(v1)[None, :, None])

    m_phi = log_margin(p1, pm)
    m_pow = log_margin(q1, qm)
    bad_phi = m_phi > tol
    bad_pow = m_pow > q * tol
    scale = 1.0 + np.abs(np.log(pm)) + np.abs(np.log(p1)).max()

    def witness(m):
        k = int(np.argmax(m))
        i, j, l = np.unravel_index(k, m.shape)
        return {"t1": float(ts[i]), "t2": float(ts[j]), "lambda": float(ts[l]), "margin": float(m.flat[k])}

    return QPowerReport(
        q=float(q), phi_certified=not bool(np.any(bad_phi)),
        power_certified=not bool(np.any(bad_pow)),
        agree=bool(np.all(bad_phi == bad_pow)),
        disagreements=int(np.count_nonzero(bad_phi != bad_pow)),
        max_scaling_error=float(np.max(np.abs(m_pow - q * m_phi) / (q * scale))),
        phi_witness=witness(m_phi), power_witness=witness(m_pow))


# ------------------------------------------------------------ verification

def _outer_mean(acc: PathAccumulator, a: float, b: float, tol: float):
    res = integrate(acc, a, b, tol)
    return res.value / (b - a), res.error / (b - a)


def verify_multivar(theorem: str, f: Expression, x, y, eta: EtaMap, a: float, b: float,
                    p: Optional[float] = None, q: Optional[float] = None,
                    tol: float = DEFAULT_TOL, tau: float = TAU_VERIFY, grid: int = 33,
                    require_certificate: bool = True,
                    accumulator: Optional[PathAccumulator] = None) -> BoundEvaluation:
    """Evaluate the eta-path bound ``Eq1`` (log-mean form) or ``Eq2`` (Hoelder form).

    LHS is ``|(1/(b-a)) int_a^b Phi - Phi((a+b)/2)|``; the RHS is the 1-D
    log-convex bound with ``phi(a)``, ``phi(b)`` standing in for ``|Phi'|``.
    """
    if theorem not in ("Eq1", "Eq2"):
        raise ValueError(f"unknown multivariable theorem {theorem!r}; expected Eq1 or Eq2")
    if not (0.0 < a < b < 1.0):
        raise ParameterError(f"need 0 < a < b < 1, got a={a!r}, b={b!r}")
    if theorem == "Eq2":
        if p is None:
            raise ParameterError("Eq2 needs p > 1")
        p, q = conjugate(p, q)
        if math.isinf(p):
            raise ParameterError("Eq2 needs a finite p > 1")
    else:
        p = q = None
    path = path_restriction(f, x, y, eta)
    notes = []
    details = {"endpoint": [float(c) for c in path.endpoint]}
    if require_certificate:
        cert = check_path_logpreinvex(f, x, y, eta, grid=grid)
        details["certificate"] = cert.to_dict()
        if not cert.certified:
            raise CertificationError(
                f"f is not log-preinvex along the eta-path (margin {cert.worst_margin:.3g})", cert)
    acc = accumulator or PathAccumulator(path.phi, tol=tol)
    mean, mean_err = _outer_mean(acc, a, b, tol)
    mid_val, mid_err = acc.evaluate(0.5 * (a + b))
    inner_err = max(acc.error(a), acc.error(b), mid_err)
    lhs = abs(mean - mid_val)
    budget = mean_err + inner_err + mid_err + 4.0 * _EPS * (abs(mean) + abs(mid_val))
    A = float(path.phi(np.float64(a)))
    B = float(path.phi(np.float64(b)))
    if not (A > 0 and B > 0):
        raise PositivityError("phi must be positive at a and b")
    L = b - a
    right = tz_value(L, A, B) if theorem == "Eq1" else tfd_value(L, A, B, p, q)
    if theorem == "Eq2":
        notes.append("as-printed: phi(a)^(1/2) prefactor kept; violations are paper-as-printed")
    margin = right - lhs
    return BoundEvaluation(
        theorem=theorem, f=str(f), eta=eta.source, a=float(a), b=float(b), eta_ba=float(L),
        p=p, q=q, lhs=float(lhs), rhs=float(right), margin=float(margin),
        error_budget=float(budget), verdict=verdict_for(margin, budget, tau),
        notes=tuple(notes), details=details)
