"""Midpoint-gap bounds for functions with preinvex / log-preinvex |f'|.

All one-dimensional integrals are taken over the eta-segment
``[a, a + eta(b, a)]`` after the substitution ``x = a + t*eta(b, a)``, so
the quadrature tolerance applies directly to the mean value of ``f``.

The right-hand sides are closed forms in ``A = |f'(a)|``, ``B = |f'(b)|``
and the segment length ``L = eta(b, a)``; the ``*_value`` helpers take those
numbers directly and the ``rhs_*`` functions extract them from ``f``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .expr import DomainError
from .invex import EtaMap, ScalarFunction
from .quadrature import DEFAULT_TOL, integrate

__all__ = [
    "THEOREMS", "ALIASES", "TAU_VERIFY", "EPS_LM", "Estimate", "BoundEvaluation",
    "ChainCheck", "OrientationError", "ParameterError", "LogDomainError",
    "canonical_theorem", "eta_length", "midpoint_gap", "trapezoid_gap",
    "classical_gap", "tight_kernel", "hh_identity_residual", "hh_chain_check",
    "rhs_T31", "rhs_T32", "rhs_T33", "rhs_T34", "rhs_T35", "rhs_Tz", "rhs_Tfd",
    "rhs_classical", "rhs_T22_T23", "rhs", "verify", "verdict_for",
    "log_mean_ratio", "t31_value", "t32_value", "t33_value", "t34_value",
    "t35_value", "tz_value", "tfd_value", "t22_value", "t23_value",
    "conjugate", "needs_params",
]

THEOREMS = ("HHchain", "T1.2", "T2.2", "T2.3", "T3.1", "T3.2", "T3.3", "T3.4",
            "T3.5", "Tz", "Tfd", "Cq", "Cq1")
ALIASES = {"T2.1": "HHchain"}

TAU_VERIFY = 1e-9
EPS_LM = 1e-8
_EPS = float(np.finfo(float).eps)

# theorems whose LHS lives on [a, b] with eta(b, a) = b - a
_CLASSICAL = {"T1.2", "Cq", "Cq1"}


class OrientationError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class LogDomainError(DomainError):
    pass


class Estimate(NamedTuple):
    value: float
    error: float


def canonical_theorem(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in THEOREMS:
        raise ValueError(f"unknown theorem {name!r}; expected one of {THEOREMS + tuple(ALIASES)}")
    return name


def needs_params(theorem: str) -> tuple:
    """Which of ``p``/``q`` the theorem's right-hand side uses."""
    theorem = canonical_theorem(theorem)
    if theorem in ("T2.2", "T3.2", "T3.3"):
        return ("p",)
    if theorem in ("T3.4", "T3.5"):
        return ("q",)
    if theorem in ("Tfd", "Cq1"):
        return ("p", "q")
    return ()


# ---------------------------------------------------------------- parameters

def _check_p(p):
    if p is None or not (p > 1.0 and math.isfinite(p)):
        raise ParameterError(f"p must be a finite real > 1, got {p!r}")
    return float(p)


def _check_q(q):
    if q is None or not (q >= 1.0 and math.isfinite(q)):
        raise ParameterError(f"q must be a finite real >= 1, got {q!r}")
    return float(q)


def conjugate(p=None, q=None) -> tuple:
    """Complete a Hoelder pair with 1/p + 1/q = 1; q = 1 pairs with p = inf."""
    if p is None and q is None:
        raise ParameterError("need p or q")
    if q is None:
        p = _check_p(p)
        q = p / (p - 1.0)
    elif p is None:
        q = _check_q(q)
        p = math.inf if q == 1.0 else q / (q - 1.0)
    else:
        if not (p > 1.0):
            raise ParameterError(f"p must exceed 1, got {p!r}")
        q = _check_q(q)
        if abs((0.0 if math.isinf(p) else 1.0 / p) + 1.0 / q - 1.0) > 1e-12:
            raise ParameterError(f"1/p + 1/q must equal 1 (got p={p!r}, q={q!r})")
    return float(p), float(q)


# ---------------------------------------------------------- closed-form RHS

def log_mean_ratio(A: float, B: float, s: float) -> float:
    """``(B**s - A**s) / (log B - log A)`` for A, B > 0.

    Evaluated as ``A**s * expm1(s*g) / g`` with ``g = log(B/A)``, and
    replaced by the series ``s * A**s * (1 + s*g/2)`` once ``|g| < EPS_LM``.
    """
    if not (A > 0.0 and B > 0.0):
        raise LogDomainError(f"logarithmic mean needs positive arguments, got {A!r}, {B!r}")
    gap = math.log(B / A)
    if abs(gap) < EPS_LM:
        return s * A ** s * (1.0 + 0.5 * s * gap)
    return A ** s * math.expm1(s * gap) / gap


def t31_value(L, A, B):
    return L * (A + B) / 8.0


def t32_value(L, A, B, p):
    p = _check_p(p)
    r = p / (p - 1.0)
    ar, br = A ** r, B ** r
    return (L / 16.0) * (4.0 / (p + 1.0)) ** (1.0 / p) * (
        (3.0 * ar + br) ** (1.0 / r) + (ar + 3.0 * br) ** (1.0 / r))


def t33_value(L, A, B, p):
    p = _check_p(p)
    return (L / 16.0) * (4.0 / (p + 1.0)) ** (1.0 / p) * (3.0 ** ((p - 1.0) / p) + 1.0) * (A + B)


def t34_value(L, A, B, q):
    q = _check_q(q)
    aq, bq = A ** q, B ** q
    return (L / 8.0) * (((2.0 * aq + bq) / 3.0) ** (1.0 / q) + ((aq + 2.0 * bq) / 3.0) ** (1.0 / q))


def t35_value(L, A, B, q):
    q = _check_q(q)
    return (L / 8.0) * ((2.0 ** (1.0 / q) + 1.0) / 3.0 ** (1.0 / q)) * (A + B)


def tz_value(L, A, B):
    return L * log_mean_ratio(A, B, 0.5) ** 2


def tfd_value(L, A, B, p, q):
    p, q = conjugate(p, q)
    if math.isinf(p):
        holder = 1.0
    else:
        holder = 2.0 ** (1.0 / p) * (p + 1.0) ** (1.0 / p)
    ratio = log_mean_ratio(A, B, q / 2.0)
    return L * math.sqrt(A) / (holder * q ** (1.0 / q)) * ratio ** (1.0 / q)


def t22_value(L, A, B, p):
    # closing exponent p/(p-1) kept as printed
    p = _check_p(p)
    r = p / (p - 1.0)
    return L / (2.0 * (p + 1.0) ** (1.0 / p)) * max(A ** r, B ** r) ** r


def t23_value(L, A, B):
    return L / 4.0 * max(A, B)


# ------------------------------------------------------- function plumbing

def eta_length(eta: EtaMap, a: float, b: float) -> float:
    L = eta.at(b, a)
    if not L > 0.0:
        raise OrientationError(f"eta(b, a) must be positive, got {L!r} for a={a!r}, b={b!r}")
    return L


def _slopes(f: ScalarFunction, a: float, b: float) -> tuple:
    return abs(f.slope(a)), abs(f.slope(b))


def _mean(f: ScalarFunction, a: float, L: float, tol: float) -> Estimate:
    g = f.value
    res = integrate(lambda t: g(a + t * L), 0.0, 1.0, tol)
    return Estimate(res.value, res.error)


def _gap(f, a, L, tol):
    mean = _mean(f, a, L, tol)
    fmid = f.at(a + L / 2.0)
    rounding = 4.0 * _EPS * (abs(mean.value) + abs(fmid))
    return Estimate(abs(mean.value - fmid), mean.error + rounding)


def midpoint_gap(f: ScalarFunction, eta: EtaMap, a: float, b: float,
                 tol: float = DEFAULT_TOL) -> Estimate:
    """``|mean of f over [a, a+L] - f(a + L/2)|`` with its error budget."""
    return _gap(f, a, eta_length(eta, a, b), tol)


def classical_gap(f: ScalarFunction, a: float, b: float, tol: float = DEFAULT_TOL) -> Estimate:
    if not a < b:
        raise OrientationError(f"need a < b, got a={a!r}, b={b!r}")
    return _gap(f, a, b - a, tol)


def trapezoid_gap(f: ScalarFunction, eta: EtaMap, a: float, b: float,
                  tol: float = DEFAULT_TOL) -> Estimate:
    """``|(f(a) + f(a+L))/2 - mean of f over [a, a+L]|``."""
    L = eta_length(eta, a, b)
    mean = _mean(f, a, L, tol)
    trap = 0.5 * (f.at(a) + f.at(a + L))
    rounding = 4.0 * _EPS * (abs(mean.value) + abs(trap))
    return Estimate(abs(trap - mean.value), mean.error + rounding)


def tight_kernel(f: ScalarFunction, eta: EtaMap, a: float, b: float,
                 tol: float = DEFAULT_TOL) -> Estimate:
    """``L * (int_0^1/2 t|f'(a+tL)| dt + int_1/2^1 (1-t)|f'(a+tL)| dt)``."""
    L = eta_length(eta, a, b)
    d = f.derivative
    left = integrate(lambda t: t * np.abs(d(a + t * L)), 0.0, 0.5, tol / 2)
    right = integrate(lambda t: (1.0 - t) * np.abs(d(a + t * L)), 0.5, 1.0, tol / 2)
    value = L * (left.value + right.value)
    return Estimate(value, L * (left.error + right.error) + 4.0 * _EPS * abs(value))


def hh_identity_residual(f: ScalarFunction, eta: EtaMap, a: float, b: float,
                         tol: float = DEFAULT_TOL) -> Estimate:
    """Residual of the integration-by-parts identity behind every midpoint bound.

    Left side ``int_0^1/2 t f'(a+tL) dt + int_1/2^1 (t-1) f'(a+tL) dt``,
    right side ``f(a + L/2)/L - (1/L^2) int_a^{a+L} f``.
    """
    L = eta_length(eta, a, b)
    d = f.derivative
    i1 = integrate(lambda t: t * d(a + t * L), 0.0, 0.5, tol / 4)
    i2 = integrate(lambda t: (t - 1.0) * d(a + t * L), 0.5, 1.0, tol / 4)
    left = i1.value + i2.value
    mean = _mean(f, a, L, tol / 4)
    fmid = f.at(a + L / 2.0)
    right = (fmid - mean.value) / L
    rounding = 8.0 * _EPS * (abs(i1.value) + abs(i2.value) + (abs(fmid) + abs(mean.value)) / L)
    return Estimate(abs(left - right), i1.error + i2.error + mean.error / L + rounding)


def rhs_T31(f, eta, a, b):
    return t31_value(eta_length(eta, a, b), *_slopes(f, a, b))


def rhs_T32(f, eta, a, b, p):
    _check_p(p)
    return t32_value(eta_length(eta, a, b), *_slopes(f, a, b), p)


def rhs_T33(f, eta, a, b, p):
    _check_p(p)
    return t33_value(eta_length(eta, a, b), *_slopes(f, a, b), p)


def rhs_T34(f, eta, a, b, q):
    _check_q(q)
    return t34_value(eta_length(eta, a, b), *_slopes(f, a, b), q)


def rhs_T35(f, eta, a, b, q):
    _check_q(q)
    return t35_value(eta_length(eta, a, b), *_slopes(f, a, b), q)


def rhs_Tz(f, eta, a, b):
    return tz_value(eta_length(eta, a, b), *_slopes(f, a, b))


def rhs_Tfd(f, eta, a, b, p=None, q=None):
    p, q = conjugate(p, q)
    return tfd_value(eta_length(eta, a, b), *_slopes(f, a, b), p, q)


def rhs_classical(f, a, b, variant, p=None, q=None):
    """Classical (eta(b,a) = b - a) forms: T1.2, Cq and Cq1."""
    if not a < b:
        raise OrientationError(f"need a < b, got a={a!r}, b={b!r}")
    L = b - a
    A, B = _slopes(f, a, b)
    if variant == "T1.2":
        return (L / 4.0) * ((A + B) / 2.0)
    if variant == "Cq":
        return tz_value(L, A, B)
    if variant == "Cq1":
        p, q = conjugate(p, q)
        return tfd_value(L, A, B, p, q)
    raise ValueError(f"unknown classical variant {variant!r}")


def rhs_T22_T23(f, eta, a, b, variant, p=None):
    L = eta_length(eta, a, b)
    A, B = _slopes(f, a, b)
    if variant == "T2.2":
        return t22_value(L, A, B, p)
    if variant == "T2.3":
        return t23_value(L, A, B)
    raise ValueError(f"unknown variant {variant!r}")


def rhs(theorem, f, eta, a, b, p=None, q=None) -> float:
    theorem = canonical_theorem(theorem)
    if theorem == "T3.1":
        return rhs_T31(f, eta, a, b)
    if theorem == "T3.2":
        return rhs_T32(f, eta, a, b, p)
    if theorem == "T3.3":
        return rhs_T33(f, eta, a, b, p)
    if theorem == "T3.4":
        return rhs_T34(f, eta, a, b, q)
    if theorem == "T3.5":
        return rhs_T35(f, eta, a, b, q)
    if theorem == "Tz":
        return rhs_Tz(f, eta, a, b)
    if theorem == "Tfd":
        return rhs_Tfd(f, eta, a, b, p, q)
    if theorem in _CLASSICAL:
        return rhs_classical(f, a, b, theorem, p, q)
    if theorem in ("T2.2", "T2.3"):
        return rhs_T22_T23(f, eta, a, b, theorem, p)
    raise ValueError(f"{theorem} has no single right-hand side")


# -------------------------------------------------------------- HH chain

@dataclass(frozen=True)
class ChainCheck:
    """The four values of the preinvex Hermite-Hadamard chain.

    ``slacks[i] = values[i+1] - values[i]``; each link holds when its slack
    is at least minus its error budget.
    """
    values: tuple
    slacks: tuple
    budgets: tuple
    holds: tuple

    @property
    def passed(self) -> bool:
        return all(self.holds)


def hh_chain_check(f: ScalarFunction, eta: EtaMap, a: float, b: float,
                   tol: float = DEFAULT_TOL) -> ChainCheck:
    L = eta_length(eta, a, b)
    mean = _mean(f, a, L, tol)
    fa, fb, fend = f.at(a), f.at(b), f.at(a + L)
    values = (f.at(a + L / 2.0), mean.value, 0.5 * (fa + fend), 0.5 * (fa + fb))
    slacks = tuple(values[i + 1] - values[i] for i in range(3))
    scale = max(abs(v) for v in values)
    rounding = 8.0 * _EPS * scale
    budgets = (mean.error + rounding, mean.error + rounding, rounding)
    return ChainCheck(values, slacks, budgets, tuple(s >= -e for s, e in zip(slacks, budgets)))


# ----------------------------------------------------------- verification

def verdict_for(margin: float, budget: float, tau: float = TAU_VERIFY) -> str:
    if margin >= -budget:
        return "holds"
    if margin < -budget - tau:
        return "violated"
    return "inconclusive"


@dataclass(frozen=True)
class BoundEvaluation:
    theorem: str
    f: str
    eta: str
    a: float
    b: float
    eta_ba: float
    p: Optional[float]
    q: Optional[float]
    lhs: float
    rhs: float
    margin: float
    error_budget: float
    verdict: str
    notes: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        parts = [f"{k}={v:g}" for k, v in (("p", self.p), ("q", self.q)) if v is not None]
        return self.theorem + (f"[{','.join(parts)}]" if parts else "")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


_NOTE_T2X = ("as-printed deviation: LHS uses the trapezoid gap over [a, a+eta(b,a)] "
             "instead of the printed integral limits and prefactor")
_NOTE_T22 = "as-printed: closing exponent p/(p-1) on the sup kept"
_NOTE_TFD = "as-printed: |f'(a)|^(1/2) prefactor kept; violations are paper-as-printed"


def verify(theorem: str, f: ScalarFunction, eta: EtaMap, a: float, b: float,
           p: Optional[float] = None, q: Optional[float] = None,
           tol: float = DEFAULT_TOL, tau: float = TAU_VERIFY,
           cache: Optional[dict] = None) -> BoundEvaluation:
    """Evaluate one theorem instance and classify it as holds/violated/inconclusive.

    ``cache`` is an optional dict reused across calls with the same ``f``,
    ``eta``, ``a`` and ``b``; it memoizes the gap integrals of a parameter sweep.
    """
    theorem = canonical_theorem(theorem)
    used = needs_params(theorem)
    if "p" in used and "q" in used:
        p, q = conjugate(p, q)
    else:
        p = _check_p(p) if "p" in used else None
        q = _check_q(q) if "q" in used else None
    notes = []
    details = {}

    def memo(kind, compute):
        if cache is None:
            return compute()
        key = (kind, a, b, tol)
        if key not in cache:
            cache[key] = compute()
        return cache[key]

    if theorem in _CLASSICAL:
        L = b - a
        gap = memo("classical", lambda: classical_gap(f, a, b, tol))
    else:
        L = eta_length(eta, a, b)
        if theorem in ("T2.2", "T2.3"):
            gap = memo("trapezoid", lambda: trapezoid_gap(f, eta, a, b, tol))
            notes.append(_NOTE_T2X)
            if theorem == "T2.2":
                notes.append(_NOTE_T22)
        elif theorem != "HHchain":
            gap = memo("midpoint", lambda: midpoint_gap(f, eta, a, b, tol))

    if theorem == "HHchain":
        chain = hh_chain_check(f, eta, a, b, tol)
        k = min(range(3), key=lambda i: chain.slacks[i] + chain.budgets[i])
        lhs, right = chain.values[k], chain.values[k + 1]
        margin, budget = chain.slacks[k], chain.budgets[k]
        details = {"chain": list(chain.values), "slacks": list(chain.slacks),
                   "tightest_link": k}
    else:
        right = rhs(theorem, f, eta, a, b, p, q)
        lhs, budget = gap
        margin = right - lhs
        if theorem in ("Tfd", "Cq1"):
            notes.append(_NOTE_TFD)
    if not (math.isfinite(lhs) and math.isfinite(right)):
        raise DomainError(f"non-finite bound values for {theorem}: lhs={lhs!r}, rhs={right!r}")
    return BoundEvaluation(
        theorem=theorem, f=f.label(), eta=str(eta) if theorem not in _CLASSICAL else "v-u",
        a=float(a), b=float(b), eta_ba=float(L), p=p, q=q, lhs=float(lhs), rhs=float(right),
        margin=float(margin), error_budget=float(budget),
        verdict=verdict_for(margin, budget, tau), notes=tuple(notes), details=details)
