"""Invex domains, eta-maps and sampled generalized-convexity certificates.

Everything here is evidence gathered on finite grids, not proof: a
certificate says the defining inequality held at every sampled point to
within a tolerance, and a refutation carries the worst witness found.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .expr import DomainError, differentiate, parse

__all__ = [
    "EtaMap", "InvexDomain", "ScalarFunction", "ClassCertificate",
    "ConditionCReport", "ChainReport", "GridSample", "NotInvexError",
    "PositivityError", "CLASSES", "split_components", "check_condition_c",
    "check_closure", "classify", "class_chain_check", "chain_values",
]

PREQUASIINVEX = "prequasiinvex"
PREINVEX = "preinvex"
LOG_PREINVEX = "log-preinvex"
NONE = "none"
# weakest first
CLASSES = (PREQUASIINVEX, PREINVEX, LOG_PREINVEX)

DEFAULT_GRID = 64
DEFAULT_T_GRID = 33
DEFAULT_CLASS_TOL = 1e-9


class NotInvexError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class PositivityError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def split_components(source: str) -> list[str]:
    """Split ``"a, max(b, c)"`` on top-level commas only."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(source):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(source[start:i])
            start = i + 1
    parts.append(source[start:])
    return [p.strip() for p in parts]


def eta_variables(dim: int) -> tuple:
    if dim == 1:
        return ("v", "u")
    return tuple(f"v{i}" for i in range(1, dim + 1)) + tuple(f"u{i}" for i in range(1, dim + 1))


@dataclass(frozen=True)
class EtaMap:
    """The bifunction eta(v, u).

    One-dimensional maps are written in ``v`` and ``u``; an n-dimensional
    map has n comma-separated components in ``v1..vn, u1..un``.
    """
    components: tuple
    dim: int
    source: str

    @classmethod
    def from_source(cls, source: str, dim: int = 1) -> "EtaMap":
        parts = split_components(source) if dim > 1 else [source]
        if len(parts) != dim:
            raise ValueError(f"eta needs {dim} components, got {len(parts)}")
        names = eta_variables(dim)
        return cls(tuple(parse(p, names) for p in parts), dim, source)

    @classmethod
    def canonical(cls, dim: int = 1) -> "EtaMap":
        if dim == 1:
            return cls.from_source("v-u")
        return cls.from_source(", ".join(f"v{i}-u{i}" for i in range(1, dim + 1)), dim)

    def __call__(self, v, u):
        """Vectorized eta. For dim > 1 the last axis of ``v``/``u`` holds coordinates."""
        if self.dim == 1:
            return self.components[0].vectorized(v, u)
        v = np.asarray(v, dtype=float)
        u = np.asarray(u, dtype=float)
        args = [v[..., i] for i in range(self.dim)] + [u[..., i] for i in range(self.dim)]
        return np.stack([c.vectorized(*args) for c in self.components], axis=-1)

    def at(self, v, u):
        """Scalar convenience: a float for dim 1, a 1-D array otherwise."""
        if self.dim == 1:
            if np.ndim(v) == 0 and np.ndim(u) == 0:
                return float(self(np.float64(v), np.float64(u)))
            # coordinate vectors of length one, as used by paths in R^1
            v, u = np.asarray(v, float), np.asarray(u, float)
            return np.asarray(self(v[..., 0], u[..., 0]), dtype=float)[..., None]
        return np.asarray(self(np.asarray(v, float), np.asarray(u, float)), dtype=float)

    def __str__(self):
        return self.source


@dataclass(frozen=True)
class InvexDomain:
    """Closed box ``[lo, hi]`` (per axis) with its eta-map."""
    lo: tuple
    hi: tuple
    eta: EtaMap
    grid: int = DEFAULT_GRID
    tau: Optional[float] = None

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) != self.eta.dim:
            raise ValueError("box and eta dimensions disagree")
        for a, b in zip(self.lo, self.hi):
            if not (math.isfinite(a) and math.isfinite(b) and a <= b):
                raise ValueError(f"invalid box side [{a}, {b}]")

    @classmethod
    def interval(cls, lo: float, hi: float, eta: EtaMap | str = "v-u", **kw) -> "InvexDomain":
        if isinstance(eta, str):
            eta = EtaMap.from_source(eta)
        return cls((float(lo),), (float(hi),), eta, **kw)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum((b - a) ** 2 for a, b in zip(self.lo, self.hi)))

    @property
    def tau_dom(self) -> float:
        if self.tau is not None:
            return self.tau
        scale = max([self.diameter] + [abs(c) for c in self.lo + self.hi])
        return 1e-12 * (scale if scale > 0 else 1.0)

    def axis_points(self, grid: int) -> list:
        return [np.linspace(a, b, grid) for a, b in zip(self.lo, self.hi)]

    def grid_points(self, grid: int) -> np.ndarray:
        axes = self.axis_points(grid)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def excess(self, points) -> np.ndarray:
        """Distance outside the box per point (0 inside); last axis = coordinates."""
        p = np.asarray(points, dtype=float)
        if self.dim == 1 and (p.ndim == 0 or p.shape[-1:] != (1,)):
            p = p[..., None]
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return np.max(np.maximum(lo - p, 0.0) + np.maximum(p - hi, 0.0), axis=-1)


@dataclass(frozen=True)
class ScalarFunction:
    """A 1-D function and its derivative, both vectorized callables."""
    value: Callable
    derivative: Callable
    source: Optional[str] = None
    derivative_source: Optional[str] = None

    @classmethod
    def from_source(cls, source: str, derivative: Optional[str] = None,
                    var: str = "x") -> "ScalarFunction":
        e = parse(source, [var])
        d = parse(derivative, [var]) if derivative is not None else differentiate(e, var)
        return cls(e.vectorized, d.vectorized, source, str(d))

    def __call__(self, x):
        return self.value(x)

    def at(self, x: float) -> float:
        return float(self.value(np.float64(x)))

    def slope(self, x: float) -> float:
        return float(self.derivative(np.float64(x)))

    def abs_derivative(self, power: float = 1.0) -> Callable:
        """``x -> |f'(x)|**power`` as a vectorized callable."""
        d = self.derivative
        if power == 1.0:
            return lambda x: np.abs(d(x))
        return lambda x: np.abs(d(x)) ** power

    def label(self) -> str:
        return self.source if self.source is not None else "<callable>"


@dataclass(frozen=True)
class ClassCertificate:
    """Sampled evidence for a class claim.

    ``cls`` is the strongest class, no stronger than ``target``, whose
    defining inequality held on the grid. ``worst_margin``/``witness``
    belong to the target inequality; ``margins`` has the worst coarse-grid
    margin of every class that was checked. Margins are scaled by
    ``max(1, |bound|)``, so the tolerance is absolute for small values and
    relative for large ones.
    """
    target: str
    cls: str
    grid: tuple
    tol: float
    worst_margin: float
    witness: dict
    margins: dict = field(default_factory=dict)
    label: str = "sampled certificate"

    @property
    def certified(self) -> bool:
        return self.cls == self.target

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "target": self.target,
            "class": self.cls,
            "certified": self.certified,
            "grid": list(self.grid),
            "tolerance": self.tol,
            "worst_margin": self.worst_margin,
            "witness": dict(self.witness),
            "margins": dict(self.margins),
        }


@dataclass(frozen=True)
class ConditionCReport:
    passed: bool
    worst_residual: float
    witness: dict
    tolerance: float
    grid: int

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_residual": self.worst_residual,
                "witness": self.witness, "tolerance": self.tolerance, "grid": self.grid}


@dataclass(frozen=True)
class ChainReport:
    passed: bool
    worst_slack: float
    witness: dict


# ------------------------------------------------------------- Condition C

def _as_point(a):
    a = np.asarray(a, dtype=float).ravel()
    return float(a[0]) if a.size == 1 else [float(x) for x in a]


def _eval_eta(eta: EtaMap, v, u, labels: dict):
    # v, u carry a trailing coordinate axis for every dimension
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    try:
        out = eta(v[..., 0], u[..., 0]) if eta.dim == 1 else eta(v, u)
    except DomainError as exc:
        shape = np.broadcast_shapes(np.shape(v), np.shape(u))[:-1]
        where = {}
        if exc.index is not None:
            idx = np.unravel_index(exc.index, shape)
            for key, (axis, values) in labels.items():
                where[key] = _as_point(values[idx[axis]])
        raise DomainError(f"eta evaluation failed at {where}: {exc}", point=where) from None
    return out if eta.dim > 1 else out[..., None]


def check_condition_c(eta: EtaMap, domain: InvexDomain, grid: Optional[int] = None,
                      tol: Optional[float] = None) -> ConditionCReport:
    """Check the two Condition C identities and their two-parameter consequence.

    Residuals, all of which vanish under Condition C::

        eta(y, y + t eta(x,y)) + t eta(x,y)
        eta(x, y + t eta(x,y)) - (1 - t) eta(x,y)
        eta(y + t2 eta(x,y), y + t1 eta(x,y)) - (t2 - t1) eta(x,y)

    sampled over a ``grid``-per-axis box grid and a ``grid``-point t grid.
    """
    n = eta.dim
    if grid is None:
        grid = 17 if n == 1 else 5
    if grid < 3:
        raise ValueError("grid must have at least 3 points per axis")
    tol = domain.tau_dom if tol is None else tol
    pts = domain.grid_points(grid)              # (P, n)
    ts = np.linspace(0.0, 1.0, grid)
    X = pts[:, None, None, :]
    Y = pts[None, :, None, :]
    T = ts[None, None, :, None]
    labels = {"x": (0, pts), "y": (1, pts), "t": (2, ts)}

    e_xy = _eval_eta(eta, pts[:, None, :], pts[None, :, :], {"x": (0, pts), "y": (1, pts)})
    e_xy = e_xy[:, :, None, :]
    Z = Y + T * e_xy
    r1 = _eval_eta(eta, np.broadcast_to(Y, Z.shape), Z, labels) + T * e_xy
    r2 = _eval_eta(eta, np.broadcast_to(X, Z.shape), Z, labels) - (1.0 - T) * e_xy

    T1 = ts[None, None, :, None, None]
    T2 = ts[None, None, None, :, None]
    E = e_xy[:, :, :, None, :]
    Yc = pts[None, :, None, None, :]
    Z1 = Yc + T1 * E
    Z2 = Yc + T2 * E
    shape = np.broadcast_shapes(Z1.shape, Z2.shape)
    labels4 = {"x": (0, pts), "y": (1, pts), "t1": (2, ts), "t2": (3, ts)}
    r3 = _eval_eta(eta, np.broadcast_to(Z2, shape), np.broadcast_to(Z1, shape), labels4) \
        - (T2 - T1) * E

    worst, witness = 0.0, {}
    for name, r, labs in (("first", r1, labels), ("second", r2, labels), ("two-parameter", r3, labels4)):
        mag = np.max(np.abs(r), axis=-1)
        k = int(np.argmax(mag))
        if mag.flat[k] > worst:
            worst = float(mag.flat[k])
            idx = np.unravel_index(k, mag.shape)
            witness = {"identity": name}
            for key, (axis, values) in labs.items():
                witness[key] = _as_point(values[idx[axis]])
    return ConditionCReport(worst <= tol, worst, witness, tol, grid)


def check_closure(domain: InvexDomain, grid: Optional[int] = None,
                  t_grid: Optional[int] = None) -> ConditionCReport:
    """Sampled invex closure: u + t eta(v,u) stays in the box inflated by tau_dom."""
    n = domain.dim
    grid = grid or (DEFAULT_GRID if n == 1 else 9)
    t_grid = t_grid or (DEFAULT_T_GRID if n == 1 else 9)
    pts = domain.grid_points(grid)
    ts = np.linspace(0.0, 1.0, t_grid)
    E = _eval_eta(domain.eta, pts[None, :, :], pts[:, None, :],
                  {"u": (0, pts), "v": (1, pts)})
    Z = pts[:, None, None, :] + ts[None, None, :, None] * E[:, :, None, :]
    exc = domain.excess(Z)
    k = int(np.argmax(exc))
    idx = np.unravel_index(k, exc.shape)
    witness = {"u": _as_point(pts[idx[0]]), "v": _as_point(pts[idx[1]]), "t": float(ts[idx[2]])}
    worst = float(exc.flat[k])
    return ConditionCReport(worst <= domain.tau_dom, worst, witness, domain.tau_dom, grid)


# --------------------------------------------------------- classification

def _scaled(gz, bound):
    # relative for large values, absolute below 1; keeps the class tolerance
    # meaningful when g spans many orders of magnitude
    diff = np.subtract(gz, bound)
    scale = np.abs(bound, out=bound if bound.shape == diff.shape else None)
    np.maximum(scale, 1.0, out=scale)
    return np.divide(diff, scale, out=diff)


def _margin(target: str, gz, gu, gv, t):
    if target == PREINVEX:
        return _scaled(gz, (1.0 - t) * gu + t * gv)
    if target == LOG_PREINVEX:
        # one exp over the grid instead of two powers; callers ensure g > 0
        lu, lv = np.log(gu), np.log(gv)
        return _scaled(gz, np.exp(lu + t * (lv - lu)))
    if target == PREQUASIINVEX:
        return _scaled(gz, np.maximum(gu, gv))
    raise ValueError(f"unknown class {target!r}")


def _callable(g):
    return g.value if isinstance(g, ScalarFunction) else g


class GridSample:
    """Values of ``g`` on the (u, v, t) grid of a 1-D invex domain.

    One sample serves several certificates (different classes, or powers
    ``g**s``) without re-evaluating ``g``.
    """

    def __init__(self, g, domain: InvexDomain, grid: int = DEFAULT_GRID,
                 t_grid: int = DEFAULT_T_GRID):
        if domain.dim != 1:
            raise ValueError("classification works on 1-D domains")
        if grid < 2 or t_grid < 2:
            raise ValueError("grid needs at least 2 points per axis")
        self.g = _callable(g)
        self.domain = domain
        self.grid = (grid, grid, t_grid)
        lo, hi = domain.lo[0], domain.hi[0]
        self.lo, self.hi = lo, hi
        self.u = np.linspace(lo, hi, grid)
        self.t = np.linspace(0.0, 1.0, t_grid)
        self.z = self._path(self.u[:, None, None], self.u[None, :, None], self.t[None, None, :])
        self.gu = np.asarray(self.g(self.u), dtype=float)
        self.gz = np.asarray(self.g(self.z), dtype=float)

    def _path(self, U, V, T):
        try:
            eta = self.domain.eta(V, U)
        except DomainError as exc:
            raise NotInvexError(f"eta undefined on the grid: {exc}") from None
        Z = U + T * eta
        tau = self.domain.tau_dom
        out = (Z < self.lo - tau) | (Z > self.hi + tau)
        if np.any(out):
            k = int(np.argmax(out))
            idx = np.unravel_index(k, out.shape)
            Ub, Vb, Tb = np.broadcast_arrays(U, V, T)
            witness = {"u": float(Ub[idx]), "v": float(Vb[idx]), "t": float(Tb[idx])}
            raise NotInvexError(f"u + t*eta(v,u) leaves the domain at {witness}", witness)
        return np.clip(Z, self.lo, self.hi)

    def _check_positive(self):
        for arr in (self.gu, self.gz):
            bad = ~(arr > 0.0)
            if np.any(bad):
                k = int(np.argmax(bad))
                if arr is self.gu:
                    where = {"x": float(self.u[k])}
                else:
                    i, j, l = np.unravel_index(k, arr.shape)
                    where = {"u": float(self.u[i]), "v": float(self.u[j]), "t": float(self.t[l])}
                raise PositivityError(f"function is not positive at {where}", where)

    def margins(self, target: str, power: float = 1.0) -> np.ndarray:
        gu, gz = self.gu, self.gz
        if power != 1.0:
            gu, gz = gu ** power, gz ** power
        return _margin(target, gz, gu[:, None, None], gu[None, :, None], self.t[None, None, :])

    def _refine(self, target, power, idx, best):
        """Two rounds of 10x zoom around the worst cell."""
        g = self.g
        steps = [self.u[1] - self.u[0] if len(self.u) > 1 else 0.0,
                 self.u[1] - self.u[0] if len(self.u) > 1 else 0.0,
                 self.t[1] - self.t[0]]
        centre = [self.u[idx[0]], self.u[idx[1]], self.t[idx[2]]]
        bounds = [(self.lo, self.hi), (self.lo, self.hi), (0.0, 1.0)]
        witness = dict(zip("uvt", (float(c) for c in centre)))
        for _ in range(2):
            axes = []
            for c, h, (lo, hi) in zip(centre, steps, bounds):
                axes.append(np.linspace(max(lo, c - h), min(hi, c + h), 21))
            U, V, T = axes[0][:, None, None], axes[1][None, :, None], axes[2][None, None, :]
            try:
                Z = self._path(U, V, T)
                gu, gv, gz = g(axes[0]), g(axes[1]), g(Z)
            except (DomainError, NotInvexError):
                break
            gu, gv, gz = (np.asarray(a, dtype=float) ** power for a in (gu, gv, gz))
            if target == LOG_PREINVEX and (np.any(gu <= 0) or np.any(gv <= 0)):
                break
            m = _margin(target, gz, gu[:, None, None], gv[None, :, None], T)
            k = int(np.argmax(m))
            i, j, l = np.unravel_index(k, m.shape)
            if m.flat[k] > best:
                best = float(m.flat[k])
                centre = [axes[0][i], axes[1][j], axes[2][l]]
                witness = {"u": float(centre[0]), "v": float(centre[1]), "t": float(centre[2])}
            steps = [h / 10.0 for h in steps]
        return best, witness

    def certify(self, target: str, power: float = 1.0, tol: float = DEFAULT_CLASS_TOL,
                refine: bool = True, fallback: bool = True) -> ClassCertificate:
        """Certificate for ``g**power`` against ``target``.

        With ``fallback=False`` a refuted target is reported as class ``none``
        without testing the weaker classes.
        """
        if target not in CLASSES:
            raise ValueError(f"unknown class {target!r}; expected one of {CLASSES}")
        if target == LOG_PREINVEX:
            self._check_positive()
        margins = {}
        cls = NONE
        target_margin, target_witness = None, None
        for c in reversed(CLASSES[: CLASSES.index(target) + 1]):
            m = self.margins(c, power)
            k = int(np.argmax(m))
            worst = float(m.flat[k])
            margins[c] = worst
            idx = np.unravel_index(k, m.shape)
            if c == target:
                target_margin = worst
                target_witness = {"u": float(self.u[idx[0]]), "v": float(self.u[idx[1]]),
                                  "t": float(self.t[idx[2]])}
                if worst > tol and refine:
                    target_margin, target_witness = self._refine(c, power, idx, worst)
            if worst <= tol:
                cls = c
                break
            if not fallback:
                break
        return ClassCertificate(target, cls, self.grid, tol, target_margin, target_witness, margins)


def classify(g, domain: InvexDomain, target: str = PREINVEX, grid: int = DEFAULT_GRID,
             t_grid: int = DEFAULT_T_GRID, tol: float = DEFAULT_CLASS_TOL,
             power: float = 1.0) -> ClassCertificate:
    """Certify or refute that ``g**power`` belongs to ``target`` on ``domain``.

    Verdicts use the coarse grid only, so nesting between classes holds on
    any fixed grid; a refuted target's witness is then sharpened by local
    zooming. Ties go to the first grid point in (u, v, t) order.
    """
    return GridSample(g, domain, grid, t_grid).certify(target, power, tol)


def chain_values(fu, fv, t):
    """Geometric, arithmetic and max bounds of the class chain."""
    fu, fv, t = (np.asarray(a, dtype=float) for a in (fu, fv, t))
    return fu ** (1.0 - t) * fv ** t, (1.0 - t) * fu + t * fv, np.maximum(fu, fv)


def class_chain_check(f, domain: InvexDomain, grid: int = DEFAULT_GRID,
                      t_grid: int = DEFAULT_T_GRID, tol: float = DEFAULT_CLASS_TOL) -> ChainReport:
    """Pointwise check of f(u)^(1-t) f(v)^t <= (1-t) f(u) + t f(v) <= max{f(u), f(v)}."""
    g = _callable(f)
    u = np.linspace(domain.lo[0], domain.hi[0], grid)
    t = np.linspace(0.0, 1.0, t_grid)
    fu = np.asarray(g(u), dtype=float)
    if np.any(~(fu > 0)):
        k = int(np.argmax(~(fu > 0)))
        raise PositivityError(f"function is not positive at x={u[k]!r}", {"x": float(u[k])})
    gm, am, mx = chain_values(fu[:, None, None], fu[None, :, None], t[None, None, :])
    slack = np.minimum(am - gm, mx - am)
    k = int(np.argmax(-slack))
    i, j, l = np.unravel_index(k, slack.shape)
    worst = float(slack.flat[k])
    return ChainReport(worst >= -tol, worst, {"u": float(u[i]), "v": float(u[j]), "t": float(t[l])})
