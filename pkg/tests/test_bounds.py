import math

import mpmath
import pytest
from hypothesis import assume, given, settings, strategies as st

from hhinvex.bounds import (EPS_LM, LogDomainError, OrientationError, ParameterError,
                            canonical_theorem, classical_gap, conjugate, hh_chain_check,
                            hh_identity_residual, log_mean_ratio, midpoint_gap, rhs, rhs_T31,
                            rhs_T32, rhs_T34, rhs_Tfd, rhs_Tz, t31_value, t32_value, t33_value,
                            t34_value, t35_value, tfd_value, tight_kernel, trapezoid_gap,
                            tz_value, verdict_for, verify)
from hhinvex.invex import EtaMap, ScalarFunction

V_U = EtaMap.canonical()
SQ = ScalarFunction.from_source("x^2")
EXP = ScalarFunction.from_source("exp(x)")

mpmath.mp.dps = 40


# --------------------------------------------------------------- spot values

def test_square_on_unit_interval():
    gap = midpoint_gap(SQ, V_U, 0, 1)
    assert gap.value == pytest.approx(1 / 12, abs=1e-12)
    assert rhs_T31(SQ, V_U, 0, 1) == pytest.approx(0.25, abs=1e-12)
    # A = 0, B = 2: closed forms evaluated in high precision
    r32 = mpmath.mpf(1) / 16 * mpmath.sqrt(mpmath.mpf(4) / 3) * (2 + mpmath.sqrt(12))
    r34 = (mpmath.sqrt(mpmath.mpf(4) / 3) + mpmath.sqrt(mpmath.mpf(8) / 3)) / 8
    assert rhs_T32(SQ, V_U, 0, 1, 2) == pytest.approx(float(r32), abs=1e-12)
    assert rhs_T34(SQ, V_U, 0, 1, 2) == pytest.approx(float(r34), abs=1e-12)
    assert rhs_T34(SQ, V_U, 0, 1, 2) == pytest.approx(0.3484617125, abs=1e-9)


def test_square_chain_values():
    chain = hh_chain_check(SQ, V_U, 0, 1)
    assert chain.values == pytest.approx((0.25, 1 / 3, 0.5, 0.5), abs=1e-12)
    assert chain.passed


def test_exp_on_unit_interval():
    e = math.e
    assert midpoint_gap(EXP, V_U, 0, 1).value == pytest.approx(e - 1 - math.sqrt(e), abs=1e-12)
    assert rhs_Tz(EXP, V_U, 0, 1) == pytest.approx((math.sqrt(e) - 1) ** 2, abs=1e-12)
    assert rhs_Tfd(EXP, V_U, 0, 1, 2, 2) == pytest.approx(math.sqrt(e - 1) / (2 * math.sqrt(3)),
                                                          abs=1e-12)


def test_background_bounds_on_square():
    assert trapezoid_gap(SQ, V_U, 0, 1).value == pytest.approx(1 / 6, abs=1e-12)
    assert rhs("T2.3", SQ, V_U, 0, 1) == pytest.approx(0.5)
    assert rhs("T2.2", SQ, V_U, 0, 1, p=2) == pytest.approx(16 / (2 * math.sqrt(3)), rel=1e-14)
    ev = verify("T2.2", SQ, V_U, 0, 1, p=2)
    assert ev.verdict == "holds" and ev.notes


# --------------------------------------------------------- closed-form oracle

def _mp_t32(L, A, B, p):
    L, A, B, p = map(mpmath.mpf, (L, A, B, p))
    r = p / (p - 1)
    return L / 16 * (4 / (p + 1)) ** (1 / p) * ((3 * A ** r + B ** r) ** (1 / r) + (A ** r + 3 * B ** r) ** (1 / r))


def _mp_tz(L, A, B):
    L, A, B = map(mpmath.mpf, (L, A, B))
    if A == B:
        return L * A / 4
    return L * ((mpmath.sqrt(B) - mpmath.sqrt(A)) / (mpmath.log(B) - mpmath.log(A))) ** 2


pos = st.floats(1e-3, 1e3)


@settings(max_examples=200)
@given(st.floats(1e-3, 10), pos, pos, st.floats(1.01, 20))
def test_t32_against_high_precision(L, A, B, p):
    assert t32_value(L, A, B, p) == pytest.approx(float(_mp_t32(L, A, B, p)), rel=1e-12)


@settings(max_examples=200)
@given(st.floats(1e-3, 10), pos, pos)
def test_tz_against_high_precision(L, A, B):
    assert tz_value(L, A, B) == pytest.approx(float(_mp_tz(L, A, B)), rel=1e-12)


# -------------------------------------------------------------- invariants

@settings(max_examples=300)
@given(st.floats(1e-3, 10), st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1.01, 50))
def test_relaxation_order(L, A, B, p):
    assert t32_value(L, A, B, p) <= t33_value(L, A, B, p) * (1 + 1e-13)
    q = p
    assert t34_value(L, A, B, q) <= t35_value(L, A, B, q) * (1 + 1e-13)


@settings(max_examples=300)
@given(st.floats(1e-3, 10), st.floats(0, 1e3), st.floats(0, 1e3))
def test_q_equal_one_reduces_to_t31(L, A, B):
    base = t31_value(L, A, B)
    assert abs(t34_value(L, A, B, 1.0) - base) <= 1e-12 * base + 1e-300
    assert abs(t35_value(L, A, B, 1.0) - base) <= 1e-12 * base + 1e-300


@pytest.mark.parametrize("delta", [1e-4, 1e-6, 1e-10, 1e-14, 0.0])
def test_log_mean_continuity(delta):
    A, B = 1.0, 1.0 + delta
    exact = float(_mp_tz(1, A, B))
    assert math.isfinite(tz_value(1.0, A, B))
    assert tz_value(1.0, A, B) == pytest.approx(exact, rel=1e-9)


def test_log_mean_switch_is_continuous():
    for s in (0.5, 1.0, 3.0):
        below = log_mean_ratio(2.0, 2.0 * math.exp(0.999 * EPS_LM), s)
        above = log_mean_ratio(2.0, 2.0 * math.exp(1.001 * EPS_LM), s)
        assert below == pytest.approx(above, rel=1e-7)


def test_log_mean_needs_positive_arguments():
    with pytest.raises(LogDomainError):
        log_mean_ratio(0.0, 1.0, 0.5)
    with pytest.raises(LogDomainError):
        rhs_Tz(SQ, V_U, 0, 1)          # |f'(0)| = 0


_SMOOTH = ["x^2", "exp(x)", "x^4 + x", "sin(x)", "cos(2*x)", "exp(x)*x", "x^6 - x^3"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_SMOOTH), st.floats(-2, 1), st.floats(0.05, 2), st.floats(0.2, 2))
def test_identity_residual_vanishes(src, a, length, scale):
    f = ScalarFunction.from_source(src)
    eta = EtaMap.from_source(f"{scale!r}*(v-u)")
    b = a + length
    res = hh_identity_residual(f, eta, a, b)
    assert res.value <= max(res.error, 1e-12) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(-2, 1), st.floats(0.01, 3))
def test_tz_equals_kernel_for_log_affine(alpha, beta, a, length):
    assume(abs(alpha) > 1e-3)
    f = ScalarFunction.from_source(f"exp({alpha!r}*x+{beta!r})")
    b = a + length
    k = tight_kernel(f, V_U, a, b)
    assert rhs_Tz(f, V_U, a, b) == pytest.approx(k.value, rel=1e-9)
    assert verify("Tz", f, V_U, a, b).verdict == "holds"


@pytest.mark.parametrize("src", ["x^2", "x^4 + x", "exp(x)", "abs(x - 0.3)^1.5"])
def test_every_bound_dominates_kernel(src):
    f = ScalarFunction.from_source(src)
    a, b = -0.5, 1.2
    k = tight_kernel(f, V_U, a, b).value
    gap = midpoint_gap(f, V_U, a, b).value
    assert gap <= k + 1e-12
    for th, p, q in [("T3.1", None, None), ("T3.2", 3, None), ("T3.3", 3, None),
                     ("T3.4", None, 2), ("T3.5", None, 2)]:
        assert rhs(th, f, V_U, a, b, p, q) >= k - 1e-12


def test_classical_corollaries_match():
    f = ScalarFunction.from_source("exp(0.7*x) + 0.1")
    a, b = -0.3, 1.1
    for general, classical, kw in [("T3.1", "T1.2", {}), ("Tz", "Cq", {}),
                                   ("Tfd", "Cq1", {"p": 3.0})]:
        g = verify(general, f, V_U, a, b, **kw)
        c = verify(classical, f, V_U, a, b, **kw)
        assert c.rhs == pytest.approx(g.rhs, rel=1e-12)
        assert c.lhs == pytest.approx(g.lhs, rel=1e-12)
    assert classical_gap(f, a, b).value == pytest.approx(midpoint_gap(f, V_U, a, b).value, rel=1e-14)


# ------------------------------------------------------------- verification

def test_fd_as_printed_is_violated_for_steep_exponential():
    f = ScalarFunction.from_source("exp(10*x)")
    ev = verify("Tfd", f, V_U, 0, 1, p=2)
    assert ev.verdict == "violated"
    assert ev.lhs / ev.rhs > 10
    assert any("as-printed" in n for n in ev.notes)
    # the pre-relaxation kernel still dominates
    assert tight_kernel(f, V_U, 0, 1).value >= ev.lhs


def test_verdict_boundaries():
    assert verdict_for(0.0, 0.0) == "holds"
    assert verdict_for(-1e-12, 1e-12) == "holds"
    assert verdict_for(-1e-12 - 5e-10, 1e-12, tau=1e-9) == "inconclusive"
    assert verdict_for(-1e-6, 1e-12, tau=1e-9) == "violated"


def test_orientation_and_parameters():
    with pytest.raises(OrientationError):
        verify("T3.1", SQ, V_U, 1, 0)
    with pytest.raises(ParameterError):
        verify("T3.2", SQ, V_U, 0, 1, p=0.5)
    with pytest.raises(ParameterError):
        verify("T3.4", SQ, V_U, 0, 1, q=0.5)
    with pytest.raises(ParameterError):
        conjugate(2.0, 3.0)
    assert conjugate(q=1.0) == (math.inf, 1.0)
    assert conjugate(p=3.0) == (3.0, 1.5)
    # q = 1 pairs with p = inf: no Hoelder factor, log-mean limit s*A^s with s = 1/2
    assert tfd_value(1.0, 1.0, 1.0, math.inf, 1.0) == pytest.approx(0.5)


def test_theorem_names():
    assert canonical_theorem("T2.1") == "HHchain"
    with pytest.raises(ValueError):
        canonical_theorem("T9.9")


def test_chain_holds_for_preinvex():
    for src in ("x^2", "exp(x)", "abs(x)"):
        ev = verify("HHchain", ScalarFunction.from_source(src), V_U, -1, 0.7)
        assert ev.verdict == "holds"
        v = ev.details["chain"]
        assert v[0] <= v[1] + 1e-12 <= v[2] + 2e-12
