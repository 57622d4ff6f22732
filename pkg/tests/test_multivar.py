import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhinvex.bounds import ParameterError, tfd_value, tz_value, verify
from hhinvex.invex import EtaMap, InvexDomain, ScalarFunction
from hhinvex.multivar import (CertificationError, ConditionCError, PathAccumulator, PathError,
                              check_path_logpreinvex, check_q_power_equivalence, parse_function,
                              parse_point, path_restriction, verify_multivar)

ETA2 = EtaMap.canonical(2)
F_EXP = parse_function("exp(z1+z2)", 2)
X0, Y1 = np.zeros(2), np.ones(2)


def _phi_integral_oracle(a, b):
    # phi(t) = e^{2t}, Phi(t) = (e^{2t} - 1)/2, int Phi = e^{2t}/4 - t/2
    Phi = lambda t: (math.exp(2 * t) - 1) / 2
    int_Phi = lambda t: math.exp(2 * t) / 4 - t / 2
    return abs((int_Phi(b) - int_Phi(a)) / (b - a) - Phi((a + b) / 2))


def test_exp_path_example():
    ev = verify_multivar("Eq1", F_EXP, X0, Y1, ETA2, 0.2, 0.8)
    assert ev.lhs == pytest.approx(_phi_integral_oracle(0.2, 0.8), abs=1e-10)
    assert ev.lhs == pytest.approx(0.083029, abs=1e-6)
    assert ev.rhs == pytest.approx(tz_value(0.6, math.exp(0.4), math.exp(1.6)), rel=1e-14)
    assert ev.rhs == pytest.approx(0.420122, abs=1e-6)
    assert ev.verdict == "holds"
    assert ev.details["certificate"]["class"] == "log-preinvex"


def test_holder_form():
    ev = verify_multivar("Eq2", F_EXP, X0, Y1, ETA2, 0.2, 0.8, p=2)
    assert ev.rhs == pytest.approx(tfd_value(0.6, math.exp(0.4), math.exp(1.6), 2, 2), rel=1e-14)
    with pytest.raises(ParameterError):
        verify_multivar("Eq2", F_EXP, X0, Y1, ETA2, 0.2, 0.8)


def test_zero_eta_is_degenerate_limit():
    ev = verify_multivar("Eq1", F_EXP, X0, Y1, EtaMap.from_source("0, 0", 2), 0.2, 0.8)
    assert ev.lhs == pytest.approx(0.0, abs=1e-15)
    assert ev.rhs == pytest.approx(0.6 * 1.0 / 4, rel=1e-14)
    assert ev.verdict == "holds"


@pytest.mark.parametrize("a, b", [(0.0, 0.5), (0.5, 1.0), (0.6, 0.4), (-0.1, 0.3)])
def test_parameter_range(a, b):
    with pytest.raises(ParameterError):
        verify_multivar("Eq1", F_EXP, X0, Y1, ETA2, a, b)


def test_condition_c_gate():
    bad = EtaMap.from_source("2*(v1-u1), 2*(v2-u2)", 2)
    with pytest.raises(ConditionCError) as info:
        verify_multivar("Eq1", F_EXP, X0, Y1, bad, 0.2, 0.8)
    assert not info.value.report.passed


def test_certificate_gate():
    f = parse_function("exp(0-(z1+z2)^2)", 2)
    with pytest.raises(CertificationError):
        verify_multivar("Eq1", f, X0, Y1, ETA2, 0.2, 0.8)
    ev = verify_multivar("Eq1", f, X0, Y1, ETA2, 0.2, 0.8, require_certificate=False)
    assert math.isfinite(ev.margin)


def test_path_must_stay_in_domain():
    box = InvexDomain((0.0, 0.0), (0.5, 0.5), ETA2)
    with pytest.raises(PathError) as info:
        path_restriction(F_EXP, X0, Y1, ETA2, domain=box)
    assert 0 < info.value.t <= 1


def test_path_certificate_and_points():
    cert = check_path_logpreinvex(F_EXP, X0, Y1, ETA2)
    assert cert.certified and "eta-path" in cert.label
    path = path_restriction(F_EXP, X0, Y1, ETA2)
    assert path.endpoint.tolist() == [1.0, 1.0]
    assert path.phi(np.array([0.0, 0.5])) == pytest.approx([1.0, math.e])


def test_accumulator_against_closed_form():
    path = path_restriction(F_EXP, X0, Y1, ETA2)
    acc = PathAccumulator(path.phi)
    for t in (0.0, 0.013, 0.5, 0.77, 1.0):
        value, err = acc.evaluate(t)
        assert value == pytest.approx((math.exp(2 * t) - 1) / 2, abs=max(err, 1e-13))


def test_parse_point():
    assert parse_point("0, 1.5").tolist() == [0.0, 1.5]
    with pytest.raises(ValueError):
        parse_point("1, x")


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.05, 0.45), st.floats(0.55, 0.95))
def test_one_dimensional_consistency(alpha, beta, x, y, a, b):
    # Eq1 on a 1-D path equals the 1-D log-mean bound applied to Phi itself
    eta_len = y - x
    if abs(alpha * eta_len) < 1e-3:
        return
    f = parse_function(f"exp({alpha!r}*z1+{beta!r})", 1)
    ev = verify_multivar("Eq1", f, np.array([x]), np.array([y]), EtaMap.canonical(1), a, b)
    k = alpha * eta_len
    Phi = ScalarFunction.from_source(
        f"(exp({k!r}*x+{alpha * x + beta!r}) - exp({alpha * x + beta!r}))/{k!r}")
    one_d = verify("Tz", Phi, EtaMap.canonical(), a, b)
    assert abs(ev.lhs - one_d.lhs) <= ev.error_budget + one_d.error_budget + 1e-14
    assert ev.rhs == pytest.approx(one_d.rhs, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["exp(3*t^2)", "exp(0-t^2)", "1 + t", "exp(t)", "2 + sin(5*t)"]),
       st.floats(0.5, 6))
def test_q_power_equivalence(src, q):
    from hhinvex.expr import parse
    phi = parse(src, ["t"]).vectorized
    report = check_q_power_equivalence(phi, q, grid=17)
    assert report.agree
    assert report.phi_certified == report.power_certified
    assert report.max_scaling_error < 1e-12
