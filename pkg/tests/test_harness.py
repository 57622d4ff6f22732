import random

import numpy as np
import pytest

from hhinvex.bounds import verify
from hhinvex.expr import parse
from hhinvex.harness import (HIST_EDGES, CampaignConfig, ConfigError, FamilySpec, expand_theorems,
                             run_campaign, run_trial, sample_instance, search_counterexamples,
                             summarize, worker_count)
from hhinvex.invex import EtaMap, ScalarFunction


def cfg(**kw):
    base = {"families": ["poly-convex"], "theorems": ["T3.1"], "trials": 5, "seed": 1}
    base.update(kw)
    return CampaignConfig.from_dict(base)


# ------------------------------------------------------------------ config

@pytest.mark.parametrize("bad", [
    {"theorems": ["T9.9"]},
    {"families": ["quartic"]},
    {"families": [{"id": "custom-expression"}]},
    {"families": [{"id": "custom-expression", "expr": "x +"}]},
    {"trials": -1},
    {"seed": 1.5},
    {"p_values": [1.0]},
    {"q_values": [0.5]},
    {"domain": {"lo": 1, "hi": 0}},
    {"eta": "v -"},
    {"tolerances": {"quad": 0}},
    {"tolerances": {"nonsense": 1}},
    {"colour": "blue"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        cfg(**bad)


def test_config_round_trip():
    c = cfg(families=[{"id": "exp-affine", "ranges": {"alpha": [0.5, 1.0]}}], theorems=["T2.1"])
    assert CampaignConfig.from_dict(c.to_dict()) == c
    assert c.theorems == ("HHchain",)


def test_expand_theorems():
    rows = expand_theorems(["T3.1", "T3.2", "T3.4", "Tfd"], (2.0, 3.0), (1.0,))
    assert ("T3.1", None, None) in rows
    assert ("T3.2", 3.0, None) in rows and ("T3.4", None, 1.0) in rows
    assert ("Tfd", 2.0, 2.0) in rows and ("Tfd", 3.0, 1.5) in rows
    assert len(rows) == 1 + 2 + 1 + 2


# --------------------------------------------------------------- sampling

@pytest.mark.parametrize("family", ["poly-convex", "exp-affine", "exp-convex", "abs-kink"])
def test_sampled_members_parse_and_match_coefficients(family):
    rng = np.random.default_rng(0)
    for _ in range(20):
        inst = sample_instance(FamilySpec(family), rng, (-2.0, 2.0))
        e = parse(inst["expr"], ["x"])
        assert np.all(np.isfinite(e.vectorized(np.linspace(-2, 2, 9))))
        if family == "exp-affine":
            c = inst["coefficients"]
            assert e.evaluate({"x": 0.7}) == pytest.approx(np.exp(c["alpha"] * 0.7 + c["beta"]),
                                                           rel=1e-14)


def test_exp_affine_members_are_log_affine():
    rng = np.random.default_rng(5)
    inst = sample_instance(FamilySpec("exp-affine"), rng, (-2.0, 2.0))
    g = parse(inst["expr"], ["x"]).vectorized
    x = np.linspace(-2, 2, 7)
    second = np.diff(np.log(g(x)), 2)
    assert np.max(np.abs(second)) < 1e-12


# ------------------------------------------------------------------ trials

def test_pinned_square_on_unit_interval():
    c = cfg(families=[{"id": "poly-convex", "expr": "x^2"}], trials=1, interval=[0, 1])
    rep = run_campaign(c, workers=1).reports[0]
    (row,) = rep.evaluations
    assert row["verdict"] == "holds"
    assert row["margin"] == pytest.approx(0.25 - 1 / 12, abs=1e-12)


def test_empty_campaign():
    res = run_campaign(cfg(trials=0), workers=1)
    assert res.reports == []
    assert res.summary["trials"] == 0 and res.summary["violations"] == 0
    assert res.summary["theorems"] == {}


def test_trial_is_reproducible():
    c = cfg(families=["poly-convex", "exp-affine", "abs-kink"],
            theorems=["T2.1", "T3.2", "Tz"], trials=3, seed=99)
    for t in range(3):
        assert run_trial(c, t).to_dict() == run_trial(c, t).to_dict()
    assert run_trial(c, 0).to_dict() != run_trial(c, 1).to_dict()


def test_results_independent_of_schedule():
    c = cfg(families=["exp-affine", "poly-convex"], theorems=["T3.1", "Tz"], trials=80, seed=3)
    serial = run_campaign(c, workers=1)
    parallel = run_campaign(c, workers=2)
    assert [r.to_dict() for r in serial.reports] == [r.to_dict() for r in parallel.reports]
    assert serial.summary == parallel.summary


def test_summary_is_order_insensitive():
    c = cfg(families=["exp-affine"], theorems=["Tz", "Tfd"], trials=30, seed=11)
    reports = run_campaign(c, workers=1).reports
    shuffled = reports[:]
    random.Random(0).shuffle(shuffled)
    assert summarize(shuffled) == summarize(reports)


def test_histogram_layout():
    c = cfg(families=["exp-affine"], theorems=["Tz"], trials=20, seed=2)
    s = run_campaign(c, workers=1).summary
    hist = s["theorems"]["Tz"]["histogram"]
    assert len(hist["counts"]) == 64 and len(HIST_EDGES) == 65
    assert sum(hist["counts"]) + hist["below"] + hist["above"] == s["theorems"]["Tz"]["evaluated"]


def test_certification_precedes_verification():
    # x^3 is not preinvex, so the chain is skipped; |f'| = 3x^2 is convex, so T3.1 runs
    c = cfg(families=[{"id": "custom-expression", "expr": "x^3"}], theorems=["T2.1", "T3.1"],
            trials=10)
    res = run_campaign(c, workers=1)
    chain = res.summary["theorems"]["HHchain"]
    assert chain["skipped"] == 10 and chain["violated"] == 0
    assert res.summary["theorems"]["T3.1"]["holds"] == 10
    for rep in res.reports:
        assert rep.evaluations[0]["classification"] == "precondition-unmet"


def test_non_convex_derivative_is_skipped():
    c = cfg(families=[{"id": "custom-expression", "expr": "x^4 - 2*x^2"}],
            theorems=["T3.1", "T3.3"], p_values=[2], trials=10)
    s = run_campaign(c, workers=1).summary
    assert s["violations"] == 0
    assert s["theorems"]["T3.1"]["skipped"] == 10


def test_preinvex_campaign_has_no_violations():
    c = cfg(families=["poly-convex", "exp-convex", "abs-kink"],
            theorems=["T2.1", "T3.1", "T3.2", "T3.3", "T3.4", "T3.5"], trials=150, seed=8)
    s = run_campaign(c, workers=1).summary
    assert s["violations"] == 0
    assert s["theorems"]["T3.2"]["evaluated"] > 0
    assert s["relaxation_order"]["T3.2<=T3.3"]["failed"] == 0
    assert s["relaxation_order"]["T3.4<=T3.5"]["failed"] == 0


def test_fd_violations_are_tagged_and_gated():
    c = cfg(families=["exp-affine"], theorems=["Tz", "Tfd"], trials=60, seed=4)
    res = run_campaign(c, workers=1)
    s = res.summary
    assert s["theorems"]["Tz"]["violated"] == 0
    assert s["theorems"]["Tfd"]["violated"] > 0
    assert len(s["violation_list"]) == s["violations"]
    for v in s["violation_list"]:
        assert v["classification"] == "paper-as-printed-violation"
        assert v["key"].startswith("Tfd")
        assert v["gate_verdict"] == "violated"
        assert v["kernel_dominates_lhs"] is True


def test_search_counterexamples():
    proven = cfg(families=["poly-convex", "exp-affine"], theorems=["T3.1", "T3.4"],
                 q_values=[2], trials=15, seed=6)
    assert search_counterexamples(proven, workers=1, steps=20) == []
    printed = cfg(families=[{"id": "exp-affine", "ranges": {"alpha": [2.5, 3.0]}}],
                  theorems=["Tfd"], p_values=[2], trials=3, seed=6)
    found = search_counterexamples(printed, workers=1, steps=20)
    assert found
    for v in found:
        assert v["classification"] == "paper-as-printed-violation"
        assert "tight_kernel" in v
        # the reported point replays through the public API
        f = ScalarFunction.from_source(v["expr"])
        ev = verify("Tfd", f, EtaMap.canonical(), v["a"], v["b"], p=2)
        assert ev.margin == pytest.approx(v["margin"], rel=1e-9)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("HHINVEX_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("HHINVEX_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("HHINVEX_THREADS", "lots")
    assert worker_count() >= 1
