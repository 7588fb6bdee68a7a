import json

import pytest

from opfrelax.caseio import load_case
from opfrelax.cuts import separate
from opfrelax.graph import tree_decomposition
from opfrelax.pipeline import GapReport, PipelineError, RunConfig, gap_percent, lazy_psdp, report, run

from conftest import BUNDLED, case_path


def config(name, tier="psdp", **kw):
    return RunConfig(case=case_path(name), relaxation=tier, **kw)


def test_gap_formula():
    assert round(gap_percent(100.0, 95.0), 2) == 5.00
    assert gap_percent(100.0, 100.0) == 0.0
    assert gap_percent(0.0, -1.0) is None
    assert gap_percent(None, 1.0) is None


def sample_report(**kw):
    base = dict(
        case="case5_ring",
        relaxation="psdp",
        heuristic_objective=100.0,
        relaxation_objective=95.0,
        gap_percent=5.0,
        heuristic_status="local-optimal",
        relaxation_status="optimal",
        cut_counts={2: 7, 3: 3},
        separation_rounds=2,
        runtimes={"parse": 0.001, "solve": 0.5},
        lazy=True,
    )
    base.update(kw)
    return GapReport(**base)


def test_json_round_trip():
    r = sample_report()
    assert GapReport.from_json(r.to_json()) == r
    assert json.loads(report(r, "json"))["gap_percent"] == 5.0


def test_json_rejects_unknown_fields():
    data = json.loads(sample_report().to_json())
    data["bogus"] = 1
    with pytest.raises(ValueError):
        GapReport.from_json(json.dumps(data))


def test_table_layout():
    text = report([sample_report(), sample_report(case="other", gap_percent=3.0)])
    lines = text.splitlines()
    assert lines[0].split()[:2] == ["case", "tier"]
    assert "5.00" in lines[2] and "2:7/3:3" in lines[2]
    assert lines[-1] == "mean gap over 2 runs: 4.00%"


def test_table_excludes_warned_runs_from_mean():
    text = report([sample_report(), sample_report(gap_percent=9.0, numerical_warning=True)])
    assert "mean gap over 1 runs: 5.00%" in text
    assert "excluded from averages" in text


def test_invalid_config():
    with pytest.raises(ValueError):
        RunConfig(case="x.m", relaxation="sdp")
    with pytest.raises(ValueError):
        RunConfig(case="x.m", max_minor_dim=1)
    with pytest.raises(ValueError):
        RunConfig(case="x.m", output="csv")


def test_parse_error_is_attributed(tmp_path):
    bad = tmp_path / "bad.m"
    bad.write_text("mpc.baseMVA = 100;\n")
    with pytest.raises(PipelineError) as info:
        run(RunConfig(case=str(bad)))
    assert info.value.phase == "parse"


@pytest.fixture(scope="module")
def ring_reports():
    return {t: run(config("case5_ring", t)) for t in ("socp", "psdp", "cycle")}


def test_psdp_gap_not_worse_than_socp(ring_reports):
    socp, psdp = ring_reports["socp"], ring_reports["psdp"]
    assert psdp.gap_percent <= socp.gap_percent + 1e-6
    assert psdp.relaxation_objective >= socp.relaxation_objective * (1 - 1e-6)
    assert psdp.cut_counts == {2: 7, 3: 3}


def test_reports_are_json_ready(ring_reports):
    for r in ring_reports.values():
        assert GapReport.from_json(r.to_json()) == r
        assert r.gap_percent >= -1e-6
        assert not r.numerical_warning


@pytest.mark.parametrize("name", ["case5_ring", "case3_triangle"])
def test_lazy_equals_eager(name):
    eager = run(config(name, heuristic=False))
    lazy = run(config(name, lazy=True, heuristic=False))
    assert lazy.relaxation_objective == pytest.approx(eager.relaxation_objective, rel=1e-5)
    assert lazy.separation_rounds <= 20


def test_prerequisites_present_after_every_round():
    net = load_case(case_path("case5_ring"))
    cfg = config("case5_ring", lazy=True, cuts_per_round=1)
    seen = []

    def check(k, cuts, model):
        active = model.active_minors()
        for s in active:
            if len(s) == 3:
                assert {(s[0], s[1]), (s[0], s[2]), (s[1], s[2])} <= active
        seen.append(k)

    model, res, rounds, _ = lazy_psdp(net, cfg, on_round=check)
    assert seen == list(range(1, rounds + 1))
    assert res.ok
    assert not separate(tree_decomposition(net), res.point, cfg.cut_tol, 3, model.active_minors())


def test_radial_needs_no_cuts():
    r = run(config("case7_radial", lazy=True))
    assert r.separation_rounds == 0
    assert r.cut_counts.get(3, 0) == 0


def test_run_is_deterministic():
    a = run(config("case3_triangle", heuristic=False))
    b = run(config("case3_triangle", heuristic=False))
    assert a.relaxation_objective == pytest.approx(b.relaxation_objective, rel=1e-9, abs=1e-9)


def test_trace_exposes_model_and_rounds():
    trace = {}
    run(config("case5_ring", lazy=True, heuristic=False), trace=trace)
    assert trace["model"].tier == "psdp"
    assert [k for k, _ in trace["rounds"]] == list(range(1, len(trace["rounds"]) + 1))


def test_ac_tier_reports_heuristic_only():
    r = run(config("case2_lossy", "ac"))
    assert r.relaxation_objective is None and r.gap_percent is None
    assert r.heuristic_status in ("optimal", "local-optimal")


@pytest.mark.parametrize("name", BUNDLED)
def test_socp_cycle_tier_between_socp_and_heuristic(name):
    socp = run(config(name, "socp"))
    both = run(config(name, "socp+cycle"))
    assert both.relaxation_objective >= socp.relaxation_objective * (1 - 1e-6) - 1e-6
    assert both.relaxation_objective <= both.heuristic_objective * (1 + 1e-6) + 1e-6
