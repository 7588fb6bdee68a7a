import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opfrelax.caseio import (
    Branch,
    CaseSyntaxError,
    NetworkError,
    dump_network_json,
    format_case,
    load_case,
    network_from_dict,
    network_to_dict,
    parse_case,
    validate_network,
)

from conftest import BUNDLED, case_path, case_text

BUSES3 = [(1, 3, 0, 0, 1.1, 0.9), (2, 1, 50, 10, 1.1, 0.9), (3, 1, 20, 5, 1.1, 0.9)]
GENS = [(1, 100, -100, 200, 0)]
TRI = [(1, 2, 0.01, 0.1, 100, -30, 30), (2, 3, 0.02, 0.2, 100, -30, 30), (3, 1, 0.01, 0.1, 100, -30, 30)]


def test_pure_reactance_admittance():
    br = Branch(1, 2, 0.0, 1.0)
    assert br.g == 0.0 and br.b == -1.0


def test_unit_impedance_admittance():
    br = Branch(1, 2, 1.0, 1.0)
    assert br.g == pytest.approx(0.5) and br.b == pytest.approx(-0.5)


def test_missing_field_names_row():
    text = case_text(BUSES3, GENS, TRI).replace("2 1 50 10 0 0 1 1 0 345 1 1.1 0.9;", "2 1 50 10 0 0 1 1 0 345 1 1.1;")
    with pytest.raises(CaseSyntaxError, match="bus row 2"):
        parse_case(text)


def test_per_unit_conversion():
    net = parse_case(case_text(BUSES3, GENS, TRI, costs=[(0.1, 5, 1)]))
    assert net.bus(2).pd == pytest.approx(0.5)
    assert net.generators[0].pmax == pytest.approx(2.0)
    assert net.branches[0].rate_a == pytest.approx(1.0)
    assert net.branches[0].angmax == pytest.approx(math.radians(30))
    g = net.generators[0]
    assert (g.c2, g.c1, g.c0) == (0.1, 5, 1)


def test_unknown_bus_rejected():
    bad = TRI + [(1, 9, 0.01, 0.1, 100, -30, 30)]
    with pytest.raises(NetworkError, match="unknown bus 9"):
        parse_case(case_text(BUSES3, GENS, bad))


def test_zero_impedance_rejected():
    bad = [(1, 2, 0, 0, 100, -30, 30)] + TRI[1:]
    with pytest.raises(NetworkError, match="zero-impedance"):
        parse_case(case_text(BUSES3, GENS, bad))


def test_disconnected_rejected():
    with pytest.raises(NetworkError, match="disconnected"):
        parse_case(case_text(BUSES3, GENS, TRI[:1]))


def test_zero_angle_limits_mean_unbounded():
    rows = [(1, 2, 0.01, 0.1, 100, 0, 0), (2, 3, 0.02, 0.2, 100, -360, 360), (3, 1, 0.01, 0.1, 100, -30, 30)]
    net = parse_case(case_text(BUSES3, GENS, rows))
    assert not net.branches[0].has_angle_bounds
    assert not net.branches[1].has_angle_bounds
    assert net.branches[2].has_angle_bounds


def test_parallel_branches_merge():
    rows = TRI + [(2, 1, 0.01, 0.1, 50, -20, 25)]
    net = parse_case(case_text(BUSES3, GENS, rows))
    assert len(net.branches) == 3
    br = net.branch_between(1, 2)
    # two identical lines in parallel halve the impedance
    assert br.r == pytest.approx(0.005) and br.x == pytest.approx(0.05)
    assert br.rate_a == pytest.approx(0.5)
    assert br.angmin == pytest.approx(math.radians(-25))
    assert br.angmax == pytest.approx(math.radians(20))


def test_validate_clean_three_bus():
    assert validate_network(parse_case(case_text(BUSES3, GENS, TRI))) == []


def test_validate_vmin_zero():
    net = parse_case(case_text([(1, 3, 0, 0, 1.1, 0.0)] + BUSES3[1:], GENS, TRI))
    msgs = [d.message for d in validate_network(net)]
    assert "voltage lower bound must be strictly positive" in msgs


def test_validate_angle_range():
    deg = math.degrees(1.6)
    rows = [(1, 2, 0.01, 0.1, 100, -deg, deg)] + TRI[1:]
    diags = validate_network(parse_case(case_text(BUSES3, GENS, rows)))
    assert [d.code for d in diags] == ["angle-range"]
    assert diags[0].element == "branch 1-2"


def test_validate_model_mismatch_warning():
    text = case_text(BUSES3, GENS, TRI).replace("1 2 0.01 0.1 0 100", "1 2 0.01 0.1 0.05 100")
    diags = validate_network(parse_case(text))
    assert [(d.code, d.severity) for d in diags] == [("model-mismatch", "warning")]


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_cases_validate(name):
    assert validate_network(load_case(case_path(name))) == []


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip_text_and_json(name):
    net = load_case(case_path(name))
    again = parse_case(format_case(net), name=net.name)
    assert again == net
    assert network_from_dict(network_to_dict(net)) == net
    assert '"baseMVA"' in dump_network_json(net)


@pytest.mark.parametrize("name", BUNDLED)
def test_admittance_identity(name):
    for br in load_case(case_path(name)).branches:
        assert br.g * br.r - br.b * br.x == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 1000.0))
def test_per_unit_scaling_invariant(k):
    base = case_text(BUSES3, GENS, TRI, costs=[(0, 1, 0)])
    scaled_buses = [(i, t, pd * k, qd * k, vmax, vmin) for i, t, pd, qd, vmax, vmin in BUSES3]
    scaled_gens = [(b, qmax * k, qmin * k, pmax * k, pmin * k) for b, qmax, qmin, pmax, pmin in GENS]
    scaled_br = [(f, t, r, x, rate * k, a, b) for f, t, r, x, rate, a, b in TRI]
    a = parse_case(base)
    b = parse_case(case_text(scaled_buses, scaled_gens, scaled_br, costs=[(0, 1, 0)], base=100 * k))
    for x, y in zip(a.buses, b.buses):
        assert x.pd == pytest.approx(y.pd, abs=1e-12) and x.qd == pytest.approx(y.qd, abs=1e-12)
    for x, y in zip(a.generators, b.generators):
        assert x.pmax == pytest.approx(y.pmax, abs=1e-12) and x.qmin == pytest.approx(y.qmin, abs=1e-12)
    for x, y in zip(a.branches, b.branches):
        assert x.rate_a == pytest.approx(y.rate_a, abs=1e-12)
