import math

import numpy as np
import pytest

from opfrelax.caseio import Branch, Bus, Generator, Network
from opfrelax.graph import Cycle, cycle_basis, path_table, tree_decomposition
from opfrelax.model import (
    FlowEquation,
    ModelError,
    QuadraticObjective,
    VariableRegistry,
    add_cycle_constraints,
    add_objective,
    build_ac,
    build_cycle_constraint,
    build_psdp,
    build_socp,
    cycle_polynomials,
    flow_coefficients,
    lift_voltages,
)
from opfrelax.poly import Poly

from conftest import make_net, random_voltages


def two_bus(r=0.0, x=1.0, ang=math.radians(30), base=100.0, gen=None):
    buses = [Bus(1, 0.9, 1.1, kind=3), Bus(2, 0.9, 1.1, pd=1.0)]
    gens = [gen or Generator(1, 0.0, 5.0, -5.0, 5.0, c1=1.0)]
    return Network(base, buses, gens, [Branch(1, 2, r, x, angmin=-ang, angmax=ang)])


def ac_flows(model, v, theta):
    """Evaluate every trigonometric flow at (v, theta) by zeroing its flow variable."""
    reg = model.registry
    x = np.zeros(model.n)
    for i, vi in v.items():
        x[reg[("v", i)]] = vi
        x[reg[("theta", i)]] = theta[i]
    out = {}
    for c in model.constraints:
        if isinstance(c, FlowEquation):
            out[reg.keys[c.idx[4]]] = -c.value(x)
    return out


def lifted_vector(model, v, theta):
    x = model.start()
    for k, val in lift_voltages(model.registry, v, theta).items():
        x[model.registry[k]] = val
    return x


# ---------------------------------------------------------------------------
# AC model

def test_ac_zero_angle_zero_flow():
    m = build_ac(two_bus(r=0.01, x=0.1))
    f = ac_flows(m, {1: 1.0, 2: 1.0}, {1: 0.0, 2: 0.0})
    assert all(abs(val) < 1e-15 for val in f.values())


def test_ac_pure_reactance_flows():
    m = build_ac(two_bus())
    f = ac_flows(m, {1: 1.0, 2: 1.0}, {1: 0.1, 2: 0.0})
    assert f[("p", 1, 2)] == pytest.approx(math.sin(0.1), abs=1e-12)
    assert f[("q", 1, 2)] == pytest.approx(1 - math.cos(0.1), abs=1e-12)


def test_ac_reference_angle_fixed(ring5):
    m = build_ac(ring5)
    lb, ub = m.registry.bounds()
    k = m.registry[("theta", ring5.reference_bus())]
    assert lb[k] == ub[k] == 0.0


def test_ac_flow_gradients(rng, ring5):
    m = build_ac(ring5)
    h = 1e-6
    for c in m.constraints:
        if not isinstance(c, FlowEquation):
            continue
        x = m.start() + rng.normal(scale=0.05, size=m.n)
        g = c.gradient(x)
        for a, k in enumerate(c.idx):
            e = np.zeros(m.n)
            e[k] = h
            assert g[a] == pytest.approx((c.value(x + e) - c.value(x - e)) / (2 * h), rel=1e-6, abs=1e-8)


# ---------------------------------------------------------------------------
# lifting

def test_w_flows_match_trigonometric_flows(rng, ring5):
    ac = build_ac(ring5)
    socp = build_socp(ring5)
    flows = [c for c in socp.constraints if c.tag.startswith("w-flow")]
    for _ in range(200):
        v, theta = random_voltages(ring5, rng)
        trig = ac_flows(ac, v, theta)
        x = lifted_vector(socp, v, theta)
        for c in flows:
            key = socp.registry.keys[c.idx[np.flatnonzero(c.coefs == 1.0)[0]]]
            x[socp.registry[key]] = trig[key]
        for c in flows:
            assert abs(c.value(x)) < 1e-10


def test_rank_one_point_is_soc_tight(rng, ring5):
    m = build_socp(ring5)
    for _ in range(50):
        x = lifted_vector(m, *random_voltages(ring5, rng))
        for c in m.constraints:
            if c.kind == "second-order-cone":
                assert abs(c.value(x)) < 1e-12


def test_soc_violation_and_angle_envelope():
    net = two_bus()
    m = build_socp(net)
    reg = m.registry
    x = m.start()
    x[reg[("w", 1)]] = x[reg[("w", 2)]] = 1.0
    x[reg[("wr", 1, 2)]], x[reg[("wi", 1, 2)]] = 0.8, 0.7
    soc = next(c for c in m.constraints if c.kind == "second-order-cone")
    assert soc.value(x) == pytest.approx(1 - 1.13)
    x[reg[("wr", 1, 2)]], x[reg[("wi", 1, 2)]] = 1.0, 0.6
    upper = next(c for c in m.constraints if c.tag == "angle-max 1-2")
    assert upper.value(x) == pytest.approx(math.tan(math.radians(30)) - 0.6)
    assert upper.value(x) < 0
    assert reg.bounds()[0][reg[("wr", 1, 2)]] == 0.0


def test_unbounded_angles_drop_envelope():
    net = two_bus(ang=math.radians(360))
    m = build_socp(net)
    assert not any(c.tag.startswith("angle") for c in m.constraints)
    assert m.registry.bounds()[0][m.registry[("wr", 1, 2)]] < 0


def test_center_is_strictly_feasible(bundled):
    for m in (build_socp(bundled), build_psdp(bundled)):
        x = m.center
        lb, ub = m.registry.bounds()
        assert np.all((x > lb) | (lb == ub)) and np.all((x < ub) | (lb == ub))
        for c in m.constraints:
            if c.sense == "ge":
                assert c.value(x) > 0, c.tag


# ---------------------------------------------------------------------------
# objective

def test_objective_values():
    net = two_bus(base=1.0, gen=Generator(1, 0, 5, -5, 5, c1=1.0, c2=0.0))
    m = add_objective(build_socp(net), net)
    x = m.start()
    x[m.registry[("pg", 0)]] = 2.0
    assert m.objective_value(x) == pytest.approx(2.0)
    net = two_bus(base=1.0, gen=Generator(1, 0, 5, -5, 5, c1=1.0, c2=1.0))
    m = build_socp(net)
    x = m.start()
    x[m.registry[("pg", 0)]] = 2.0
    assert m.objective_value(x) == pytest.approx(6.0)


def test_negative_quadratic_cost_rejected():
    net = two_bus(gen=Generator(1, 0, 5, -5, 5, c1=1.0, c2=-1.0))
    with pytest.raises(ModelError):
        build_socp(net)
    with pytest.raises(ValueError):
        QuadraticObjective([0], [1.0], [-1.0])


def test_flow_coefficients_core_mode_ignores_taps():
    br = Branch(1, 2, 0.01, 0.1, charging=0.2, tap=1.05, shift=0.1)
    core = flow_coefficients(br)
    plain = flow_coefficients(Branch(1, 2, 0.01, 0.1))
    assert core == plain
    ext = flow_coefficients(br, extended=True)
    assert ext[0][0] == pytest.approx(br.g / 1.05 ** 2)
    assert ext[1][0] == pytest.approx(-(br.b + 0.1) / 1.05 ** 2)


# ---------------------------------------------------------------------------
# P-SDP model

def test_psdp_registers_fillins(ring5):
    bags = tree_decomposition(ring5)
    m = build_psdp(ring5, bags=bags)
    for bag in bags:
        for k, l in bag.fillins:
            assert m.registry.has_pair(k, l)
    dims = sorted(len(s) for s in m.active_minors())
    assert dims.count(3) == 3 and dims.count(2) == 7


def test_psdp_lazy_starts_without_cuts(ring5):
    m = build_psdp(ring5, eager=False)
    assert all(len(s) == 2 for s in m.active_minors())


def test_determinant_constraint_gradient(rng, ring5):
    m = build_psdp(ring5)
    h = 1e-6
    for c in m.constraints:
        if c.kind != "determinant-polynomial":
            continue
        x = m.center + rng.normal(scale=0.01, size=m.n)
        g = c.gradient(x)
        fd = np.array([(c.value(x + h * e) - c.value(x - h * e)) / (2 * h) for e in np.eye(m.n)[c.idx]])
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


# ---------------------------------------------------------------------------
# cycle constraints

def triangle_registry():
    reg = VariableRegistry()
    for i in (1, 2, 3):
        reg.add(("w", i), 0.81, 1.21)
    for k, l in ((1, 2), (2, 3), (3, 1)):
        reg.add(("wr", k, l))
        reg.add(("wi", k, l))
    return reg


def P(*key):
    return Poly.var(key)


def proportional(p, q):
    """p == s q for some s > 0."""
    if set(p.terms) != set(q.terms):
        return False
    ratios = {p.terms[m] / q.terms[m] for m in p.terms}
    s = next(iter(ratios))
    return s > 0 and all(abs(r - s) <= 1e-12 * abs(s) for r in ratios)


def test_triangle_reference_one():
    net = make_net([1, 2, 3], [(1, 2), (2, 3), (3, 1)])
    reg = triangle_registry()
    cyc = Cycle(((1, 2), (2, 3), (3, 1)))
    re, im = cycle_polynomials(cyc, 1, path_table(net, cyc, 1), reg.oriented)
    eq_re = P("wr", 3, 1) * P("wr", 2, 3) - P("wi", 3, 1) * P("wi", 2, 3) - P("w", 3) * P("wr", 1, 2)
    eq_im = P("wi", 3, 1) * P("wr", 2, 3) + P("wr", 3, 1) * P("wi", 2, 3) + P("w", 3) * P("wi", 1, 2)
    assert proportional(re, eq_re) or proportional(re, -eq_re)
    assert proportional(im, eq_im) or proportional(im, -eq_im)


def test_triangle_reference_two_is_rank_one_identity():
    # W12 W31 = w1 conj(W23), the form that holds on every rank-one point
    net = make_net([1, 2, 3], [(1, 2), (2, 3), (3, 1)])
    reg = triangle_registry()
    cyc = Cycle(((1, 2), (2, 3), (3, 1)))
    re, im = cycle_polynomials(cyc, 2, path_table(net, cyc, 2), reg.oriented)
    eq_re = P("wr", 1, 2) * P("wr", 3, 1) - P("wi", 1, 2) * P("wi", 3, 1) - P("w", 1) * P("wr", 2, 3)
    eq_im = P("wr", 1, 2) * P("wi", 3, 1) + P("wi", 1, 2) * P("wr", 3, 1) + P("w", 1) * P("wi", 2, 3)
    assert proportional(re, eq_re) or proportional(re, -eq_re)
    assert proportional(im, eq_im) or proportional(im, -eq_im)


@pytest.mark.parametrize(
    "nodes,edges",
    [
        ([1, 2, 3, 4, 5], [(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (2, 5)]),
        ([1, 2, 3, 4, 5, 6], [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1), (1, 4)]),
        ([1, 2, 3, 4], [(1, 2), (2, 3), (3, 4), (4, 1), (1, 3), (2, 4)]),
    ],
)
def test_cycle_constraints_vanish_on_rank_one(rng, nodes, edges):
    net = make_net(nodes, edges)
    m = add_cycle_constraints(build_psdp(net), net, all_refs=True)
    cons = [c for c in m.constraints if c.kind == "cycle-polynomial"]
    assert cons
    for _ in range(100):
        x = lifted_vector(m, *random_voltages(net, rng))
        for c in cons:
            assert abs(c.value(x)) < 1e-9, c.tag


def test_cycle_constraints_detect_inconsistent_angles(rng):
    net = make_net([1, 2, 3], [(1, 2), (2, 3), (3, 1)])
    m = add_cycle_constraints(build_socp(net), net)
    x = lifted_vector(m, *random_voltages(net, rng))
    k = m.registry[("wi", 1, 2)]
    x[k] += 0.05
    assert max(abs(c.value(x)) for c in m.constraints if c.kind == "cycle-polynomial") > 1e-3


def test_cycle_needs_registered_pairs():
    net = make_net([1, 2, 3, 4], [(1, 2), (2, 3), (3, 4), (4, 1)])
    reg = VariableRegistry()
    for i in (1, 2, 3, 4):
        reg.add(("w", i), 0.81, 1.21)
    for k, l in ((1, 2), (2, 3)):
        reg.add(("wr", k, l))
        reg.add(("wi", k, l))
    cyc = cycle_basis(net)[0]
    with pytest.raises(ModelError):
        build_cycle_constraint(net, cyc, 1, path_table(net, cyc, 1), reg)


def test_cycle_diagnostics_when_paths_leave_cycle():
    # on the 6-cycle, bus 4 is three hops from bus 1 along the cycle but two through bus 7
    nodes = [1, 2, 3, 4, 5, 6, 7]
    edges = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1), (1, 7), (7, 4)]
    net = make_net(nodes, edges)
    cyc = Cycle.from_nodes([1, 2, 3, 4, 5, 6])
    m = add_cycle_constraints(build_psdp(net), net, cycles=[cyc])
    assert any("leave the cycle through [7]" in d for d in m.metadata["diagnostics"])


def test_describe_is_json_ready(triangle):
    import json

    d = build_psdp(triangle).describe()
    text = json.dumps(d)
    assert d["tier"] == "psdp"
    assert {"kind", "sense", "tag", "variables"} <= set(d["constraints"][0])
    assert "Infinity" not in text and "NaN" not in text
