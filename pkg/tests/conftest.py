import math
from pathlib import Path

import numpy as np
import pytest

from opfrelax.caseio import Branch, Bus, Generator, Network, load_case

DATA = Path(__file__).resolve().parents[1] / "src" / "opfrelax" / "data"
BUNDLED = sorted(p.stem for p in DATA.glob("*.m"))


def case_path(name):
    return DATA / f"{name}.m"


def case_text(buses, gens, branches, costs=None, base=100):
    """Build MATPOWER text from short row tuples.

    buses: (id, type, pd, qd, vmax, vmin); gens: (bus, qmax, qmin, pmax, pmin);
    branches: (f, t, r, x, rate, angmin, angmax); costs: (c2, c1, c0).
    """
    out = ["function mpc = tiny", f"mpc.baseMVA = {base};", "mpc.bus = ["]
    for i, kind, pd, qd, vmax, vmin in buses:
        out.append(f"{i} {kind} {pd} {qd} 0 0 1 1 0 345 1 {vmax} {vmin};")
    out += ["];", "mpc.gen = ["]
    for bus, qmax, qmin, pmax, pmin in gens:
        out.append(f"{bus} 0 0 {qmax} {qmin} 1 {base} 1 {pmax} {pmin};")
    out += ["];", "mpc.branch = ["]
    for f, t, r, x, rate, amin, amax in branches:
        out.append(f"{f} {t} {r} {x} 0 {rate} {rate} {rate} 0 0 1 {amin} {amax};")
    out.append("];")
    if costs is not None:
        out.append("mpc.gencost = [")
        for c2, c1, c0 in costs:
            out.append(f"2 0 0 3 {c2} {c1} {c0};")
        out.append("];")
    return "\n".join(out) + "\n"


def make_net(nodes, edges, r=0.01, x=0.1, vmin=0.9, vmax=1.1, ang=math.radians(30), gens=None, loads=None):
    """Network straight from a node list and an edge list (no file round trip)."""
    loads = loads or {}
    buses = [Bus(i, vmin, vmax, pd=loads.get(i, (0.0, 0.0))[0], qd=loads.get(i, (0.0, 0.0))[1], kind=3 if k == 0 else 1)
             for k, i in enumerate(nodes)]
    gens = gens if gens is not None else [Generator(nodes[0], 0.0, 10.0, -10.0, 10.0, c1=1.0)]
    branches = [Branch(i, j, r, x, rate_a=0.0, angmin=-ang, angmax=ang) for i, j in edges]
    return Network(100.0, buses, gens, branches, name="synthetic")


def random_voltages(net, rng):
    v = {b.id: rng.uniform(b.vmin, b.vmax) for b in net.buses}
    theta = {b.id: rng.uniform(-0.25, 0.25) for b in net.buses}
    return v, theta


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=BUNDLED)
def bundled(request):
    return load_case(case_path(request.param))


@pytest.fixture
def ring5():
    return load_case(case_path("case5_ring"))


@pytest.fixture
def triangle():
    return load_case(case_path("case3_triangle"))


@pytest.fixture
def radial7():
    return load_case(case_path("case7_radial"))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
