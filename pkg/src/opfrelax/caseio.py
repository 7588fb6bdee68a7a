"""MATPOWER-style case files: parsing, validation and serialization.

Everything in a :class:`Network` is per-unit on the system base; angles are
in radians.  Cost coefficients stay in the file's currency units (per MW and
per MW^2) and are converted when the objective is assembled.
"""

from __future__ import annotations

import json
import math
import re
from collections import deque
from dataclasses import asdict, dataclass, field

__all__ = [
    "Bus",
    "Generator",
    "Branch",
    "Network",
    "Diagnostic",
    "CaseError",
    "CaseSyntaxError",
    "NetworkError",
    "parse_case",
    "load_case",
    "validate_network",
    "format_case",
    "network_to_dict",
    "network_from_dict",
    "dump_network_json",
]

BUS_FIELDS = 13
GEN_FIELDS = 10
BRANCH_FIELDS = 11

# MATPOWER marks unconstrained angle differences with 0 or +-360 degrees.
UNBOUNDED_ANGLE = math.radians(360.0)


class CaseError(ValueError):
    """Base class for case-file problems."""


class CaseSyntaxError(CaseError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NetworkError(CaseError):
    """The case parses but does not describe a usable network."""


@dataclass(frozen=True)
class Bus:
    id: int
    vmin: float
    vmax: float
    pd: float = 0.0
    qd: float = 0.0
    gs: float = 0.0
    bs: float = 0.0
    kind: int = 1


@dataclass(frozen=True)
class Generator:
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    rate_a: float = 0.0
    angmin: float = -UNBOUNDED_ANGLE
    angmax: float = UNBOUNDED_ANGLE
    charging: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    g: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        z2 = self.r * self.r + self.x * self.x
        if z2 > 0:
            object.__setattr__(self, "g", self.r / z2)
            object.__setattr__(self, "b", -self.x / z2)
        else:
            object.__setattr__(self, "g", math.nan)
            object.__setattr__(self, "b", math.nan)

    @property
    def pair(self):
        return (self.from_bus, self.to_bus)

    @property
    def has_angle_bounds(self):
        """True when both angle bounds lie strictly inside (-pi/2, pi/2)."""
        return -math.pi / 2 < self.angmin and self.angmax < math.pi / 2

    @property
    def is_plain_line(self):
        return self.charging == 0.0 and self.tap == 1.0 and self.shift == 0.0


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple
    generators: tuple
    branches: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "branches", tuple(self.branches))

    @property
    def bus_ids(self):
        return [b.id for b in self.buses]

    def bus(self, bus_id):
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def generators_at(self, bus_id):
        return [k for k, g in enumerate(self.generators) if g.bus == bus_id]

    def edges(self):
        return [br.pair for br in self.branches]

    def adjacency(self):
        """Sorted neighbor lists keyed by bus id."""
        adj = {b.id: set() for b in self.buses}
        for i, j in self.edges():
            adj[i].add(j)
            adj[j].add(i)
        return {k: sorted(v) for k, v in adj.items()}

    def branch_between(self, i, j):
        for br in self.branches:
            if br.pair == (i, j) or br.pair == (j, i):
                return br
        return None

    def reference_bus(self):
        for b in self.buses:
            if b.kind == 3:
                return b.id
        if self.generators:
            return min(g.bus for g in self.generators)
        return min(self.bus_ids)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    element: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"[{self.severity}] {self.element}: {self.message}"


# ---------------------------------------------------------------------------
# parsing

_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")


def _strip_comment(line):
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _scan_tables(text):
    """Collect scalar assignments and numeric matrices from the case text.

    Returns ``(scalars, tables)`` where each table row is ``(line, values)``.
    """
    scalars = {}
    tables = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines):
        lineno = k + 1
        line = _strip_comment(lines[k])
        k += 1
        m = _ASSIGN.match(line)
        if not m:
            continue
        name, rest = m.group(1), m.group(2).strip()
        if rest.startswith("{"):
            # cell arrays (bus names etc.) are skipped
            depth = rest.count("{") - rest.count("}")
            while depth > 0 and k < len(lines):
                seg = _strip_comment(lines[k])
                depth += seg.count("{") - seg.count("}")
                k += 1
            continue
        if not rest.startswith("["):
            value = rest.rstrip(";").strip()
            if value.startswith("'"):
                scalars[name] = value.strip("'")
            else:
                try:
                    scalars[name] = float(value)
                except ValueError:
                    raise CaseSyntaxError(f"cannot read value of mpc.{name}: {value!r}", lineno)
            continue
        rows = []
        body = rest[1:]
        body_line = lineno
        closed = False
        while True:
            end = body.find("]")
            chunk = body if end < 0 else body[:end]
            for piece in chunk.split(";"):
                tokens = piece.replace(",", " ").split()
                if not tokens:
                    continue
                try:
                    rows.append((body_line, [float(t) for t in tokens]))
                except ValueError:
                    bad = next(t for t in tokens if not _is_number(t))
                    raise CaseSyntaxError(f"non-numeric entry {bad!r} in mpc.{name}", body_line)
            if end >= 0:
                closed = True
                break
            if k >= len(lines):
                break
            body = _strip_comment(lines[k])
            body_line = k + 1
            k += 1
        if not closed:
            raise CaseSyntaxError(f"matrix mpc.{name} is not terminated with ']'", lineno)
        tables[name] = rows
    return scalars, tables


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _check_width(table, rows, width):
    for n, (line, vals) in enumerate(rows, start=1):
        if len(vals) < width:
            raise CaseSyntaxError(
                f"{table} row {n} has {len(vals)} fields, expected at least {width}", line
            )


def _read_costs(rows, ngen):
    costs = []
    for n, (line, vals) in enumerate(rows[:ngen], start=1):
        if len(vals) < 4:
            raise CaseSyntaxError(f"gencost row {n} has {len(vals)} fields, expected at least 4", line)
        model, ncoef = int(vals[0]), int(vals[3])
        if model != 2:
            raise CaseSyntaxError(f"gencost row {n}: only polynomial costs (model 2) are supported", line)
        coefs = vals[4 : 4 + ncoef]
        if len(coefs) < ncoef:
            raise CaseSyntaxError(f"gencost row {n} declares {ncoef} coefficients but has {len(coefs)}", line)
        if ncoef > 3 and any(c != 0 for c in coefs[: ncoef - 3]):
            raise CaseSyntaxError(f"gencost row {n}: polynomial degree above 2 is not supported", line)
        c = list(reversed(coefs))[:3] + [0.0] * 3
        costs.append((c[0], c[1], c[2]))
    return costs


def _merge_parallel(branches):
    merged = {}
    order = []
    for br in branches:
        key = frozenset(br.pair)
        if key not in merged:
            merged[key] = br
            order.append(key)
            continue
        old = merged[key]
        y = 1 / complex(old.r, old.x) + 1 / complex(br.r, br.x)
        z = 1 / y
        rates = [r for r in (old.rate_a, br.rate_a) if r > 0]
        same_dir = br.pair == old.pair
        lo, hi = (br.angmin, br.angmax) if same_dir else (-br.angmax, -br.angmin)
        merged[key] = Branch(
            old.from_bus,
            old.to_bus,
            z.real,
            z.imag,
            rate_a=min(rates) if rates else 0.0,
            angmin=max(old.angmin, lo),
            angmax=min(old.angmax, hi),
            charging=old.charging + br.charging,
            tap=old.tap,
            shift=old.shift,
        )
    return [merged[k] for k in order]


def _check_connected(bus_ids, branches):
    if not bus_ids:
        raise NetworkError("case has no buses")
    adj = {i: [] for i in bus_ids}
    for br in branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = {bus_ids[0]}
    queue = deque([bus_ids[0]])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    missing = sorted(set(bus_ids) - seen)
    if missing:
        raise NetworkError(f"network is disconnected; buses {missing} are unreachable from bus {bus_ids[0]}")


def _angle_limit(deg, side):
    """MATPOWER reads 0 and anything at or beyond +-360 degrees as no limit."""
    if deg == 0 or abs(deg) >= 360:
        return side * UNBOUNDED_ANGLE
    return math.radians(deg)


def parse_case(text, name=""):
    """Parse MATPOWER case text into a per-unit :class:`Network`."""
    scalars, tables = _scan_tables(text)
    if "baseMVA" not in scalars:
        raise CaseSyntaxError("missing mpc.baseMVA")
    base = float(scalars["baseMVA"])
    if base <= 0:
        raise CaseSyntaxError("mpc.baseMVA must be positive")
    for t in ("bus", "gen", "branch"):
        if t not in tables:
            raise CaseSyntaxError(f"missing mpc.{t} table")
    _check_width("bus", tables["bus"], BUS_FIELDS)
    _check_width("gen", tables["gen"], GEN_FIELDS)
    _check_width("branch", tables["branch"], BRANCH_FIELDS)

    buses = []
    seen = set()
    for line, v in tables["bus"]:
        bid = int(v[0])
        if bid in seen:
            raise CaseSyntaxError(f"duplicate bus id {bid}", line)
        seen.add(bid)
        if int(v[1]) == 4:
            continue
        buses.append(
            Bus(
                id=bid,
                vmin=v[12],
                vmax=v[11],
                pd=v[2] / base,
                qd=v[3] / base,
                gs=v[4] / base,
                bs=v[5] / base,
                kind=int(v[1]),
            )
        )
    ids = {b.id for b in buses}

    gen_rows = tables["gen"]
    costs = _read_costs(tables["gencost"], len(gen_rows)) if "gencost" in tables else None
    if costs is not None and len(costs) < len(gen_rows):
        raise CaseSyntaxError(f"gencost has {len(costs)} rows for {len(gen_rows)} generators")
    gens = []
    for n, (line, v) in enumerate(gen_rows):
        if v[7] <= 0:
            continue
        bid = int(v[0])
        if bid not in ids:
            raise NetworkError(f"line {line}: generator references unknown bus {bid}")
        c0, c1, c2 = costs[n] if costs is not None else (0.0, 0.0, 0.0)
        gens.append(
            Generator(bid, pmin=v[9] / base, pmax=v[8] / base, qmin=v[4] / base, qmax=v[3] / base, c0=c0, c1=c1, c2=c2)
        )

    branches = []
    for line, v in tables["branch"]:
        if v[10] <= 0:
            continue
        f, t = int(v[0]), int(v[1])
        for bid in (f, t):
            if bid not in ids:
                raise NetworkError(f"line {line}: branch references unknown bus {bid}")
        if f == t:
            raise NetworkError(f"line {line}: branch connects bus {f} to itself")
        if v[2] == 0 and v[3] == 0:
            raise NetworkError(f"line {line}: zero-impedance branch {f}-{t}")
        angmin = _angle_limit(v[11], -1) if len(v) > 11 else -UNBOUNDED_ANGLE
        angmax = _angle_limit(v[12], 1) if len(v) > 12 else UNBOUNDED_ANGLE
        branches.append(
            Branch(
                f,
                t,
                v[2],
                v[3],
                rate_a=v[5] / base,
                angmin=angmin,
                angmax=angmax,
                charging=v[4],
                tap=v[8] if v[8] != 0 else 1.0,
                shift=math.radians(v[9]),
            )
        )
    branches = _merge_parallel(branches)
    _check_connected([b.id for b in buses], branches)
    return Network(base, buses, gens, branches, name=name or str(scalars.get("name", "")))


def load_case(path):
    from pathlib import Path

    path = Path(path)
    return parse_case(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# validation

def validate_network(net):
    """Return a list of :class:`Diagnostic`; empty when every invariant holds.

    Diagnostics with severity ``"warning"`` flag data that the core branch
    model ignores (charging, taps, phase shifters, shunts).
    """
    out = []
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        out.append(Diagnostic("duplicate-bus", "network", "bus ids must be unique"))
    for b in net.buses:
        el = f"bus {b.id}"
        if not b.vmin > 0:
            out.append(Diagnostic("vmin-nonpositive", el, "voltage lower bound must be strictly positive"))
        if b.vmin > b.vmax:
            out.append(Diagnostic("vbounds-inverted", el, f"vmin {b.vmin} exceeds vmax {b.vmax}"))
        if b.gs != 0 or b.bs != 0:
            out.append(Diagnostic("model-mismatch", el, "model mismatch: bus shunt ignored by the core model", "warning"))
    idset = set(ids)
    for k, g in enumerate(net.generators):
        el = f"generator {k} at bus {g.bus}"
        if g.bus not in idset:
            out.append(Diagnostic("unknown-bus", el, f"references unknown bus {g.bus}"))
        if g.pmin > g.pmax:
            out.append(Diagnostic("pbounds-inverted", el, f"pmin {g.pmin} exceeds pmax {g.pmax}"))
        if g.qmin > g.qmax:
            out.append(Diagnostic("qbounds-inverted", el, f"qmin {g.qmin} exceeds qmax {g.qmax}"))
        if g.c2 < 0:
            out.append(Diagnostic("nonconvex-cost", el, "quadratic cost coefficient must be nonnegative"))
    pairs = set()
    for br in net.branches:
        el = f"branch {br.from_bus}-{br.to_bus}"
        for bid in br.pair:
            if bid not in idset:
                out.append(Diagnostic("unknown-bus", el, f"references unknown bus {bid}"))
        if not br.r * br.r + br.x * br.x > 0:
            out.append(Diagnostic("zero-impedance", el, "r^2 + x^2 must be positive"))
        key = frozenset(br.pair)
        if key in pairs:
            out.append(Diagnostic("parallel-branch", el, "more than one branch between the same buses"))
        pairs.add(key)
        if br.angmin > br.angmax:
            out.append(Diagnostic("angle-inverted", el, "angmin exceeds angmax"))
        if not br.has_angle_bounds:
            out.append(
                Diagnostic(
                    "angle-range",
                    el,
                    "angle-difference bounds must lie strictly inside (-90, 90) degrees "
                    "for the tangent envelope wI <= tan(angle) wR to be valid",
                )
            )
        if not br.is_plain_line:
            out.append(
                Diagnostic(
                    "model-mismatch",
                    el,
                    "model mismatch: line charging, tap ratio or phase shift ignored by the core model",
                    "warning",
                )
            )
    if idset and all(b in idset for br in net.branches for b in br.pair):
        try:
            _check_connected(ids, net.branches)
        except NetworkError as exc:
            out.append(Diagnostic("disconnected", "network", str(exc)))
    return out


# ---------------------------------------------------------------------------
# serialization

def network_to_dict(net):
    return {
        "name": net.name,
        "baseMVA": net.base_mva,
        "buses": [asdict(b) for b in net.buses],
        "generators": [asdict(g) for g in net.generators],
        "branches": [asdict(br) for br in net.branches],
    }


def network_from_dict(data):
    branches = []
    for d in data["branches"]:
        d = {k: v for k, v in d.items() if k not in ("g", "b")}
        branches.append(Branch(**d))
    return Network(
        base_mva=data["baseMVA"],
        buses=[Bus(**d) for d in data["buses"]],
        generators=[Generator(**d) for d in data["generators"]],
        branches=branches,
        name=data.get("name", ""),
    )


def dump_network_json(net, indent=2):
    return json.dumps(network_to_dict(net), indent=indent)


def format_case(net):
    """Render ``net`` back into MATPOWER case text."""
    base = net.base_mva
    out = [f"function mpc = {net.name or 'case'}", "mpc.version = '2';", f"mpc.baseMVA = {base!r};", "", "mpc.bus = ["]
    for b in net.buses:
        row = [b.id, b.kind, b.pd * base, b.qd * base, b.gs * base, b.bs * base, 1, 1.0, 0.0, 0.0, 1, b.vmax, b.vmin]
        out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
    out += ["];", "", "mpc.gen = ["]
    for g in net.generators:
        row = [g.bus, 0.0, 0.0, g.qmax * base, g.qmin * base, 1.0, base, 1, g.pmax * base, g.pmin * base]
        out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
    out += ["];", "", "mpc.branch = ["]
    for br in net.branches:
        row = [
            br.from_bus,
            br.to_bus,
            br.r,
            br.x,
            br.charging,
            br.rate_a * base,
            0.0,
            0.0,
            0.0 if br.tap == 1.0 else br.tap,
            math.degrees(br.shift),
            1,
            math.degrees(br.angmin),
            math.degrees(br.angmax),
        ]
        out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
    out += ["];", "", "mpc.gencost = ["]
    for g in net.generators:
        row = [2, 0, 0, 3, g.c2, g.c1, g.c0]
        out.append("\t" + "\t".join(_fmt(v) for v in row) + ";")
    out += ["];", ""]
    return "\n".join(out)


def _fmt(v):
    if isinstance(v, int):
        return str(v)
    return repr(float(v))
