"""Optimization models over a shared variable registry.

Four tiers are built here: the polar AC-OPF, the second-order-cone
relaxation in the lifted W-space, the same relaxation strengthened with
determinant cuts over tree-decomposition bags, and optional cycle
(voltage-law) equalities.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from itertools import combinations

import numpy as np

from .cuts import determinant_polynomial, enumerate_minors
from .graph import cycle_basis, path_table, tree_decomposition
from .poly import Poly, conj_symbol, reduce_modulus, to_real_parts

__all__ = [
    "VariableRegistry",
    "Constraint",
    "LinearConstraint",
    "PolynomialConstraint",
    "FlowEquation",
    "QuadraticObjective",
    "ModelInstance",
    "ModelError",
    "flow_coefficients",
    "build_ac",
    "build_socp",
    "build_psdp",
    "build_cycle_constraint",
    "cycle_polynomials",
    "add_cycle_constraints",
    "add_objective",
    "determinant_constraint",
    "lift_voltages",
]

KINDS = (
    "linear-equality",
    "linear-inequality",
    "convex-quadratic",
    "second-order-cone",
    "determinant-polynomial",
    "cycle-polynomial",
    "ac-trigonometric",
)

CENTER_SHRINK = 0.98


class ModelError(ValueError):
    pass


def _key_name(key):
    tag, *idx = key
    return f"{tag}[{','.join(str(i) for i in idx)}]"


class VariableRegistry:
    """Ordered variables with bounds and a start value."""

    def __init__(self):
        self.keys = []
        self.index = {}
        self.lb = []
        self.ub = []
        self.start = []

    def add(self, key, lb=-math.inf, ub=math.inf, start=None):
        if key in self.index:
            raise ModelError(f"variable {_key_name(key)} registered twice")
        if lb > ub:
            raise ModelError(f"variable {_key_name(key)} has lb {lb} > ub {ub}")
        self.index[key] = len(self.keys)
        self.keys.append(key)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.start.append(start)
        return self.index[key]

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self.index

    def __getitem__(self, key):
        try:
            return self.index[key]
        except KeyError:
            raise ModelError(f"variable {_key_name(key)} is not registered") from None

    def oriented(self, k, l):
        return ("wr", k, l) in self.index

    def has_pair(self, k, l):
        return self.oriented(k, l) or self.oriented(l, k)

    def pair(self, k, l):
        """Indices of (wr, wi) for W_kl and the sign of wi in that orientation."""
        if self.oriented(k, l):
            return self.index[("wr", k, l)], self.index[("wi", k, l)], 1.0
        if self.oriented(l, k):
            return self.index[("wr", l, k)], self.index[("wi", l, k)], -1.0
        raise ModelError(f"no lifted variable for bus pair ({k},{l})")

    def bounds(self):
        return np.array(self.lb), np.array(self.ub)

    def names(self):
        return [_key_name(k) for k in self.keys]

    def copy(self):
        out = VariableRegistry()
        out.keys = list(self.keys)
        out.index = dict(self.index)
        out.lb = list(self.lb)
        out.ub = list(self.ub)
        out.start = list(self.start)
        return out


# ---------------------------------------------------------------------------
# constraints

class Constraint:
    """``value(x) == 0`` (sense ``eq``) or ``value(x) >= 0`` (sense ``ge``).

    ``gradient`` and ``hessian`` are local to ``idx``.
    """

    kind = None
    linear = False

    def __init__(self, idx, sense, tag=""):
        if sense not in ("eq", "ge"):
            raise ValueError(f"bad sense {sense!r}")
        self.idx = np.asarray(idx, dtype=int)
        self.sense = sense
        self.tag = tag

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        return np.zeros((len(self.idx), len(self.idx)))

    def describe(self, registry):
        return {
            "kind": self.kind,
            "sense": self.sense,
            "tag": self.tag,
            "variables": [registry.names()[i] for i in self.idx],
        }


class LinearConstraint(Constraint):
    linear = True

    def __init__(self, terms, const=0.0, sense="eq", tag=""):
        acc = defaultdict(float)
        for i, c in terms:
            acc[i] += c
        idx = sorted(acc)
        super().__init__(idx, sense, tag)
        self.coefs = np.array([acc[i] for i in idx])
        self.const = float(const)
        self.kind = "linear-equality" if sense == "eq" else "linear-inequality"

    def value(self, x):
        return float(self.coefs @ x[self.idx]) + self.const

    def gradient(self, x):
        return self.coefs.copy()


class PolynomialConstraint(Constraint):
    def __init__(self, poly, registry, kind, sense="ge", tag="", minor=None):
        self.poly = poly
        self.compiled = poly.compile(registry.__getitem__)
        super().__init__(self.compiled.idx, sense, tag)
        if kind not in KINDS:
            raise ValueError(kind)
        self.kind = kind
        self.minor = minor

    def value(self, x):
        return self.compiled.value(x)

    def gradient(self, x):
        return self.compiled.gradient(x)

    def hessian(self, x):
        return self.compiled.hessian(x)


class FlowEquation(Constraint):
    """``f - [A vi^2 + B vj^2 + vi vj (C cos d + D sin d)] = 0`` with ``d = ti - tj - shift``.

    Local variable order: (vi, vj, ti, tj, f).
    """

    kind = "ac-trigonometric"

    def __init__(self, idx, coefs, shift=0.0, tag=""):
        super().__init__(idx, "eq", tag)
        self.A, self.B, self.C, self.D = coefs
        self.shift = shift

    def value(self, x):
        vi, vj, ti, tj, f = x[self.idx]
        d = ti - tj - self.shift
        return f - (self.A * vi * vi + self.B * vj * vj + vi * vj * (self.C * math.cos(d) + self.D * math.sin(d)))

    def gradient(self, x):
        vi, vj, ti, tj, _ = x[self.idx]
        d = ti - tj - self.shift
        c, s = math.cos(d), math.sin(d)
        k = self.C * c + self.D * s
        kd = -self.C * s + self.D * c
        return np.array([-(2 * self.A * vi + vj * k), -(2 * self.B * vj + vi * k), -vi * vj * kd, vi * vj * kd, 1.0])

    def hessian(self, x):
        vi, vj, ti, tj, _ = x[self.idx]
        d = ti - tj - self.shift
        c, s = math.cos(d), math.sin(d)
        k = self.C * c + self.D * s
        kd = -self.C * s + self.D * c
        kdd = -k
        H = np.zeros((5, 5))
        H[0, 0] = -2 * self.A
        H[1, 1] = -2 * self.B
        H[0, 1] = H[1, 0] = -k
        H[0, 2] = H[2, 0] = -vj * kd
        H[0, 3] = H[3, 0] = vj * kd
        H[1, 2] = H[2, 1] = -vi * kd
        H[1, 3] = H[3, 1] = vi * kd
        H[2, 2] = H[3, 3] = -vi * vj * kdd
        H[2, 3] = H[3, 2] = vi * vj * kdd
        return H


class QuadraticObjective:
    """Separable ``sum c2 x^2 + c1 x`` plus a constant."""

    def __init__(self, idx, c1, c2, const=0.0):
        self.idx = np.asarray(idx, dtype=int)
        self.c1 = np.asarray(c1, dtype=float)
        self.c2 = np.asarray(c2, dtype=float)
        self.const = float(const)
        if np.any(self.c2 < 0):
            raise ModelError("objective has a negative quadratic coefficient")

    def value(self, x):
        xl = x[self.idx]
        return float(self.c2 @ (xl * xl) + self.c1 @ xl) + self.const

    def gradient(self, x):
        g = np.zeros(len(x))
        np.add.at(g, self.idx, 2 * self.c2 * x[self.idx] + self.c1)
        return g

    def hessian_diag(self, n):
        h = np.zeros(n)
        np.add.at(h, self.idx, 2 * self.c2)
        return h


class ModelInstance:
    def __init__(self, registry, constraints, objective=None, tier="", metadata=None, center=None):
        self.registry = registry
        self.constraints = tuple(constraints)
        self.objective = objective
        self.tier = tier
        self.metadata = dict(metadata or {})
        self.center = center

    @property
    def n(self):
        return len(self.registry)

    def start(self):
        lb, ub = self.registry.bounds()
        x = np.zeros(self.n)
        for k, s in enumerate(self.registry.start):
            if s is not None:
                x[k] = s
            elif np.isfinite(lb[k]) and np.isfinite(ub[k]):
                x[k] = 0.5 * (lb[k] + ub[k])
            elif np.isfinite(lb[k]):
                x[k] = lb[k] + 1.0
            elif np.isfinite(ub[k]):
                x[k] = ub[k] - 1.0
        return x

    def point(self, x):
        return dict(zip(self.registry.keys, map(float, x)))

    def vector(self, point):
        x = self.start()
        for k, v in point.items():
            if k in self.registry:
                x[self.registry[k]] = v
        return x

    def objective_value(self, x):
        return self.objective.value(x) if self.objective is not None else 0.0

    def replace(self, **kw):
        args = dict(
            registry=self.registry,
            constraints=self.constraints,
            objective=self.objective,
            tier=self.tier,
            metadata=self.metadata,
            center=self.center,
        )
        args.update(kw)
        return ModelInstance(**args)

    def with_constraints(self, extra, **meta):
        metadata = dict(self.metadata)
        metadata.update(meta)
        return self.replace(constraints=self.constraints + tuple(extra), metadata=metadata)

    def active_minors(self):
        return set(self.metadata.get("minors", ()))

    def with_minors(self, subsets):
        """Add determinant constraints for the given bus subsets (skipping ones already present)."""
        active = self.active_minors()
        extra = []
        for s in sorted({tuple(sorted(s)) for s in subsets}, key=lambda s: (len(s), s)):
            if s in active or len(s) < 2:
                continue
            extra.append(determinant_constraint(self.registry, s))
            active.add(s)
        return self.with_constraints(extra, minors=frozenset(active))

    def describe(self):
        lb, ub = self.registry.bounds()
        obj = None
        if self.objective is not None:
            names = self.registry.names()
            obj = {
                "constant": self.objective.const,
                "terms": [
                    {"variable": names[i], "linear": float(a), "quadratic": float(b)}
                    for i, a, b in zip(self.objective.idx, self.objective.c1, self.objective.c2)
                ],
            }
        return {
            "tier": self.tier,
            "variables": [
                {"name": n, "lb": _json_num(l), "ub": _json_num(u)}
                for n, l, u in zip(self.registry.names(), lb, ub)
            ],
            "constraints": [c.describe(self.registry) for c in self.constraints],
            "objective": obj,
            "metadata": {k: _jsonable(v) for k, v in self.metadata.items()},
        }


def _json_num(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _jsonable(v):
    if isinstance(v, (frozenset, set)):
        return sorted(_jsonable(x) for x in v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if hasattr(v, "nodes"):
        return list(v.nodes)
    return v


# ---------------------------------------------------------------------------
# branch physics

def flow_coefficients(br, extended=False):
    """Coefficients ``(A, B, C, D)`` for the four branch flows.

    Each flow equals ``A w_i + B w_j + C a + D c`` where ``a + i c = W_ij e^{-i shift}``.
    Order: p_ij, q_ij, p_ji, q_ji.  Without ``extended`` the branch is a plain
    series impedance (no charging, tap or shift).
    """
    g, b = br.g, br.b
    if extended:
        tau, bc = br.tap, br.charging
    else:
        tau, bc = 1.0, 0.0
    t2 = tau * tau
    return (
        (g / t2, 0.0, -g / tau, -b / tau),
        (-(b + bc / 2) / t2, 0.0, b / tau, -g / tau),
        (0.0, g, -g / tau, b / tau),
        (0.0, -(b + bc / 2), b / tau, g / tau),
    )


def _shift(br, extended):
    return br.shift if extended else 0.0


FLOWS = ("p", "q", "p", "q")


def _flow_keys(br):
    i, j = br.pair
    return [("p", i, j), ("q", i, j), ("p", j, i), ("q", j, i)]


# ---------------------------------------------------------------------------
# objective

def add_objective(model, net):
    """Attach ``sum c2 (S pg)^2 + c1 (S pg) + c0`` with ``S`` the MVA base."""
    idx, c1, c2 = [], [], []
    const = 0.0
    S = net.base_mva
    for k, g in enumerate(net.generators):
        if g.c2 < 0:
            raise ModelError(f"generator {k} has negative quadratic cost {g.c2}; objective would be non-convex")
        idx.append(model.registry[("pg", k)])
        c1.append(g.c1 * S)
        c2.append(g.c2 * S * S)
        const += g.c0
    return model.replace(objective=QuadraticObjective(idx, c1, c2, const))


def _register_generators(reg, net):
    for k, g in enumerate(net.generators):
        reg.add(("pg", k), g.pmin, g.pmax)
        reg.add(("qg", k), g.qmin, g.qmax)


def _strict_mid(lb, ub, target, frac=0.05):
    """``target`` clipped into the strict interior of [lb, ub]."""
    if lb == ub:
        return lb
    lo = lb + frac * (ub - lb) if math.isfinite(ub) and math.isfinite(lb) else lb + frac if math.isfinite(lb) else -math.inf
    hi = ub - frac * (ub - lb) if math.isfinite(ub) and math.isfinite(lb) else ub - frac if math.isfinite(ub) else math.inf
    return min(max(target, lo), hi)


def _dispatch_start(reg, x, net, injections):
    """Spread the required net injection at each bus over its generators, strictly inside bounds."""
    for bus in net.buses:
        gens = net.generators_at(bus.id)
        if not gens:
            continue
        p_need, q_need = injections[bus.id]
        for tag, need in (("pg", p_need), ("qg", q_need)):
            share = need / len(gens)
            for k in gens:
                i = reg[(tag, k)]
                x[i] = _strict_mid(reg.lb[i], reg.ub[i], share)


def _kcl(reg, net, bus, flows_of, extended, w_term):
    """KCL rows for one bus as (p terms, p const, q terms, q const)."""
    p_terms, q_terms = [], []
    for k in net.generators_at(bus.id):
        p_terms.append((reg[("pg", k)], 1.0))
        q_terms.append((reg[("qg", k)], 1.0))
    for key in flows_of[bus.id]:
        target = p_terms if key[0] == "p" else q_terms
        target.append((reg[key], -1.0))
    if extended and w_term is not None:
        if bus.gs:
            p_terms.append((w_term, -bus.gs))
        if bus.bs:
            q_terms.append((w_term, bus.bs))
    return p_terms, -bus.pd, q_terms, -bus.qd


def _flows_by_bus(net):
    out = {b.id: [] for b in net.buses}
    for br in net.branches:
        i, j = br.pair
        keys = _flow_keys(br)
        out[i] += keys[:2]
        out[j] += keys[2:]
    return out


# ---------------------------------------------------------------------------
# AC model

def build_ac(net, extended=False):
    """Polar AC-OPF: voltages, angles, flows and dispatch with the trigonometric flow equations."""
    reg = VariableRegistry()
    ref = net.reference_bus()
    for b in net.buses:
        reg.add(("v", b.id), b.vmin, b.vmax)
    for b in net.buses:
        if b.id == ref:
            reg.add(("theta", b.id), 0.0, 0.0)
        else:
            reg.add(("theta", b.id))
    for br in net.branches:
        for key in _flow_keys(br):
            reg.add(key)
    _register_generators(reg, net)

    cons = []
    for br in net.branches:
        i, j = br.pair
        coefs = flow_coefficients(br, extended)
        sh = _shift(br, extended)
        for key, c in zip(_flow_keys(br), coefs):
            idx = [reg[("v", i)], reg[("v", j)], reg[("theta", i)], reg[("theta", j)], reg[key]]
            cons.append(FlowEquation(idx, c, sh, tag=f"ac-flow {_key_name(key)}"))
        _thermal(cons, reg, br)
        if abs(br.angmin) < 2 * math.pi - 1e-9:
            cons.append(
                LinearConstraint(
                    [(reg[("theta", i)], 1.0), (reg[("theta", j)], -1.0)], -br.angmin, "ge", f"angle-min {i}-{j}"
                )
            )
        if abs(br.angmax) < 2 * math.pi - 1e-9:
            cons.append(
                LinearConstraint(
                    [(reg[("theta", i)], -1.0), (reg[("theta", j)], 1.0)], br.angmax, "ge", f"angle-max {i}-{j}"
                )
            )
    flows_of = _flows_by_bus(net)
    for b in net.buses:
        p_terms, p0, q_terms, q0 = _kcl(reg, net, b, flows_of, False, None)
        if extended and (b.gs or b.bs):
            v = Poly.var(("v", b.id))
            pp = _linear_poly(reg, p_terms, p0) - b.gs * v * v
            qp = _linear_poly(reg, q_terms, q0) + b.bs * v * v
            cons.append(PolynomialConstraint(pp, reg, "convex-quadratic", "eq", f"kcl-p {b.id}"))
            cons.append(PolynomialConstraint(qp, reg, "convex-quadratic", "eq", f"kcl-q {b.id}"))
            cons[-1].kind = cons[-2].kind = "ac-trigonometric"
        else:
            cons.append(LinearConstraint(p_terms, p0, "eq", f"kcl-p {b.id}"))
            cons.append(LinearConstraint(q_terms, q0, "eq", f"kcl-q {b.id}"))

    model = ModelInstance(reg, cons, tier="ac", metadata={"reference_bus": ref, "extended": extended})
    x = _ac_flat_start(model, net, extended)
    reg.start = list(x)
    model.center = x
    return add_objective(model, net)


def _linear_poly(reg, terms, const):
    p = Poly.const(const)
    for i, c in terms:
        p = p + c * Poly.var(reg.keys[i])
    return p


def _ac_flat_start(model, net, extended):
    reg = model.registry
    x = np.zeros(len(reg))
    for b in net.buses:
        x[reg[("v", b.id)]] = 0.5 * (b.vmin + b.vmax)
    injections = {b.id: [b.pd, b.qd] for b in net.buses}
    for c in model.constraints:
        if isinstance(c, FlowEquation):
            f = c.idx[4]
            x[f] = 0.0
            x[f] = -c.value(x)
    for br in net.branches:
        for key in _flow_keys(br):
            injections[key[1]][0 if key[0] == "p" else 1] += x[reg[key]]
    if extended:
        for b in net.buses:
            v2 = x[reg[("v", b.id)]] ** 2
            injections[b.id][0] += b.gs * v2
            injections[b.id][1] -= b.bs * v2
    _dispatch_start(reg, x, net, injections)
    return x


def _thermal(cons, reg, br):
    if br.rate_a <= 0:
        return
    r2 = br.rate_a ** 2
    keys = _flow_keys(br)
    for pk, qk in ((keys[0], keys[1]), (keys[2], keys[3])):
        p, q = Poly.var(pk), Poly.var(qk)
        poly = r2 - p * p - q * q
        cons.append(PolynomialConstraint(poly, reg, "convex-quadratic", "ge", f"thermal {_key_name(pk)[2:]}"))


# ---------------------------------------------------------------------------
# W-space models

def _center_angles(net):
    """Bus angles whose pairwise differences sit strictly inside every branch's angle window."""
    theta = {b.id: 0.0 for b in net.buses}
    if all(br.angmin < 0 < br.angmax for br in net.branches):
        return theta
    adj = defaultdict(list)
    for br in net.branches:
        mid = 0.5 * (max(br.angmin, -1.2) + min(br.angmax, 1.2))
        adj[br.from_bus].append((br.to_bus, mid))
        adj[br.to_bus].append((br.from_bus, -mid))
    root = min(theta)
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, mid in sorted(adj[u]):
            if v not in seen:
                theta[v] = theta[u] - mid
                seen.add(v)
                queue.append(v)
    return theta


def _register_pair(reg, k, l, vmax, nonneg):
    bound = vmax[k] * vmax[l]
    reg.add(("wr", k, l), 0.0 if nonneg else -bound, bound)
    reg.add(("wi", k, l), -bound, bound)


def build_socp(net, extended=False):
    """Second-order-cone relaxation in the lifted space."""
    reg = VariableRegistry()
    vmax = {b.id: b.vmax for b in net.buses}
    for b in net.buses:
        reg.add(("w", b.id), b.vmin ** 2, b.vmax ** 2)
    for br in net.branches:
        _register_pair(reg, *br.pair, vmax, nonneg=br.has_angle_bounds)
    for br in net.branches:
        for key in _flow_keys(br):
            reg.add(key)
    _register_generators(reg, net)

    cons = []
    minors = set()
    for br in net.branches:
        i, j = br.pair
        wr, wi = reg[("wr", i, j)], reg[("wi", i, j)]
        sh = _shift(br, extended)
        cs, sn = math.cos(sh), math.sin(sh)
        for key, (A, B, C, D) in zip(_flow_keys(br), flow_coefficients(br, extended)):
            # a = wr cos + wi sin, c = wi cos - wr sin
            terms = [
                (reg[key], 1.0),
                (reg[("w", i)], -A),
                (reg[("w", j)], -B),
                (wr, -(C * cs - D * sn)),
                (wi, -(C * sn + D * cs)),
            ]
            cons.append(LinearConstraint(terms, 0.0, "eq", f"w-flow {_key_name(key)}"))
        cons.append(determinant_constraint(reg, (i, j)))
        minors.add(tuple(sorted((i, j))))
        if br.has_angle_bounds:
            lo, hi = math.tan(br.angmin), math.tan(br.angmax)
            cons.append(LinearConstraint([(wi, 1.0), (wr, -lo)], 0.0, "ge", f"angle-min {i}-{j}"))
            cons.append(LinearConstraint([(wi, -1.0), (wr, hi)], 0.0, "ge", f"angle-max {i}-{j}"))
        _thermal(cons, reg, br)
    flows_of = _flows_by_bus(net)
    for b in net.buses:
        p_terms, p0, q_terms, q0 = _kcl(reg, net, b, flows_of, extended, reg[("w", b.id)])
        cons.append(LinearConstraint(p_terms, p0, "eq", f"kcl-p {b.id}"))
        cons.append(LinearConstraint(q_terms, q0, "eq", f"kcl-q {b.id}"))

    model = ModelInstance(
        reg, cons, tier="socp", metadata={"minors": frozenset(minors), "extended": extended, "diagnostics": []}
    )
    model = _with_center(model, net, extended)
    return add_objective(model, net)


def _with_center(model, net, extended):
    """Strictly interior start: scaled rank-one W plus flows and dispatch from the linear equations."""
    reg = model.registry
    x = np.zeros(len(reg))
    theta = _center_angles(net)
    w = {}
    for b in net.buses:
        lo, hi = b.vmin ** 2, b.vmax ** 2
        w[b.id] = 0.5 * (lo + hi)
        x[reg[("w", b.id)]] = w[b.id]
    brs = {frozenset(br.pair): br for br in net.branches}
    for key in reg.keys:
        if key[0] != "wr":
            continue
        k, l = key[1], key[2]
        d = theta[k] - theta[l]
        br = brs.get(frozenset((k, l)))
        if br is not None and br.has_angle_bounds:
            lo, hi = br.angmin, br.angmax
            if br.pair != (k, l):
                lo, hi = -hi, -lo
            if not lo < d < hi:
                d = 0.5 * (lo + hi)
        mag = CENTER_SHRINK * math.sqrt(w[k] * w[l])
        x[reg[("wr", k, l)]] = mag * math.cos(d)
        x[reg[("wi", k, l)]] = mag * math.sin(d)
    injections = {b.id: [b.pd, b.qd] for b in net.buses}
    for c in model.constraints:
        if c.kind == "linear-equality" and c.tag.startswith("w-flow"):
            f = reg[_flow_key_from_tag(c.tag)]
            x[f] = 0.0
            x[f] = -c.value(x)
    for br in net.branches:
        keys = _flow_keys(br)
        if br.rate_a > 0:
            for pk, qk in ((keys[0], keys[1]), (keys[2], keys[3])):
                s = math.hypot(x[reg[pk]], x[reg[qk]])
                if s >= 0.95 * br.rate_a:
                    scale = 0.9 * br.rate_a / s
                    x[reg[pk]] *= scale
                    x[reg[qk]] *= scale
        for key in keys:
            injections[key[1]][0 if key[0] == "p" else 1] += x[reg[key]]
    if extended:
        for b in net.buses:
            injections[b.id][0] += b.gs * w[b.id]
            injections[b.id][1] -= b.bs * w[b.id]
    _dispatch_start(reg, x, net, injections)
    reg.start = list(x)
    return model.replace(center=x)


def _flow_key_from_tag(tag):
    name = tag.split(" ", 1)[1]
    tag_, rest = name.split("[")
    i, j = rest.rstrip("]").split(",")
    return (tag_, int(i), int(j))


class DeterminantConstraint(PolynomialConstraint):
    """``det(W_S) >= 0``.

    Derivatives come from the exact polynomial.  The value is the product of
    the pivots of an unpivoted Hermitian elimination whenever every pivot is
    positive: near a low-rank point the expanded polynomial loses all
    relative accuracy (its terms cancel to ~1e-16 absolute) while the pivot
    product keeps it.  Otherwise the polynomial value is used.
    """

    def __init__(self, registry, subset):
        subset = tuple(sorted(subset))
        poly = determinant_polynomial(subset, registry.oriented)
        kind = "second-order-cone" if len(subset) == 2 else "determinant-polynomial"
        tag = f"det{len(subset)} [{','.join(map(str, subset))}]"
        super().__init__(poly, registry, kind, "ge", tag, minor=subset)
        k = len(subset)
        self.k = k
        self.diag = np.array([registry[("w", i)] for i in subset])
        pairs = list(combinations(range(k), 2))
        self.rows = np.array([a for a, _ in pairs], dtype=int)
        self.cols = np.array([b for _, b in pairs], dtype=int)
        self.re = np.empty(len(pairs), dtype=int)
        self.im = np.empty(len(pairs), dtype=int)
        self.sign = np.empty(len(pairs))
        for n, (a, b) in enumerate(pairs):
            self.re[n], self.im[n], self.sign[n] = registry.pair(subset[a], subset[b])

    def matrix(self, x):
        A = np.zeros((self.k, self.k), dtype=complex)
        A[np.arange(self.k), np.arange(self.k)] = x[self.diag]
        z = x[self.re] + 1j * self.sign * x[self.im]
        A[self.rows, self.cols] = z
        A[self.cols, self.rows] = z.conj()
        return A

    def value(self, x):
        A = self.matrix(x)
        det = 1.0
        for j in range(self.k):
            piv = A[j, j].real
            if not piv > 0:
                return self.compiled.value(x)
            det *= piv
            if j + 1 < self.k:
                col = A[j + 1 :, j] / piv
                A[j + 1 :, j + 1 :] -= np.outer(col, A[j, j + 1 :])
        return float(det)


def determinant_constraint(registry, subset):
    return DeterminantConstraint(registry, subset)


def build_psdp(net, max_dim=3, eager=True, bags=None, extended=False):
    """SOCP plus determinant cuts over tree-decomposition bags.

    Fill-in pairs of every bag are registered up front with their 2x2 cone
    constraints (this leaves the SOCP value unchanged).  With ``eager`` all
    bag minors of dimension 3..max_dim are added immediately.
    """
    base = build_socp(net, extended)
    reg = base.registry.copy()
    bags = tree_decomposition(net) if bags is None else bags
    vmax = {b.id: b.vmax for b in net.buses}
    new_pairs = []
    for bag in bags:
        for k, l in sorted(bag.fillins):
            if not reg.has_pair(k, l):
                _register_pair(reg, k, l, vmax, nonneg=False)
                new_pairs.append((k, l))
    model = ModelInstance(
        reg,
        base.constraints,
        tier="psdp",
        metadata=dict(base.metadata, bags=tuple(bags), max_dim=max_dim, lazy=not eager),
    )
    model = model.with_minors(new_pairs)
    model = _with_center(model, net, extended)
    model = add_objective(model, net)
    if eager:
        subsets = [m.subset for bag in bags for m in enumerate_minors(bag, min(max_dim, len(bag.nodes))) if m.dim >= 2]
        model = model.with_minors(subsets)
    return model


# ---------------------------------------------------------------------------
# cycle (voltage-law) constraints

def cycle_polynomials(cycle, r, table, oriented):
    """Voltage-law equality for ``cycle`` with reference ``r`` as (real, imaginary) polynomials.

    Each cycle edge (i, j) contributes
        prod_{(k,l) in P_rj} conj(W_kl) * prod_{s in S_r \\ (N(P_rj) - {j})} w_s * (W_ij - w_j) / w_j.
    Products |W_kl|^2 are rewritten as w_k w_l, terms divisible by their
    denominator are cancelled, the remaining denominators are cleared with
    their least common multiple, and the common w-monomial factor is divided
    out.
    """
    if table.source != r:
        raise ValueError("path table was computed for a different source")
    if r not in cycle.nodes:
        raise ValueError(f"bus {r} is not on the cycle")

    def W(k, l):
        if k == l:
            return Poly.var(("w", k))
        if oriented(k, l):
            return Poly.var(("Z", k, l))
        if oriented(l, k):
            return Poly.var(("Zc", l, k))
        raise ModelError(f"no lifted variable for bus pair ({k},{l}); register it first")

    def Wconj(k, l):
        p = W(k, l)
        return p.conj(conj_symbol)

    by_den = defaultdict(Poly)
    for i, j in cycle.edges:
        path = table.paths[j]
        skip = table.path_nodes(j) - {j}
        num = Poly.const(1)
        for k, l in path:
            num = num * Wconj(k, l)
        for s in sorted(table.union - skip):
            num = num * Poly.var(("w", s))
        num = reduce_modulus(num * (W(i, j) - Poly.var(("w", j))))
        div, rest = num.split_divisible(("w", j))
        by_den[()] = by_den[()] + div
        if rest.terms:
            by_den[j] = by_den[j] + rest
    dens = sorted(k for k, v in by_den.items() if k != () and v.terms)
    total = Poly()
    for key, part in by_den.items():
        if not part.terms:
            continue
        factor = Poly.const(1)
        for d in dens:
            if d != key:
                factor = factor * Poly.var(("w", d))
        total = total + part * factor
    total = reduce_modulus(total)
    content = total.monomial_content("w")
    if content:
        total = total.divide_monomial(content)
    return to_real_parts(total)


def build_cycle_constraint(net, cycle, r, table, registry):
    """Pair of cycle-polynomial equalities (real, imaginary parts) over ``registry``."""
    re, im = cycle_polynomials(cycle, r, table, registry.oriented)
    nodes = ",".join(map(str, cycle.nodes))
    out = []
    for part, poly in (("re", re), ("im", im)):
        if not poly.terms:
            continue
        out.append(PolynomialConstraint(poly, registry, "cycle-polynomial", "eq", f"cycle-{part} [{nodes}] ref {r}"))
    return tuple(out)


def add_cycle_constraints(model, net, cycles=None, all_refs=False):
    """Append voltage-law equalities for a cycle basis (lowest bus as reference unless ``all_refs``)."""
    cycles = cycle_basis(net) if cycles is None else cycles
    extra = []
    notes = list(model.metadata.get("diagnostics", []))
    for cyc in cycles:
        refs = sorted(cyc.nodes) if all_refs else [min(cyc.nodes)]
        for r in refs:
            table = path_table(net, cyc, r)
            outside = set(table.union) - set(cyc.nodes)
            if outside:
                notes.append(f"cycle {list(cyc.nodes)} ref {r}: shortest paths leave the cycle through {sorted(outside)}")
            extra.extend(build_cycle_constraint(net, cyc, r, table, model.registry))
    out = model.with_constraints(extra, cycles=tuple(cycles), diagnostics=notes)
    out.tier = {"socp": "socp+cycle", "psdp": "cycle"}.get(model.tier, model.tier)
    return out


def lift_voltages(registry, v, theta):
    """Rank-one lifted values ``w = v^2``, ``W_kl = v_k v_l e^{i(theta_k - theta_l)}`` for every registered entry."""
    out = {}
    for key in registry.keys:
        if key[0] == "w":
            out[key] = v[key[1]] ** 2
        elif key[0] in ("wr", "wi"):
            k, l = key[1], key[2]
            z = v[k] * v[l] * complex(math.cos(theta[k] - theta[l]), math.sin(theta[k] - theta[l]))
            out[key] = z.real if key[0] == "wr" else z.imag
    return out
