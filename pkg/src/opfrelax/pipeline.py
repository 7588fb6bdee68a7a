"""Parse, build, solve (with lazy cut separation) and report optimality gaps."""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .caseio import load_case
from .cuts import separate
from .graph import tree_decomposition
from .model import add_cycle_constraints, build_ac, build_psdp, build_socp
from .solver import SolveOptions, solve, solve_ac_heuristic

__all__ = [
    "TIERS",
    "RunConfig",
    "GapReport",
    "PipelineError",
    "run",
    "report",
    "relax",
    "build_model",
    "lazy_psdp",
    "gap_percent",
]

TIERS = ("ac", "socp", "psdp", "cycle", "socp+cycle")
RECENTER_MU = 1e-2
BLEND_STEPS = (1e-4, 1e-3, 1e-2)


class PipelineError(RuntimeError):
    def __init__(self, phase, cause):
        super().__init__(f"{phase}: {cause}")
        self.phase = phase
        self.cause = cause


@dataclass
class RunConfig:
    case: str
    relaxation: str = "psdp"
    lazy: bool = False
    max_minor_dim: int = 3
    cut_tol: float = 1e-6
    cuts_per_round: int = 10
    max_rounds: int = 20
    solver: SolveOptions = field(default_factory=SolveOptions)
    output: str = "table"
    extended: bool = False
    all_refs: bool = False
    heuristic: bool = True

    def __post_init__(self):
        if self.relaxation not in TIERS:
            raise ValueError(f"unknown relaxation tier {self.relaxation!r}; choose from {', '.join(TIERS)}")
        if self.output not in ("table", "json"):
            raise ValueError(f"unknown output format {self.output!r}")
        if self.max_minor_dim < 2:
            raise ValueError("max_minor_dim must be at least 2")


@dataclass
class GapReport:
    case: str
    relaxation: str
    heuristic_objective: float | None
    relaxation_objective: float | None
    gap_percent: float | None
    heuristic_status: str = ""
    relaxation_status: str = ""
    cut_counts: dict = field(default_factory=dict)
    separation_rounds: int = 0
    runtimes: dict = field(default_factory=dict)
    numerical_warning: bool = False
    lazy: bool = False

    def to_json(self, indent=2):
        data = asdict(self)
        data["cut_counts"] = {str(k): v for k, v in sorted(self.cut_counts.items())}
        return json.dumps(data, indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GapReport fields: {sorted(unknown)}")
        data["cut_counts"] = {int(k): v for k, v in data.get("cut_counts", {}).items()}
        return cls(**data)


def gap_percent(heuristic, relaxation):
    """``100 (heuristic - relaxation) / heuristic``, or None when the heuristic is not positive."""
    if heuristic is None or relaxation is None or heuristic <= 0:
        return None
    return 100.0 * (heuristic - relaxation) / heuristic


# ---------------------------------------------------------------------------

def _blend_start(model, x_prev):
    """Smallest short move from ``x_prev`` toward the model's center that is strictly feasible.

    Returns None when the previous iterate is too far outside the new cuts;
    long moves toward the center break the equalities and recover slower
    than a cold start.
    """
    from .solver import _Problem, _strict_box

    prob = _Problem(model)
    center = np.asarray(model.center, dtype=float)
    for tau in BLEND_STEPS:
        x = _strict_box(prob, (1 - tau) * x_prev + tau * center)
        if np.all(prob.g(x) > 0):
            return x
    return None


def lazy_psdp(net, config, model=None, bags=None, on_round=None):
    """Alternate solve / separate until no bag minor is violated by more than ``cut_tol``.

    Returns ``(model, result, rounds, separate_seconds)``.
    """
    bags = tree_decomposition(net) if bags is None else bags
    if model is None:
        model = build_psdp(net, config.max_minor_dim, eager=False, bags=bags, extended=config.extended)
    res = solve(model, config.solver)
    rounds = 0
    t_sep = 0.0
    while rounds < config.max_rounds:
        t0 = time.perf_counter()
        cuts = separate(
            bags, res.point, config.cut_tol, config.max_minor_dim, model.active_minors(), config.cuts_per_round
        )
        t_sep += time.perf_counter() - t0
        if not cuts:
            break
        rounds += 1
        subsets = [m.subset for cut in cuts for m in cut.prerequisites] + [cut.subset for cut in cuts]
        model = model.with_minors(subsets)
        if on_round is not None:
            on_round(rounds, cuts, model)
        start = _blend_start(model, res.x)
        warm = None
        if start is not None:
            warm = solve(model, config.solver, warm_start=start, mu_init=RECENTER_MU)
        res = warm if warm is not None and warm.ok else solve(model, config.solver)
    return model, res, rounds, t_sep


def build_model(net, config, bags=None):
    """The model the configured tier starts from (before any lazy cuts)."""
    tier = config.relaxation
    if tier == "ac":
        return build_ac(net, config.extended)
    if tier in ("socp", "socp+cycle"):
        model = build_socp(net, config.extended)
    else:
        bags = tree_decomposition(net) if bags is None else bags
        model = build_psdp(net, config.max_minor_dim, eager=not config.lazy, bags=bags, extended=config.extended)
    if tier in ("cycle", "socp+cycle"):
        model = add_cycle_constraints(model, net, all_refs=config.all_refs)
    return model


def relax(net, config, bags=None, on_round=None):
    """Build and solve the configured relaxation tier; returns (model, result, rounds, timings)."""
    timings = {}
    tier = config.relaxation
    t0 = time.perf_counter()
    if tier in ("psdp", "cycle") and bags is None:
        bags = tree_decomposition(net)
    model = build_model(net, config, bags)
    timings["build"] = time.perf_counter() - t0
    rounds = 0
    t0 = time.perf_counter()
    if tier in ("psdp", "cycle") and config.lazy:
        model, res, rounds, t_sep = lazy_psdp(net, config, model=model, bags=bags, on_round=on_round)
        timings["separate"] = t_sep
        timings["solve"] = time.perf_counter() - t0 - t_sep
    else:
        res = solve(model, config.solver)
        timings["solve"] = time.perf_counter() - t0
    return model, res, rounds, timings


def _cut_counts(model):
    return dict(sorted(Counter(len(s) for s in model.active_minors()).items()))


def run(config, net=None, trace=None):
    """Execute one configured run and return its :class:`GapReport`.

    When ``trace`` is a dict it receives the final ``model``, the solver
    results and, for lazy runs, the cuts added in each separation round.
    """
    runtimes = {}
    t0 = time.perf_counter()
    if net is None:
        try:
            net = load_case(config.case)
        except Exception as exc:
            raise PipelineError("parse", exc) from exc
    runtimes["parse"] = time.perf_counter() - t0

    heur = None
    if config.heuristic or config.relaxation == "ac":
        t0 = time.perf_counter()
        try:
            ac = build_ac(net, config.extended)
            heur = solve_ac_heuristic(ac, config.solver)
        except Exception as exc:
            raise PipelineError("heuristic", exc) from exc
        runtimes["heuristic"] = time.perf_counter() - t0

    rel = None
    model = None
    rounds = 0
    if config.relaxation != "ac":
        try:
            on_round = None
            if trace is not None:
                trace["rounds"] = []
                on_round = lambda k, cuts, _m: trace["rounds"].append((k, cuts))  # noqa: E731
            model, rel, rounds, timings = relax(net, config, on_round=on_round)
        except Exception as exc:
            raise PipelineError("relaxation", exc) from exc
        runtimes.update(timings)

    if trace is not None:
        trace.update(net=net, model=model, heuristic=heur, relaxation=rel)
    h_obj = heur.objective if heur is not None and heur.ok else None
    r_obj = rel.objective if rel is not None else None
    gap = gap_percent(h_obj, r_obj) if rel is not None and rel.ok else None
    warn = any(r is not None and (r.numerical_warning or not r.ok) for r in (heur, rel))
    return GapReport(
        case=getattr(net, "name", "") or Path(config.case).stem,
        relaxation=config.relaxation,
        heuristic_objective=h_obj,
        relaxation_objective=r_obj,
        gap_percent=None if gap is None else round(gap, 2) + 0.0,
        heuristic_status=heur.status if heur is not None else "",
        relaxation_status=rel.status if rel is not None else "",
        cut_counts=_cut_counts(model) if model is not None else {},
        separation_rounds=rounds,
        runtimes={k: round(v, 6) for k, v in runtimes.items()},
        numerical_warning=warn,
        lazy=config.lazy,
    )


def _fmt(v, spec):
    return "-" if v is None else format(v, spec)


def report(gap, fmt="table"):
    """Render a GapReport (or a list of them) as a text table or JSON."""
    reports = gap if isinstance(gap, (list, tuple)) else [gap]
    if fmt == "json":
        if len(reports) == 1:
            return reports[0].to_json()
        return "[\n" + ",\n".join(r.to_json() for r in reports) + "\n]"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    head = f"{'case':<20} {'tier':<11} {'heuristic':>14} {'relaxation':>14} {'gap (%)':>8} {'cuts':>12} {'rounds':>6} {'time (s)':>9}"
    lines = [head, "-" * len(head)]
    for r in reports:
        cuts = "/".join(f"{d}:{n}" for d, n in sorted(r.cut_counts.items())) or "-"
        total = sum(r.runtimes.values())
        flag = " *" if r.numerical_warning else ""
        lines.append(
            f"{r.case:<20} {r.relaxation:<11} {_fmt(r.heuristic_objective, '14.4f')} "
            f"{_fmt(r.relaxation_objective, '14.4f')} {_fmt(r.gap_percent, '8.2f')} {cuts:>12} "
            f"{r.separation_rounds:>6} {total:9.3f}{flag}"
        )
    if any(r.numerical_warning for r in reports):
        lines.append("* solver reported a numerical warning; excluded from averages")
    gaps = [r.gap_percent for r in reports if r.gap_percent is not None and not r.numerical_warning]
    if len(reports) > 1 and gaps:
        lines.append(f"mean gap over {len(gaps)} runs: {sum(gaps) / len(gaps):.2f}%")
    return "\n".join(lines)
