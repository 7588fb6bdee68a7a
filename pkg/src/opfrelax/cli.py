"""Command-line entry point: ``opfrelax <case> --relaxation ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .caseio import CaseError, dump_network_json, load_case
from .graph import clique_tree, cycle_basis, decomposition_width, tree_decomposition
from .pipeline import TIERS, PipelineError, RunConfig, build_model, report, run
from .solver import SolveOptions

DUMPS = ("network", "bags", "cycles", "model", "cuts")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="opfrelax",
        description="Convex relaxations of AC optimal power flow: SOCP, determinant-cut P-SDP and cycle constraints.",
    )
    ap.add_argument("case", help="MATPOWER-style case file (.m)")
    ap.add_argument("--relaxation", choices=TIERS, default="psdp", help="relaxation tier (default: psdp)")
    ap.add_argument("--lazy", action="store_true", help="add determinant cuts by separation instead of all up front")
    ap.add_argument("--max-minor-dim", type=int, default=3, metavar="K", help="largest principal minor used as a cut")
    ap.add_argument("--cut-tol", type=float, default=1e-6, metavar="T", help="violation threshold for separation")
    ap.add_argument("--cuts-per-round", type=int, default=10, metavar="M", help="cuts added per separation round")
    ap.add_argument("--max-rounds", type=int, default=20, help="cap on separation rounds")
    ap.add_argument("--tol", type=float, default=1e-6, metavar="E", help="KKT tolerance")
    ap.add_argument("--max-iter", type=int, default=1000, help="Newton iteration cap per solve")
    ap.add_argument("--mu0", type=float, default=1.0, help="initial barrier weight")
    ap.add_argument("--seed", type=int, default=None, help="seed numpy's global RNG (the pipeline is deterministic)")
    ap.add_argument("--extended", action="store_true", help="use tap ratios, phase shifts and line charging")
    ap.add_argument("--all-refs", action="store_true", help="emit cycle constraints for every reference bus")
    ap.add_argument("--no-heuristic", action="store_true", help="skip the AC local solve (no gap is reported)")
    ap.add_argument("--format", choices=("table", "json"), default="table", help="output format")
    ap.add_argument("--verbose", "-v", action="store_true", help="solver trace on standard error")
    dump = ap.add_mutually_exclusive_group()
    for name in DUMPS:
        dump.add_argument(f"--dump-{name}", action="store_true", help=f"print the {name} as JSON and exit")
    return ap


def _config(args):
    solver = SolveOptions(tol_kkt=args.tol, max_iter=args.max_iter, mu0=args.mu0)
    return RunConfig(
        case=args.case,
        relaxation=args.relaxation,
        lazy=args.lazy,
        max_minor_dim=args.max_minor_dim,
        cut_tol=args.cut_tol,
        cuts_per_round=args.cuts_per_round,
        max_rounds=args.max_rounds,
        solver=solver,
        output=args.format,
        extended=args.extended,
        all_refs=args.all_refs,
        heuristic=not args.no_heuristic,
    )


def dump_bags(net):
    bags = tree_decomposition(net)
    return {
        "width": decomposition_width(bags),
        "bags": [{"nodes": list(b.nodes), "fillins": sorted(list(p) for p in b.fillins)} for b in bags],
        "tree": [list(e) for e in clique_tree(bags)],
    }


def dump_cycles(net):
    return {"cycles": [{"nodes": list(c.nodes), "edges": [list(e) for e in c.edges]} for c in cycle_basis(net)]}


def dump_cuts(model, rounds):
    """Active principal-minor constraints with where they came from."""
    origin = {}
    for k, cuts in rounds:
        for cut in cuts:
            for pre in cut.prerequisites:
                origin.setdefault(pre.subset, {"source": "prerequisite", "round": k, "of": list(cut.subset)})
            origin[cut.subset] = {"source": "separation", "round": k, "violation": cut.value}
    out = []
    for s in sorted(model.active_minors(), key=lambda s: (len(s), s)):
        entry = {"subset": list(s), "dim": len(s)}
        entry.update(origin.get(s, {"source": "initial"}))
        out.append(entry)
    return {"tier": model.tier, "cuts": out}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    if args.seed is not None:
        np.random.seed(args.seed)
    try:
        config = _config(args)
    except ValueError as exc:
        print(f"opfrelax: {exc}", file=sys.stderr)
        return 2

    if args.dump_network or args.dump_bags or args.dump_cycles or args.dump_model:
        try:
            net = load_case(args.case)
        except (OSError, CaseError) as exc:
            print(f"opfrelax: parse: {exc}", file=sys.stderr)
            return 2
        if args.dump_network:
            print(dump_network_json(net))
        elif args.dump_bags:
            print(json.dumps(dump_bags(net), indent=2))
        elif args.dump_cycles:
            print(json.dumps(dump_cycles(net), indent=2))
        else:
            print(json.dumps(build_model(net, config).describe(), indent=2))
        return 0

    trace = {}
    try:
        gap = run(config, trace=trace)
    except PipelineError as exc:
        print(f"opfrelax: {exc}", file=sys.stderr)
        return 2
    if args.dump_cuts:
        if trace.get("model") is None:
            print("opfrelax: --dump-cuts needs a relaxation tier other than ac", file=sys.stderr)
            return 2
        print(json.dumps(dump_cuts(trace["model"], trace.get("rounds", [])), indent=2))
    else:
        print(report(gap, args.format))
    status = gap.heuristic_status if config.relaxation == "ac" else gap.relaxation_status
    return 0 if status in ("optimal", "local-optimal") else 1


if __name__ == "__main__":
    sys.exit(main())
