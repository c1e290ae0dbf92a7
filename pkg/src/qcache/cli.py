"""Command-line front end.

Subcommands: ``simulate``, ``verify-claims``, ``analyze``, ``sweep`` and
``emit-lp``.  Tables go to stdout (or ``--out``) as CSV.  The exit code is
1 when a soundness check or claim verification fails and 2 on usage or
input errors.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .cache_sim import Policy, SetAssocConfig, format_state, parse_trace, simulate_set_assoc
from .competitiveness import SearchBudget, format_claim, parse_claims, verify_many
from .errors import QCacheError
from .experiment import (
    KNOWN_UNSOUND,
    catalog_csv,
    CatalogRow,
    load_config,
    run_experiment,
    verify_catalog,
)
from .ipet import AnalysisConfig, AnalysisPlan, build_model, model_to_json
from .competitiveness import ClaimMode
from .lpformat import emit_lp
from .milp import solve_exact
from .oracle import worst_observed
from .program import LatencyModel, parse_program

__all__ = ["main", "build_parser"]


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _budget(raw: str | None, k: int) -> SearchBudget:
    if not raw:
        return SearchBudget.default(k)
    parts = [int(x) for x in raw.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("budget is blocks,len,depth")
    return SearchBudget(*parts)


def _add_cache_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", default="LRU", help="LRU, FIFO or MRU (alias NMRU)")
    p.add_argument("-k", "--assoc", type=int, default=4, help="associativity")
    p.add_argument("--sets", type=int, default=1, help="number of cache sets")


def _add_plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", choices=[c.value for c in AnalysisConfig], help="named analysis configuration")
    p.add_argument("--baseline", choices=["allhit", "allmiss", "dm", "dmpers"], help="classification baseline")
    p.add_argument("--lru-persistence", action="store_true", help="LRU may/must analysis with persistence")
    for mode in ("block-miss", "block-hit", "miss", "hit", "all-comp"):
        p.add_argument(f"--{mode}", action="store_true", help=f"add {mode} competitiveness constraints")
    p.add_argument("--hit-latency", type=int, default=1)
    p.add_argument("--miss-latency", type=int, default=11)
    p.add_argument("--objective", choices=["cycles", "misses"], default="cycles")


def _plan(args) -> tuple[AnalysisPlan | AnalysisConfig, bool]:
    """Analysis plan from flags; the flag is True when an LRU cache is analysed regardless of policy."""
    modes = set()
    if args.all_comp:
        modes = set(ClaimMode)
    for flag, mode in (("block_miss", ClaimMode.BLOCK_MISS), ("block_hit", ClaimMode.BLOCK_HIT),
                       ("miss", ClaimMode.MISS), ("hit", ClaimMode.HIT)):
        if getattr(args, flag):
            modes.add(mode)
    if args.config:
        if modes or args.baseline or args.lru_persistence:
            raise SystemExit("--config cannot be combined with family flags")
        conf = AnalysisConfig(args.config)
        return conf, conf.is_lru_reference
    if args.lru_persistence:
        if modes or args.baseline:
            raise SystemExit("--lru-persistence analyses LRU only and takes no other families")
        return AnalysisPlan("lru", True), True
    base = args.baseline or ("dmpers" if modes else "dm")
    cls = {"allhit": "allhit", "allmiss": "allmiss", "dm": "dm", "dmpers": "dm"}[base]
    if modes and cls != "dm":
        raise SystemExit("competitiveness families build on the dm baselines")
    return AnalysisPlan(cls, base == "dmpers" or bool(modes), frozenset(modes)), False


def _latency(args) -> LatencyModel:
    if args.objective == "misses":
        return LatencyModel.miss_count()
    return LatencyModel(args.hit_latency, args.miss_latency)


def cmd_simulate(args) -> int:
    if args.trace:
        sigma = parse_trace(Path(args.trace).read_text())
    else:
        sigma = [int(x) for x in args.seq.replace(",", " ").split()]
    cfg = SetAssocConfig(args.sets, args.assoc)
    res = simulate_set_assoc(cfg, Policy.parse(args.policy), sigma)
    _write(res.to_csv(), args.out)
    if args.verbose:
        from .cache_sim import empty_state, step

        pol = Policy.parse(args.policy)
        states = [empty_state(pol, cfg.associativity) for _ in range(cfg.nb_sets)]
        for b in sigma:
            s = cfg.set_of(b)
            states[s], out = step(pol, cfg.associativity, states[s], b)
            print(f"# {b} {out.value} set{s} {format_state(pol, states[s])}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    if args.claims:
        claims = parse_claims(Path(args.claims).read_text())
        rows = []
        by_budget: dict = {}
        for cl in claims:
            by_budget.setdefault(_budget(args.budget, cl.k), []).append(cl)
        found = {}
        for bud, group in by_budget.items():
            found.update({(cl, str(bud)): cx for cl, cx in verify_many(group, bud, workers=args.workers).items()})
        for cl in claims:
            bud = str(_budget(args.budget, cl.k))
            cx = found[(cl, bud)]
            rows.append(CatalogRow(format_claim(cl), bud, "NO_COUNTEREXAMPLE" if cx is None else "COUNTEREXAMPLE",
                                   "" if cx is None else " ".join(map(str, cx.sigma))))
    else:
        bud = _budget(args.budget, args.kmax) if args.budget else None
        rows = verify_catalog(args.kmax, bud, workers=args.workers)
    _write(catalog_csv(rows), args.out)
    return 0 if all(r.ok for r in rows) else 1


def cmd_analyze(args) -> int:
    if args.config_file:
        cfg = load_config(Path(args.config_file).read_text(), Path(args.config_file).parent,
                          out_csv=args.out, jobs=args.jobs)
        table = run_experiment(cfg)
        if not args.out:
            sys.stdout.write(table.to_csv())
        return 1 if table.failures else 0
    plan, lru_only = _plan(args)
    cache = SetAssocConfig(args.sets, args.assoc)
    lat = _latency(args)
    lines = ["program,policy,k,nb_sets,analysis,objective,bound,oracle_max,sound,nodes"]
    status = 0
    label = plan.value if isinstance(plan, AnalysisConfig) else _plan_label(plan)
    for path in args.programs:
        g = parse_program(Path(path).read_text())
        analysed = Policy.LRU if lru_only else Policy.parse(args.policy)
        model, _, _ = build_model(g, analysed, cache, plan, lat)
        sol = solve_exact(model, args.node_limit)
        oracle_max, sound = "", ""
        if args.oracle:
            ref = worst_observed(g, analysed, cache, lat).max_cost
            oracle_max, sound = str(ref), str(sol.value >= ref).lower()
            if sol.value < ref and label not in KNOWN_UNSOUND:
                status = 1
        if args.emit_lp:
            emit_lp(model, args.emit_lp if len(args.programs) == 1 else f"{args.emit_lp}.{Path(path).stem}.lp")
        if args.json:
            Path(args.json).write_text(model_to_json(model))
        lines.append(f"{Path(path).stem},{Policy.parse(args.policy).value},{args.assoc},{args.sets},{label},"
                     f"{args.objective},{sol.value},{oracle_max},{sound},{sol.nodes}")
    _write("\n".join(lines) + "\n", args.out)
    return status


def _plan_label(plan: AnalysisPlan) -> str:
    if plan.classification == "lru":
        return "lru-maymust-pers"
    if plan.modes == frozenset(ClaimMode):
        return "all-comp"
    if plan.modes:
        names = [m.value.lower().replace("_", "-") for m in ClaimMode if m in plan.modes]
        return "+".join(names)
    if plan.classification in ("allhit", "allmiss"):
        return plan.classification
    return "dm-must-pers" if plan.classic_persistence else "dm-must"


def cmd_sweep(args) -> int:
    base = load_config(Path(args.config_file).read_text(), Path(args.config_file).parent, jobs=args.jobs)
    key, _, raw = args.vary.partition("=")
    key = {"k": "k", "assoc": "k", "sets": "nb_sets", "nb_sets": "nb_sets"}.get(key)
    if key is None or not raw:
        raise SystemExit("--vary expects k=1,2,4 or sets=1,2,4")
    out = []
    failed = False
    for i, val in enumerate(int(v) for v in raw.split(",")):
        table = run_experiment(replace(base, **{key: val}, out_csv=None))
        failed |= bool(table.failures)
        text = table.to_csv()
        out.append(text if i == 0 else text.split("\n", 1)[1])
    _write("".join(out), args.out)
    return 1 if failed else 0


def cmd_emit_lp(args) -> int:
    plan, lru_only = _plan(args)
    g = parse_program(Path(args.program).read_text())
    analysed = Policy.LRU if lru_only else Policy.parse(args.policy)
    model, _, _ = build_model(g, analysed, SetAssocConfig(args.sets, args.assoc), plan, _latency(args))
    text = emit_lp(model)
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcache", description="Cache policy competitiveness and WCET bounds.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="simulate a trace and print per-block counts")
    _add_cache_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="file with one block id per line")
    src.add_argument("--seq", help="inline sequence, e.g. '0 1 2 0'")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true", help="log every state to stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-claims", help="exhaustively check claims (default: the whole catalog)")
    p.add_argument("--claims", help="claim file: P k Q l MODE r c per line")
    p.add_argument("--kmax", type=int, default=4)
    p.add_argument("--budget", help="blocks,len,depth (default per k: k+2,10,8)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="bound programs for one analysis, or run a config file batch")
    p.add_argument("programs", nargs="*")
    _add_cache_args(p)
    _add_plan_args(p)
    p.add_argument("--config-file", help="key=value experiment description")
    p.add_argument("--no-oracle", dest="oracle", action="store_false")
    p.add_argument("--emit-lp", help="write the LP model here")
    p.add_argument("--json", help="write a JSON dump of the model here")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="repeat a config-file experiment over k or set counts")
    p.add_argument("config_file")
    p.add_argument("--vary", required=True, help="k=1,2,4 or sets=1,2,4")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emit-lp", help="print the LP model of one program")
    p.add_argument("program")
    _add_cache_args(p)
    _add_plan_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit_lp)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "analyze" and not args.config_file and not args.programs:
        print("analyze: give program files or --config-file", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (QCacheError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
