"""IPET models: longest path as an integer program over edge counts.

Variable names (all integer, lower bound 0):

* ``x<id>``             executions of exec edge ``id``
* ``acc_b<b>``          accesses to block ``b``
* ``miss_b<b>``         misses to ``b`` under the analysed policy
* ``hit_b<b>``          hits to ``b`` under the analysed policy
* ``lmiss_b<b>_a<a>``   misses to ``b`` of a hypothetical LRU(a) cache
* ``lhit_b<b>_a<a>``    hits to ``b`` of a hypothetical LRU(a) cache
* ``miss_s<s>``, ``hit_s<s>``, ``lmiss_s<s>_a<a>``, ``lhit_s<s>_a<a>``
  the same quantities summed over the blocks of cache set ``s``

The LRU(a) quantities are bounded via persistence: an LRU(a) cache misses
a persistent access at most once per entry into its outermost persistent
scope, and a non-persistent access at most every time it executes.
Competitiveness claims of the analysed policy relative to LRU(a) then
transfer these bounds to the real cache.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .cache_sim import Policy, SetAssocConfig
from .competitiveness import ClaimMode, claims_for
from .errors import UnboundedModel
from .lru_analysis import (
    Baseline,
    PersistenceResult,
    baseline_classifications,
    must_may_analysis,
    persistence_analysis,
)
from .milp import LinearModel, Solution, solve_exact
from .program import ROOT_SCOPE, EdgeKind, ExecGraph, LatencyModel, ProgramGraph, build_exec_graph

__all__ = [
    "AnalysisConfig",
    "AnalysisPlan",
    "BoundReport",
    "plan_for",
    "build_base_model",
    "add_classic_persistence",
    "add_lru_hypothetical",
    "add_competitiveness",
    "applicable_claims",
    "build_model",
    "solve_model",
    "analyze_program",
    "model_to_json",
]


class AnalysisConfig(str, enum.Enum):
    ALLHIT = "allhit"
    ALLMISS = "allmiss"
    DM_MUST = "dm-must"
    DM_MUST_PERS = "dm-must-pers"
    LRU_MAYMUST = "lru-maymust"
    LRU_MAYMUST_PERS = "lru-maymust-pers"
    BLOCK_MISS = "block-miss"
    BLOCK_HIT = "block-hit"
    MISS = "miss"
    HIT = "hit"
    ALL_COMP = "all-comp"

    @property
    def is_lru_reference(self) -> bool:
        """LRU may/must configurations analyse an LRU cache whatever the policy."""
        return self in (AnalysisConfig.LRU_MAYMUST, AnalysisConfig.LRU_MAYMUST_PERS)


@dataclass(frozen=True)
class AnalysisPlan:
    """What goes into a model: classification source, persistence, claim modes."""

    classification: str  # allhit | allmiss | dm | lru
    classic_persistence: bool = False
    modes: frozenset[ClaimMode] = frozenset()


_COMP = {
    AnalysisConfig.BLOCK_MISS: {ClaimMode.BLOCK_MISS},
    AnalysisConfig.BLOCK_HIT: {ClaimMode.BLOCK_HIT},
    AnalysisConfig.MISS: {ClaimMode.MISS},
    AnalysisConfig.HIT: {ClaimMode.HIT},
    AnalysisConfig.ALL_COMP: set(ClaimMode),
}


def plan_for(config: AnalysisConfig | str) -> AnalysisPlan:
    config = AnalysisConfig(config)
    if config is AnalysisConfig.ALLHIT:
        return AnalysisPlan("allhit")
    if config is AnalysisConfig.ALLMISS:
        return AnalysisPlan("allmiss")
    if config is AnalysisConfig.DM_MUST:
        return AnalysisPlan("dm")
    if config is AnalysisConfig.DM_MUST_PERS:
        return AnalysisPlan("dm", True)
    if config is AnalysisConfig.LRU_MAYMUST:
        return AnalysisPlan("lru")
    if config is AnalysisConfig.LRU_MAYMUST_PERS:
        return AnalysisPlan("lru", True)
    return AnalysisPlan("dm", True, frozenset(_COMP[config]))


@dataclass
class BoundReport:
    value: int
    config: str
    policy: str
    objective: str
    nodes: int = 0
    vacuous: bool = False
    activity: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("bound must be non-negative")


# -- model construction --------------------------------------------------------

def _xv(i: int) -> str:
    return f"x{i}"


def _edge_bounds(eg: ExecGraph) -> dict[int, int]:
    g = eg.program
    out = {}
    for e in eg.edges:
        ub = 1
        for lp in g.loops_containing(e.cfg_edge):
            ub *= lp.bound + 1
        out[e.id] = ub
    return out


def _check_acyclic(eg: ExecGraph) -> None:
    back = {k for lp in eg.program.loops for k in lp.back_edges}
    indeg = {n: 0 for n in eg.nodes}
    succ: dict[str, list[str]] = {n: [] for n in eg.nodes}
    for e in eg.edges:
        if e.cfg_edge in back and e.dst == eg.program.edge(e.cfg_edge).dst:
            continue
        indeg[e.dst] += 1
        succ[e.src].append(e.dst)
    stack = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while stack:
        n = stack.pop()
        seen += 1
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                stack.append(m)
    if seen != len(eg.nodes):
        raise UnboundedModel("an exec-graph cycle is not bounded by any loop")


def build_base_model(eg: ExecGraph) -> LinearModel:
    """Unit flow from entry to exit, flow conservation and loop bounds."""
    _check_acyclic(eg)
    g = eg.program
    m = LinearModel(tag="base")
    ubs = _edge_bounds(eg)
    for e in eg.edges:
        m.add_var(_xv(e.id), ubs[e.id])
    outs: dict[str, list[int]] = {n: [] for n in eg.nodes}
    ins: dict[str, list[int]] = {n: [] for n in eg.nodes}
    for e in eg.edges:
        outs[e.src].append(e.id)
        ins[e.dst].append(e.id)
    m.add_constraint("source", {_xv(i): 1 for i in outs[g.entry]}, "=", 1)
    m.add_constraint("sink", {_xv(i): 1 for i in ins[g.exit]}, "=", 1)
    for idx, n in enumerate(eg.nodes):
        if n in (g.entry, g.exit):
            continue
        co: dict[str, int] = {}
        for i in outs[n]:
            co[_xv(i)] = co.get(_xv(i), 0) + 1
        for i in ins[n]:
            co[_xv(i)] = co.get(_xv(i), 0) - 1
        m.add_constraint(f"flow_n{idx}", co, "=", 0)
    for lp in g.loops:
        co = {}
        for key in lp.back_edges:
            for i in eg.head_edges(key):
                co[_xv(i)] = co.get(_xv(i), 0) + 1
        for key in lp.entry_edges:
            for i in eg.head_edges(key):
                co[_xv(i)] = co.get(_xv(i), 0) - lp.bound
        m.add_constraint(f"loop_{lp.id}", co, "<=", 0)
    m.set_objective({_xv(e.id): e.cost for e in eg.edges if e.cost})
    return m


def _entry_terms(eg: ExecGraph, scope: str) -> tuple[dict[int, int], int]:
    """Edge ids whose flow counts entries into ``scope``, plus a constant for the program scope."""
    if scope == ROOT_SCOPE:
        return {}, 1
    out: dict[int, int] = {}
    for key in eg.program.loop(scope).entry_edges:
        for i in eg.head_edges(key):
            out[i] = out.get(i, 0) + 1
    return out, 0


def add_classic_persistence(model: LinearModel, eg: ExecGraph, pr: PersistenceResult, a: int) -> LinearModel:
    """Misses among the persistent accesses of each essential scope <= entries into it."""
    for b in eg.program.blocks():
        for s in sorted(pr.essential_scopes(b, a)):
            refs = pr.accesses(b, s, a)
            miss_ids = [i for ref in sorted(refs, key=_ref_key) for i in eg.access_edges(ref)
                        if eg.edges[i].kind is EdgeKind.MISS]
            if not miss_ids:
                continue
            entries, const = _entry_terms(eg, s)
            co: dict[str, int] = {_xv(i): 1 for i in miss_ids}
            for i, c in entries.items():
                co[_xv(i)] = co.get(_xv(i), 0) - c
            model.add_constraint(f"pers_b{b}_{s}_a{a}", co, "<=", const)
    return model


def _ref_key(ref):
    return (ref.src, ref.dst, ref.index)


def _ensure_block_vars(model: LinearModel, eg: ExecGraph, b: int) -> None:
    if f"acc_b{b}" in model.variables:
        return
    acc = eg.block_edges(b)
    mis = eg.block_edges(b, EdgeKind.MISS)
    hit = eg.block_edges(b, EdgeKind.HIT)
    ub = model.variables
    for name, ids in ((f"acc_b{b}", acc), (f"miss_b{b}", mis), (f"hit_b{b}", hit)):
        model.add_var(name, sum(ub[_xv(i)] for i in ids))
        co = {_xv(i): 1 for i in ids}
        co[name] = -1
        model.add_constraint(f"def_{name}", co, "=", 0)


def add_lru_hypothetical(model: LinearModel, pr: PersistenceResult, eg: ExecGraph, assocs: Iterable[int]) -> LinearModel:
    """Bound LRU(a) misses per block from persistence and relate LRU(a) hits to accesses."""
    ub = model.variables
    for b in eg.program.blocks():
        _ensure_block_vars(model, eg, b)
        for a in sorted(set(assocs)):
            covered = pr.covered(b, a)
            rhs_edges: dict[int, int] = {}
            const = 0
            for s in sorted(pr.essential_scopes(b, a)):
                entries, c = _entry_terms(eg, s)
                const += c
                for i, v in entries.items():
                    rhs_edges[i] = rhs_edges.get(i, 0) + v
            for i in eg.block_edges(b):
                if eg.edges[i].access not in covered:
                    rhs_edges[i] = rhs_edges.get(i, 0) + 1
            lm, lh = f"lmiss_b{b}_a{a}", f"lhit_b{b}_a{a}"
            model.add_var(lm, const + sum(v * ub[_xv(i)] for i, v in rhs_edges.items()))
            model.add_var(lh, ub[f"acc_b{b}"])
            co = {lm: 1}
            for i, v in rhs_edges.items():
                co[_xv(i)] = -v
            model.add_constraint(f"lru_miss_b{b}_a{a}", co, "<=", const)
            model.add_constraint(f"lru_hit_b{b}_a{a}", {lh: 1, lm: 1, f"acc_b{b}": -1}, ">=", 0)
    return model


def applicable_claims(policy: Policy, k: int, modes: Iterable[ClaimMode]) -> dict[ClaimMode, list[tuple[int, Fraction, Fraction]]]:
    """Catalog bounds ``(a, r, c)`` of ``policy(k)`` relative to LRU(a), a = 1..k."""
    out: dict[ClaimMode, list[tuple[int, Fraction, Fraction]]] = {}
    for mode in modes:
        rows = []
        for a in range(1, k + 1):
            for cl in claims_for(policy, k, mode, a):
                rows.append((a, cl.r, cl.c))
        out[mode] = rows
    return out


def add_competitiveness(
    model: LinearModel,
    eg: ExecGraph,
    claims: Mapping[ClaimMode, list[tuple[int, Fraction, Fraction]]],
    cfg: SetAssocConfig,
) -> LinearModel:
    """Per-block and per-set competitiveness constraints relative to the LRU(a) variables."""
    blocks = eg.program.blocks()
    ub = model.variables
    for b in blocks:
        for n, (a, r, c) in enumerate(claims.get(ClaimMode.BLOCK_MISS, [])):
            model.add_constraint(f"bmiss_b{b}_a{a}_{n}", {f"miss_b{b}": 1, f"lmiss_b{b}_a{a}": -r}, "<=", c)
        for n, (a, r, c) in enumerate(claims.get(ClaimMode.BLOCK_HIT, [])):
            model.add_constraint(f"bhit_b{b}_a{a}_{n}", {f"hit_b{b}": 1, f"lhit_b{b}_a{a}": -r}, ">=", -c)
    set_modes = [m for m in (ClaimMode.MISS, ClaimMode.HIT) if claims.get(m)]
    if not set_modes:
        return model
    by_set: dict[int, list[int]] = {}
    for b in blocks:
        by_set.setdefault(b % cfg.nb_sets, []).append(b)
    assocs = sorted({a for m in set_modes for a, _, _ in claims[m]})
    for s, members in sorted(by_set.items()):
        def agg(name, parts):
            if name in model.variables:
                return
            model.add_var(name, sum(ub[p] for p in parts))
            co = {p: 1 for p in parts}
            co[name] = -1
            model.add_constraint(f"def_{name}", co, "=", 0)

        agg(f"miss_s{s}", [f"miss_b{b}" for b in members])
        agg(f"hit_s{s}", [f"hit_b{b}" for b in members])
        for a in assocs:
            agg(f"lmiss_s{s}_a{a}", [f"lmiss_b{b}_a{a}" for b in members])
            agg(f"lhit_s{s}_a{a}", [f"lhit_b{b}_a{a}" for b in members])
        for n, (a, r, c) in enumerate(claims.get(ClaimMode.MISS, [])):
            model.add_constraint(f"smiss_s{s}_a{a}_{n}", {f"miss_s{s}": 1, f"lmiss_s{s}_a{a}": -r}, "<=", c)
        for n, (a, r, c) in enumerate(claims.get(ClaimMode.HIT, [])):
            model.add_constraint(f"shit_s{s}_a{a}_{n}", {f"hit_s{s}": 1, f"lhit_s{s}_a{a}": -r}, ">=", -c)
    return model


def build_model(
    g: ProgramGraph,
    policy: Policy,
    cfg: SetAssocConfig,
    plan: AnalysisPlan | AnalysisConfig | str,
    lat: LatencyModel | None = None,
) -> tuple[LinearModel, ExecGraph, bool]:
    """Model for ``policy`` on ``cfg``; the flag is True when no claim applies (vacuous)."""
    if not isinstance(plan, AnalysisPlan):
        plan = plan_for(plan)
    policy = Policy.parse(policy)
    lat = lat or LatencyModel()
    k = cfg.associativity
    pr = None
    if plan.classification == "allhit":
        cls, _ = baseline_classifications(g, cfg, Baseline.ALL_HIT)
    elif plan.classification == "allmiss":
        cls, _ = baseline_classifications(g, cfg, Baseline.ALL_MISS)
    elif plan.classification == "dm":
        cls, _ = baseline_classifications(g, cfg, Baseline.DM_MUST)
    elif plan.classification == "lru":
        cls = must_may_analysis(g, cfg)
    else:
        raise ValueError(f"unknown classification source {plan.classification!r}")
    eg = build_exec_graph(g, cls, lat)
    model = build_base_model(eg)
    if plan.classic_persistence or plan.modes:
        pr = persistence_analysis(g, cfg)
    if plan.classic_persistence:
        add_classic_persistence(model, eg, pr, k if plan.classification == "lru" else 1)
    vacuous = False
    if plan.modes:
        claims = applicable_claims(policy, k, plan.modes)
        vacuous = not any(claims.values())
        assocs = sorted({a for rows in claims.values() for a, _, _ in rows})
        if assocs:
            add_lru_hypothetical(model, pr, eg, assocs)
            add_competitiveness(model, eg, claims, cfg)
    _order_for_branching(model)
    model.tag = policy.value
    return model, eg, vacuous


_BRANCH_PREFIX = ("miss_s", "hit_s", "lmiss_s", "lhit_s", "miss_b", "hit_b", "acc_b", "lmiss_b", "lhit_b")


def _order_for_branching(model: LinearModel) -> None:
    """Declare aggregate counts before edge counts.

    The solver branches on the first fractional variable; branching on a
    per-set or per-block miss count cuts off fractional miss totals that
    would otherwise be spread over many symmetric hit/miss edge pairs.
    """
    def rank(name):
        for i, p in enumerate(_BRANCH_PREFIX):
            if name.startswith(p):
                return i
        return len(_BRANCH_PREFIX)

    names = sorted(model.variables, key=rank)
    model.variables = {v: model.variables[v] for v in names}


def solve_model(model: LinearModel, node_limit: int | None = None) -> Solution:
    return solve_exact(model, node_limit)


def analyze_program(
    g: ProgramGraph,
    policy: Policy,
    cfg: SetAssocConfig,
    config: AnalysisConfig | str,
    lat: LatencyModel | None = None,
    node_limit: int | None = None,
) -> BoundReport:
    """WCET bound (or miss bound with ``LatencyModel.miss_count()``) for one configuration."""
    config = AnalysisConfig(config)
    lat = lat or LatencyModel()
    analysed = Policy.LRU if config.is_lru_reference else Policy.parse(policy)
    model, eg, vacuous = build_model(g, analysed, cfg, config, lat)
    model.tag = f"{Policy.parse(policy).value}:{config.value}"
    sol = solve_exact(model, node_limit)
    objective = "misses" if (lat.hit, lat.miss) == (0, 1) else "cycles"
    return BoundReport(sol.value, config.value, Policy.parse(policy).value, objective, sol.nodes, vacuous, sol.values)


def model_to_json(model: LinearModel) -> str:
    """Debug dump: ``{"tag", "objective", "variables": {name: ub}, "constraints": [...]}``."""
    return json.dumps(
        {
            "tag": model.tag,
            "objective": model.objective,
            "variables": model.variables,
            "constraints": [
                {"name": c.name, "coeffs": c.coeffs, "sense": c.sense, "rhs": c.rhs} for c in model.constraints
            ],
        },
        indent=1,
        sort_keys=False,
    )
