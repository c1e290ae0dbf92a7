"""Ground truth by enumerating every loop-bound-respecting path.

A loop's counter is reset whenever one of its entry edges is taken and
incremented on each back edge; a path may take at most ``bound`` back
edges per entry.  Each path is simulated from empty caches.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator

from .cache_sim import Policy, SetAssocConfig, _STEP, empty_state
from .errors import BudgetExceeded
from .program import EdgeKey, LatencyModel, ProgramGraph

__all__ = ["DEFAULT_PATH_BUDGET", "ConcretePath", "OracleReport", "enumerate_paths", "count_paths", "worst_observed"]

DEFAULT_PATH_BUDGET = 2 ** 12


@dataclass(frozen=True)
class ConcretePath:
    edges: tuple[EdgeKey, ...]
    accesses: tuple[int, ...]

    def format(self) -> str:
        return " ".join(f"{s}->{d}" for s, d in self.edges)


@dataclass
class OracleReport:
    policy: str
    associativity: int
    nb_sets: int
    path_count: int
    max_cost: int
    max_misses: int
    argmax_cost: ConcretePath | None = None
    argmax_misses: ConcretePath | None = None
    costs: list[int] = field(default_factory=list, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "k", "nb_sets", "paths", "max_cost", "max_misses", "argmax_cost_path"])
        w.writerow([self.policy, self.associativity, self.nb_sets, self.path_count, self.max_cost,
                    self.max_misses, self.argmax_cost.format() if self.argmax_cost else ""])
        return buf.getvalue()


def _walk(g: ProgramGraph) -> Iterator[list[EdgeKey]]:
    """Yield every bounded path as a list of edge keys (shared list, copy if kept)."""
    out_edges = {n: [e.key for e in g.out_edges(n)] for n in g.nodes}
    entries: dict[EdgeKey, list[str]] = {}
    backs: dict[EdgeKey, list[tuple[str, int]]] = {}
    for lp in g.loops:
        for key in lp.entry_edges:
            entries.setdefault(key, []).append(lp.id)
        for key in lp.back_edges:
            backs.setdefault(key, []).append((lp.id, lp.bound))
    counters: dict[str, int] = {lp.id: 0 for lp in g.loops}
    path: list[EdgeKey] = []
    # explicit stack of (iterator over successor edges, undo record of the edge that led here)
    stack = [(iter(out_edges[g.entry]), None)]
    while stack:
        it, _ = stack[-1]
        key = next(it, None)
        if key is None:
            _, undo = stack.pop()
            if undo is not None:
                path.pop()
                for lid, val in undo:
                    counters[lid] = val
            continue
        undo = [(lid, counters[lid]) for lid in entries.get(key, ())]
        ok = True
        for lid, bound in backs.get(key, ()):
            undo.append((lid, counters[lid]))
        for lid in entries.get(key, ()):
            counters[lid] = 0
        for lid, bound in backs.get(key, ()):
            counters[lid] += 1
            if counters[lid] > bound:
                ok = False
        if not ok:
            for lid, val in reversed(undo):
                counters[lid] = val
            continue
        path.append(key)
        if key[1] == g.exit:
            yield path
            path.pop()
            for lid, val in reversed(undo):
                counters[lid] = val
            continue
        stack.append((iter(out_edges[key[1]]), list(reversed(undo))))


def enumerate_paths(g: ProgramGraph, budget: int = DEFAULT_PATH_BUDGET) -> Iterator[ConcretePath]:
    """Every entry-to-exit path respecting the loop bounds, each exactly once."""
    count = 0
    for keys in _walk(g):
        count += 1
        if count > budget:
            raise BudgetExceeded(f"more than {budget} paths")
        yield ConcretePath(tuple(keys), tuple(b for key in keys for b in g.edge(key).accesses))


def count_paths(g: ProgramGraph, budget: int = DEFAULT_PATH_BUDGET) -> int:
    return sum(1 for _ in enumerate_paths(g, budget))


def worst_observed(
    g: ProgramGraph,
    policy: Policy,
    cfg: SetAssocConfig,
    lat: LatencyModel | None = None,
    budget: int = DEFAULT_PATH_BUDGET,
) -> OracleReport:
    """Maximum cost and miss count over all paths, simulated from empty caches."""
    policy = Policy.parse(policy)
    lat = lat or LatencyModel()
    fn = _STEP[policy]
    k, ns = cfg.associativity, cfg.nb_sets
    rep = OracleReport(policy.value, k, ns, 0, -1, -1)
    for path in enumerate_paths(g, budget):
        states = [empty_state(policy, k)] * ns
        misses = hits = 0
        for b in path.accesses:
            s = b % ns
            states[s], hit = fn(states[s], b, k)
            if hit:
                hits += 1
            else:
                misses += 1
        cost = hits * lat.hit + misses * lat.miss
        rep.path_count += 1
        rep.costs.append(cost)
        if cost > rep.max_cost:
            rep.max_cost, rep.argmax_cost = cost, path
        if misses > rep.max_misses:
            rep.max_misses, rep.argmax_misses = misses, path
    return rep
