"""LRU must/may classification and conflict-set persistence per cache set.

Abstract states map blocks to age bounds (0 = most recently used).  The
must state holds upper bounds on ages of blocks that are surely cached;
the may state holds lower bounds on ages of blocks that may be cached.
Both start empty, matching an empty cache at program entry.

Persistence uses conflict sets: within a scope, an access to ``b`` is
persistent for associativity ``a`` when at most ``a`` distinct blocks of
``b``'s cache set are accessed anywhere in the scope.  Once loaded, such
a block stays cached until the scope is left, so it misses at most once
per entry.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Mapping

from .cache_sim import SetAssocConfig
from .program import AccessRef, Classification, ProgramGraph

__all__ = [
    "AbstractState",
    "Baseline",
    "PersistenceResult",
    "must_update",
    "may_update",
    "must_join",
    "may_join",
    "analyze_states",
    "must_may_analysis",
    "persistence_analysis",
    "essential_scopes_from",
    "baseline_classifications",
    "classification_csv",
]

AbstractState = dict  # block -> age bound; blocks of all cache sets share one map


def must_update(state: Mapping[int, int], b: int, cfg: SetAssocConfig) -> dict[int, int]:
    k, ns = cfg.associativity, cfg.nb_sets
    s = b % ns
    out = {}
    h = state.get(b, k)
    for y, age in state.items():
        if y == b:
            continue
        if y % ns != s or age > h:
            out[y] = age
        elif age < h:
            if age + 1 < k:
                out[y] = age + 1
        else:
            out[y] = age  # same bound as b: stays
    out[b] = 0
    return out


def may_update(state: Mapping[int, int], b: int, cfg: SetAssocConfig) -> dict[int, int]:
    k, ns = cfg.associativity, cfg.nb_sets
    s = b % ns
    out = {}
    h = state.get(b, k)
    for y, age in state.items():
        if y == b:
            continue
        if y % ns != s or age > h:
            out[y] = age
        elif age + 1 < k:
            out[y] = age + 1
    out[b] = 0
    return out


def must_join(x: Mapping[int, int] | None, y: Mapping[int, int] | None) -> dict[int, int] | None:
    if x is None:
        return None if y is None else dict(y)
    if y is None:
        return dict(x)
    return {b: max(x[b], y[b]) for b in x if b in y}


def may_join(x: Mapping[int, int] | None, y: Mapping[int, int] | None) -> dict[int, int] | None:
    if x is None:
        return None if y is None else dict(y)
    if y is None:
        return dict(x)
    out = dict(x)
    for b, age in y.items():
        out[b] = min(out.get(b, age), age)
    return out


def analyze_states(g: ProgramGraph, cfg: SetAssocConfig, update, join) -> dict[AccessRef, dict[int, int]]:
    """Fixpoint over the CFG; returns the abstract state before every access."""
    inn: dict[str, dict | None] = {n: None for n in g.nodes}
    inn[g.entry] = {}
    order = {n: i for i, n in enumerate(g.nodes)}
    work = {g.entry}
    while work:
        n = min(work, key=order.__getitem__)
        work.discard(n)
        st = inn[n]
        for e in g.out_edges(n):
            cur = st
            for b in e.accesses:
                cur = update(cur, b, cfg)
            new = join(inn[e.dst], cur)
            if new != inn[e.dst]:
                inn[e.dst] = new
                work.add(e.dst)
    before: dict[AccessRef, dict[int, int]] = {}
    for e in g.edges:
        cur = inn[e.src]
        for i, b in enumerate(e.accesses):
            before[AccessRef(e.src, e.dst, i)] = cur
            cur = update(cur, b, cfg)
    return before


def must_may_analysis(g: ProgramGraph, cfg: SetAssocConfig, use_may: bool = True) -> dict[AccessRef, Classification]:
    must = analyze_states(g, cfg, must_update, must_join)
    may = analyze_states(g, cfg, may_update, may_join) if use_may else None
    out = {}
    for ref, b in g.accesses():
        if b in must[ref]:
            out[ref] = Classification.ALWAYS_HIT
        elif may is not None and b not in may[ref]:
            out[ref] = Classification.ALWAYS_MISS
        else:
            out[ref] = Classification.UNKNOWN
    return out


@dataclass
class PersistenceResult:
    """``persistent[(b, s, a)]`` is the set of accesses to b persistent in scope s at associativity a."""

    max_assoc: int
    persistent: dict[tuple[int, str, int], frozenset[AccessRef]] = field(default_factory=dict)
    essential: dict[tuple[int, int], frozenset[str]] = field(default_factory=dict)
    conflicts: dict[tuple[int, str], frozenset[int]] = field(default_factory=dict)

    def accesses(self, b: int, s: str, a: int) -> frozenset[AccessRef]:
        return self.persistent.get((b, s, a), frozenset())

    def essential_scopes(self, b: int, a: int) -> frozenset[str]:
        return self.essential.get((b, a), frozenset())

    def covered(self, b: int, a: int) -> frozenset[AccessRef]:
        """Union of the persistent sets of b's essential scopes."""
        out: set[AccessRef] = set()
        for s in self.essential_scopes(b, a):
            out |= self.accesses(b, s, a)
        return frozenset(out)

    def to_csv(self, g: ProgramGraph) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block", "scope", "assoc", "access_count", "essential"])
        for b in g.blocks():
            for s in g.scopes():
                for a in range(1, self.max_assoc + 1):
                    acc = self.accesses(b, s, a)
                    if acc:
                        w.writerow([b, s, a, len(acc), int(s in self.essential_scopes(b, a))])
        return buf.getvalue()


def essential_scopes_from(g: ProgramGraph, persistent: Mapping, b: int, a: int) -> frozenset[str]:
    """Scopes with a non-empty persistent set not contained in some enclosing scope's set."""
    out = set()
    for s in g.scopes():
        ps = persistent.get((b, s, a), frozenset())
        if not ps:
            continue
        if any(ps <= persistent.get((b, t, a), frozenset()) for t in g.scope_ancestors(s)):
            continue
        out.add(s)
    return frozenset(out)


def persistence_analysis(g: ProgramGraph, cfg: SetAssocConfig, max_assoc: int | None = None) -> PersistenceResult:
    k = cfg.associativity if max_assoc is None else max_assoc
    res = PersistenceResult(k)
    accesses = g.accesses()
    for s in g.scopes():
        keys = g.scope_edges(s)
        inside = [(ref, b) for ref, b in accesses if ref.edge in keys]
        blocks = {b for _, b in inside}
        for b in blocks:
            cs = frozenset(y for y in blocks if y % cfg.nb_sets == b % cfg.nb_sets)
            res.conflicts[(b, s)] = cs
            refs = frozenset(ref for ref, y in inside if y == b)
            for a in range(len(cs), k + 1):
                res.persistent[(b, s, a)] = refs
    for b in g.blocks():
        for a in range(1, k + 1):
            res.essential[(b, a)] = essential_scopes_from(g, res.persistent, b, a)
    return res


class Baseline(str, enum.Enum):
    ALL_HIT = "allhit"
    ALL_MISS = "allmiss"
    DM_MUST = "dm-must"
    DM_MUST_PERS = "dm-must-pers"


def baseline_classifications(
    g: ProgramGraph, cfg: SetAssocConfig, mode: Baseline
) -> tuple[dict[AccessRef, Classification], PersistenceResult | None]:
    """Classifications valid for every policy.

    The DM modes analyse a one-way cache: the block accessed last in a set
    is cached under every policy, and nothing is ever provably evicted, so
    only the must analysis is used.
    """
    mode = Baseline(mode)
    if mode is Baseline.ALL_HIT:
        return {ref: Classification.ALWAYS_HIT for ref, _ in g.accesses()}, None
    if mode is Baseline.ALL_MISS:
        return {ref: Classification.ALWAYS_MISS for ref, _ in g.accesses()}, None
    dm = SetAssocConfig(cfg.nb_sets, 1)
    cls = must_may_analysis(g, dm, use_may=False)
    pers = persistence_analysis(g, dm) if mode is Baseline.DM_MUST_PERS else None
    return cls, pers


def classification_csv(g: ProgramGraph, cls: Mapping[AccessRef, Classification]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edge", "access_index", "block", "class"])
    for ref, b in g.accesses():
        w.writerow([f"{ref.src}->{ref.dst}", ref.index, b, cls[ref].value])
    return buf.getvalue()
