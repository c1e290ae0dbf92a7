"""Control-flow graphs with memory accesses on edges, loop scopes, exec graphs.

Program text format, one directive per line (``#`` starts a comment)::

    node <id>
    entry <id>
    exit <id>
    edge <src> <dst> [access <block>[,<block>...]]
    loop <id> header <node> bound <n> parent <loop|none> back <s>-><d>[,...] entryedges <s>-><d>[,...]

Loop bodies are the natural loops of the declared back edges.  An access
is identified by ``(src, dst, index)`` where ``index`` is its position on
the edge.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InvalidParams, MissingClassification, ParseError, ValidationError

__all__ = [
    "Edge",
    "Loop",
    "ProgramGraph",
    "AccessRef",
    "ROOT_SCOPE",
    "LatencyModel",
    "Classification",
    "EdgeKind",
    "ExecEdge",
    "ExecGraph",
    "parse_program",
    "serialize_program",
    "build_exec_graph",
]

ROOT_SCOPE = "program"

EdgeKey = tuple[str, str]


@dataclass(frozen=True)
class AccessRef:
    src: str
    dst: str
    index: int

    @property
    def edge(self) -> EdgeKey:
        return (self.src, self.dst)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    accesses: tuple[int, ...] = ()

    @property
    def key(self) -> EdgeKey:
        return (self.src, self.dst)


@dataclass(frozen=True)
class Loop:
    id: str
    header: str
    bound: int
    parent: str | None
    back_edges: tuple[EdgeKey, ...]
    entry_edges: tuple[EdgeKey, ...]
    body_nodes: frozenset[str] = frozenset()
    body_edges: frozenset[EdgeKey] = frozenset()


@dataclass(frozen=True)
class ProgramGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    entry: str
    exit: str
    loops: tuple[Loop, ...] = ()

    def edge(self, key: EdgeKey) -> Edge:
        return self._edge_map[key]

    @property
    def _edge_map(self) -> dict[EdgeKey, Edge]:
        m = self.__dict__.get("_emap")
        if m is None:
            m = {e.key: e for e in self.edges}
            object.__setattr__(self, "_emap", m)
        return m

    def loop(self, loop_id: str) -> Loop:
        for lp in self.loops:
            if lp.id == loop_id:
                return lp
        raise KeyError(loop_id)

    def accesses(self) -> list[tuple[AccessRef, int]]:
        """Every access with its block, in edge order."""
        return [(AccessRef(e.src, e.dst, i), b) for e in self.edges for i, b in enumerate(e.accesses)]

    def blocks(self) -> list[int]:
        return sorted({b for e in self.edges for b in e.accesses})

    def out_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node]

    def in_edges(self, node: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == node]

    def scopes(self) -> list[str]:
        """Scope ids: the whole program followed by the loops."""
        return [ROOT_SCOPE] + [lp.id for lp in self.loops]

    def scope_edges(self, scope: str) -> frozenset[EdgeKey]:
        if scope == ROOT_SCOPE:
            return frozenset(e.key for e in self.edges)
        return self.loop(scope).body_edges

    def scope_parent(self, scope: str) -> str | None:
        if scope == ROOT_SCOPE:
            return None
        return self.loop(scope).parent or ROOT_SCOPE

    def scope_ancestors(self, scope: str) -> list[str]:
        out = []
        s = self.scope_parent(scope)
        while s is not None:
            out.append(s)
            s = self.scope_parent(s)
        return out

    def loops_containing(self, key: EdgeKey) -> list[Loop]:
        return [lp for lp in self.loops if key in lp.body_edges]


# -- parsing -----------------------------------------------------------------

def _edge_list(tok: str, lineno: int) -> tuple[EdgeKey, ...]:
    out = []
    for part in tok.split(","):
        if "->" not in part:
            raise ParseError(lineno, f"bad edge reference {part!r}")
        s, d = part.split("->", 1)
        if not s or not d:
            raise ParseError(lineno, f"bad edge reference {part!r}")
        out.append((s, d))
    return tuple(out)


def parse_program(text: str) -> ProgramGraph:
    nodes: list[str] = []
    edges: list[Edge] = []
    seen_edges: set[EdgeKey] = set()
    loops: list[Loop] = []
    entry = exit_ = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if kw == "node":
            if len(tok) != 2:
                raise ParseError(lineno, "expected: node <id>")
            if tok[1] in nodes:
                raise ParseError(lineno, f"duplicate node {tok[1]!r}")
            nodes.append(tok[1])
        elif kw in ("entry", "exit"):
            if len(tok) != 2:
                raise ParseError(lineno, f"expected: {kw} <id>")
            if kw == "entry":
                if entry is not None:
                    raise ParseError(lineno, "entry declared twice")
                entry = tok[1]
            else:
                if exit_ is not None:
                    raise ParseError(lineno, "exit declared twice")
                exit_ = tok[1]
        elif kw == "edge":
            if len(tok) not in (3, 5) or (len(tok) == 5 and tok[3] != "access"):
                raise ParseError(lineno, "expected: edge <src> <dst> [access <b>,...]")
            acc: tuple[int, ...] = ()
            if len(tok) == 5:
                try:
                    acc = tuple(int(x) for x in tok[4].split(","))
                except ValueError:
                    raise ParseError(lineno, f"bad block list {tok[4]!r}") from None
                if any(b < 0 for b in acc):
                    raise ParseError(lineno, "block ids must be non-negative")
            key = (tok[1], tok[2])
            if key in seen_edges:
                raise ParseError(lineno, f"duplicate edge {tok[1]}->{tok[2]}")
            seen_edges.add(key)
            edges.append(Edge(tok[1], tok[2], acc))
        elif kw == "loop":
            fields = {}
            if len(tok) != 12:
                raise ParseError(lineno, "expected: loop <id> header <n> bound <n> parent <p> back <..> entryedges <..>")
            for name, val in zip(tok[2::2], tok[3::2]):
                fields[name] = val
            if set(fields) != {"header", "bound", "parent", "back", "entryedges"}:
                raise ParseError(lineno, "loop needs header, bound, parent, back, entryedges")
            try:
                bound = int(fields["bound"])
            except ValueError:
                raise ParseError(lineno, f"bad bound {fields['bound']!r}") from None
            parent = None if fields["parent"] == "none" else fields["parent"]
            loops.append(
                Loop(tok[1], fields["header"], bound, parent,
                     _edge_list(fields["back"], lineno), _edge_list(fields["entryedges"], lineno))
            )
        else:
            raise ParseError(lineno, f"unknown directive {kw!r}")
    if entry is None or exit_ is None:
        raise ValidationError("entry and exit must be declared")
    return make_program(nodes, edges, entry, exit_, loops)


def make_program(nodes: Iterable[str], edges: Iterable[Edge], entry: str, exit: str, loops: Iterable[Loop] = ()) -> ProgramGraph:
    """Validate the structure, infer loop bodies and return the graph."""
    nodes = tuple(nodes)
    edges = tuple(edges)
    node_set = set(nodes)
    if len(node_set) != len(nodes):
        raise ValidationError("duplicate node")
    if entry not in node_set or exit not in node_set:
        raise ValidationError("entry/exit must be declared nodes")
    keys = set()
    for e in edges:
        if e.src not in node_set or e.dst not in node_set:
            raise ValidationError(f"edge {e.src}->{e.dst} uses an undeclared node")
        if e.key in keys:
            raise ValidationError(f"duplicate edge {e.src}->{e.dst}")
        keys.add(e.key)
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    pred: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        succ[e.src].append(e.dst)
        pred[e.dst].append(e.src)
    if pred[entry]:
        raise ValidationError("entry node has incoming edges")
    if succ[exit]:
        raise ValidationError("exit node has outgoing edges")
    fwd = _reach(entry, succ)
    bwd = _reach(exit, pred)
    for n in nodes:
        if n not in fwd:
            raise ValidationError(f"node {n!r} unreachable from entry")
        if n not in bwd:
            raise ValidationError(f"exit unreachable from node {n!r}")

    loops = list(loops)
    ids = [lp.id for lp in loops]
    if len(set(ids)) != len(ids) or ROOT_SCOPE in ids:
        raise ValidationError("loop ids must be unique and differ from the program scope")
    built: list[Loop] = []
    all_back: set[EdgeKey] = set()
    for lp in loops:
        if lp.bound < 1:
            raise ValidationError(f"loop {lp.id}: bound must be >= 1")
        if lp.header not in node_set:
            raise ValidationError(f"loop {lp.id}: unknown header")
        if not lp.back_edges or not lp.entry_edges:
            raise ValidationError(f"loop {lp.id}: needs back and entry edges")
        for key in lp.back_edges + lp.entry_edges:
            if key not in keys:
                raise ValidationError(f"loop {lp.id}: unknown edge {key[0]}->{key[1]}")
        for s, d in lp.back_edges:
            if d != lp.header:
                raise ValidationError(f"loop {lp.id}: back edge {s}->{d} does not target the header")
        body = {lp.header}
        work = [s for s, _ in lp.back_edges]
        while work:
            n = work.pop()
            if n in body:
                continue
            body.add(n)
            work.extend(pred[n])
        if entry in body:
            raise ValidationError(f"loop {lp.id}: body contains the entry node")
        body_edges = frozenset(e.key for e in edges if e.src in body and e.dst in body)
        entering = {e.key for e in edges if e.src not in body and e.dst in body}
        for key in entering:
            if key[1] != lp.header:
                raise ValidationError(f"loop {lp.id}: edge {key[0]}->{key[1]} enters the body past the header")
        if entering != set(lp.entry_edges):
            raise ValidationError(f"loop {lp.id}: entry edges must be exactly the edges entering the header from outside")
        into_header = {key for key in body_edges if key[1] == lp.header}
        if into_header != set(lp.back_edges):
            raise ValidationError(f"loop {lp.id}: every body edge into the header must be a declared back edge")
        all_back.update(lp.back_edges)
        built.append(Loop(lp.id, lp.header, lp.bound, lp.parent, tuple(lp.back_edges), tuple(lp.entry_edges),
                          frozenset(body), body_edges))

    by_id = {lp.id: lp for lp in built}
    for lp in built:
        seen = {lp.id}
        p = lp.parent
        while p is not None:
            if p not in by_id:
                raise ValidationError(f"loop {lp.id}: unknown parent {p!r}")
            if p in seen:
                raise ValidationError("loop nesting has a cycle")
            seen.add(p)
            p = by_id[p].parent
        if lp.parent is not None and not lp.body_nodes <= by_id[lp.parent].body_nodes:
            raise ValidationError(f"loop {lp.id}: body not contained in parent {lp.parent}")
    for a in built:
        for b in built:
            if a.id == b.id or not (a.body_nodes & b.body_nodes):
                continue
            if a.body_nodes <= b.body_nodes and not _is_ancestor(by_id, b.id, a.id):
                if a.body_nodes == b.body_nodes:
                    raise ValidationError(f"loops {a.id} and {b.id} have the same body")
                raise ValidationError(f"loop {a.id} lies inside {b.id} but does not declare it as ancestor")
            if not (a.body_nodes <= b.body_nodes or b.body_nodes <= a.body_nodes):
                raise ValidationError(f"loops {a.id} and {b.id} overlap without nesting")

    # every cycle must pass a declared back edge
    indeg = {n: 0 for n in nodes}
    for e in edges:
        if e.key not in all_back:
            indeg[e.dst] += 1
    queue = deque(n for n in nodes if indeg[n] == 0)
    done = 0
    while queue:
        n = queue.popleft()
        done += 1
        for e in edges:
            if e.src == n and e.key not in all_back:
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    queue.append(e.dst)
    if done != len(nodes):
        raise ValidationError("cycle without a declared loop")
    return ProgramGraph(nodes, edges, entry, exit, tuple(built))


def _is_ancestor(by_id: Mapping[str, Loop], anc: str, loop_id: str) -> bool:
    p = by_id[loop_id].parent
    while p is not None:
        if p == anc:
            return True
        p = by_id[p].parent
    return False


def _reach(start: str, adj: Mapping[str, list[str]]) -> set[str]:
    seen = {start}
    work = [start]
    while work:
        n = work.pop()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                work.append(m)
    return seen


def serialize_program(g: ProgramGraph) -> str:
    lines = [f"node {n}" for n in g.nodes]
    lines += [f"entry {g.entry}", f"exit {g.exit}"]
    for e in g.edges:
        acc = f" access {','.join(map(str, e.accesses))}" if e.accesses else ""
        lines.append(f"edge {e.src} {e.dst}{acc}")
    for lp in g.loops:
        back = ",".join(f"{s}->{d}" for s, d in lp.back_edges)
        ent = ",".join(f"{s}->{d}" for s, d in lp.entry_edges)
        lines.append(
            f"loop {lp.id} header {lp.header} bound {lp.bound} parent {lp.parent or 'none'} back {back} entryedges {ent}"
        )
    return "\n".join(lines) + "\n"


# -- execution graph -----------------------------------------------------------

class Classification(str, enum.Enum):
    ALWAYS_HIT = "AH"
    ALWAYS_MISS = "AM"
    UNKNOWN = "UNKNOWN"


class EdgeKind(str, enum.Enum):
    PLAIN = "PLAIN"
    HIT = "HIT"
    MISS = "MISS"


@dataclass(frozen=True)
class LatencyModel:
    hit: int = 1
    miss: int = 11

    def __post_init__(self):
        if not 0 <= self.hit <= self.miss:
            raise InvalidParams("need 0 <= hit latency <= miss latency")

    @classmethod
    def miss_count(cls) -> "LatencyModel":
        """Cost 1 per miss and 0 per hit, so bounds count misses."""
        return cls(0, 1)


@dataclass(frozen=True)
class ExecEdge:
    id: int
    src: str
    dst: str
    kind: EdgeKind
    cost: int
    cfg_edge: EdgeKey
    segment: int
    block: int | None = None
    access: AccessRef | None = None
    classification: Classification | None = None


@dataclass
class ExecGraph:
    program: ProgramGraph
    nodes: list[str]
    edges: list[ExecEdge]
    latency: LatencyModel
    by_cfg_edge: dict[EdgeKey, list[int]] = field(default_factory=dict)

    def head_edges(self, key: EdgeKey) -> list[int]:
        """Exec edges of the first segment of CFG edge ``key``; their flow is the edge's count."""
        return [i for i in self.by_cfg_edge[key] if self.edges[i].segment == 0]

    def access_edges(self, ref: AccessRef) -> list[int]:
        return [i for i in self.by_cfg_edge[ref.edge] if self.edges[i].access == ref]

    def scope_edge_ids(self, scope: str) -> list[int]:
        keys = self.program.scope_edges(scope)
        return [e.id for e in self.edges if e.cfg_edge in keys]

    def block_edges(self, block: int, kind: EdgeKind | None = None) -> list[int]:
        return [e.id for e in self.edges if e.block == block and (kind is None or e.kind is kind)]


def _node_name(key: EdgeKey, i: int) -> str:
    return f"{key[0]}->{key[1]}#{i}"


def build_exec_graph(
    g: ProgramGraph,
    classifications: Mapping[AccessRef, Classification],
    lat: LatencyModel | None = None,
) -> ExecGraph:
    """Split every access into its own segment; unknown accesses get a HIT and a MISS edge."""
    lat = lat or LatencyModel()
    nodes = list(g.nodes)
    edges: list[ExecEdge] = []
    by_cfg: dict[EdgeKey, list[int]] = {}

    def add(**kw):
        e = ExecEdge(id=len(edges), **kw)
        edges.append(e)
        by_cfg.setdefault(e.cfg_edge, []).append(e.id)

    for e in g.edges:
        if not e.accesses:
            add(src=e.src, dst=e.dst, kind=EdgeKind.PLAIN, cost=0, cfg_edge=e.key, segment=0)
            continue
        n = len(e.accesses)
        chain = [e.src] + [_node_name(e.key, i) for i in range(1, n)] + [e.dst]
        nodes.extend(chain[1:-1])
        for i, b in enumerate(e.accesses):
            ref = AccessRef(e.src, e.dst, i)
            try:
                cls = Classification(classifications[ref])
            except KeyError:
                raise MissingClassification(f"no classification for access {ref}") from None
            kinds = {
                Classification.ALWAYS_HIT: [EdgeKind.HIT],
                Classification.ALWAYS_MISS: [EdgeKind.MISS],
                Classification.UNKNOWN: [EdgeKind.HIT, EdgeKind.MISS],
            }[cls]
            for kind in kinds:
                add(src=chain[i], dst=chain[i + 1], kind=kind,
                    cost=lat.hit if kind is EdgeKind.HIT else lat.miss,
                    cfg_edge=e.key, segment=i, block=b, access=ref, classification=cls)
    return ExecGraph(g, nodes, edges, lat, by_cfg)
