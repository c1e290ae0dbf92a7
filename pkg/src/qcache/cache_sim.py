"""Exact simulation of LRU, FIFO and MRU (not-most-recently-used) cache sets.

States are plain tuples so they can be hashed, compared and enumerated:

* LRU:  blocks ordered most-recently-used first.
* FIFO: blocks ordered oldest-inserted first.
* MRU:  exactly ``k`` slots, each ``None`` (empty) or ``(block, use_bit)``.

Blocks are non-negative integers.  A set-associative cache maps block ``b``
to set ``b % nb_sets``; every set runs the policy independently.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidParams, ParseError

__all__ = [
    "Policy",
    "Outcome",
    "SimResult",
    "SetAssocConfig",
    "empty_state",
    "step",
    "simulate",
    "simulate_set_assoc",
    "project",
    "reachable_states",
    "validate_state",
    "parse_trace",
    "format_state",
]


class Policy(str, enum.Enum):
    LRU = "LRU"
    FIFO = "FIFO"
    MRU = "MRU"

    @classmethod
    def parse(cls, name: str | "Policy") -> "Policy":
        if isinstance(name, Policy):
            return name
        key = name.strip().upper()
        if key == "NMRU":
            key = "MRU"
        try:
            return cls[key]
        except KeyError:
            raise InvalidParams(f"unknown policy {name!r}") from None


class Outcome(str, enum.Enum):
    HIT = "HIT"
    MISS = "MISS"


@dataclass
class SimResult:
    hits: int = 0
    misses: int = 0
    per_block_hits: dict[int, int] = field(default_factory=dict)
    per_block_misses: dict[int, int] = field(default_factory=dict)
    trace: list[Outcome] = field(default_factory=list)

    def record(self, block: int, outcome: Outcome) -> None:
        self.trace.append(outcome)
        if outcome is Outcome.HIT:
            self.hits += 1
            self.per_block_hits[block] = self.per_block_hits.get(block, 0) + 1
            self.per_block_misses.setdefault(block, 0)
        else:
            self.misses += 1
            self.per_block_misses[block] = self.per_block_misses.get(block, 0) + 1
            self.per_block_hits.setdefault(block, 0)

    def block_hits(self, block: int) -> int:
        return self.per_block_hits.get(block, 0)

    def block_misses(self, block: int) -> int:
        return self.per_block_misses.get(block, 0)

    def to_csv(self) -> str:
        """``block,hits,misses`` rows sorted by block, then a ``total`` row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block", "hits", "misses"])
        for b in sorted(set(self.per_block_hits) | set(self.per_block_misses)):
            w.writerow([b, self.block_hits(b), self.block_misses(b)])
        w.writerow(["total", self.hits, self.misses])
        return buf.getvalue()


@dataclass(frozen=True)
class SetAssocConfig:
    nb_sets: int = 1
    associativity: int = 1

    def __post_init__(self):
        if self.nb_sets < 1 or self.associativity < 1:
            raise InvalidParams("nb_sets and associativity must be >= 1")

    def set_of(self, block: int) -> int:
        return block % self.nb_sets


# -- single-set step functions ---------------------------------------------

def _lru_step(state: tuple, b: int, k: int) -> tuple[tuple, bool]:
    if b in state:
        return (b,) + tuple(x for x in state if x != b), True
    return ((b,) + state)[:k], False


def _fifo_step(state: tuple, b: int, k: int) -> tuple[tuple, bool]:
    if b in state:
        return state, True
    if len(state) < k:
        return state + (b,), False
    return state[1:] + (b,), False


def _mru_step(state: tuple, b: int, k: int) -> tuple[tuple, bool]:
    lines = list(state)
    pos = None
    for i, line in enumerate(lines):
        if line is not None and line[0] == b:
            pos = i
            break
    hit = pos is not None
    if not hit:
        # empty slots count as zero-bit lines; k == 1 has no zero bit, so the
        # single line is replaced
        pos = next((i for i, line in enumerate(lines) if line is None or line[1] == 0), 0)
    lines[pos] = (b, 1)
    if all(line is not None and line[1] == 1 for line in lines):
        lines = [(line[0], 1 if i == pos else 0) for i, line in enumerate(lines)]
    return tuple(lines), hit


_STEP = {Policy.LRU: _lru_step, Policy.FIFO: _fifo_step, Policy.MRU: _mru_step}


def empty_state(policy: Policy, k: int) -> tuple:
    if k < 1:
        raise InvalidParams("associativity must be >= 1")
    if Policy.parse(policy) is Policy.MRU:
        return (None,) * k
    return ()


def step(policy: Policy, k: int, state: tuple, block: int) -> tuple[tuple, Outcome]:
    new, hit = _STEP[Policy.parse(policy)](state, block, k)
    return new, Outcome.HIT if hit else Outcome.MISS


def simulate(policy: Policy, k: int, sigma: Iterable[int], state: tuple | None = None) -> SimResult:
    policy = Policy.parse(policy)
    fn = _STEP[policy]
    if state is None:
        state = empty_state(policy, k)
    res = SimResult()
    for b in sigma:
        state, hit = fn(state, b, k)
        res.record(b, Outcome.HIT if hit else Outcome.MISS)
    return res


def project(sigma: Sequence[int], cfg: SetAssocConfig, set_index: int) -> list[int]:
    """Subsequence of ``sigma`` mapping to ``set_index``."""
    return [b for b in sigma if b % cfg.nb_sets == set_index]


def simulate_set_assoc(
    cfg: SetAssocConfig,
    policy: Policy,
    sigma: Iterable[int],
    states: Sequence[tuple] | None = None,
) -> SimResult:
    policy = Policy.parse(policy)
    k = cfg.associativity
    fn = _STEP[policy]
    if states is None:
        cur = [empty_state(policy, k) for _ in range(cfg.nb_sets)]
    else:
        if len(states) != cfg.nb_sets:
            raise InvalidParams(f"expected {cfg.nb_sets} set states, got {len(states)}")
        cur = list(states)
    res = SimResult()
    for b in sigma:
        s = b % cfg.nb_sets
        cur[s], hit = fn(cur[s], b, k)
        res.record(b, Outcome.HIT if hit else Outcome.MISS)
    return res


def reachable_states(policy: Policy, k: int, universe: Iterable[int], max_depth: int) -> set[tuple]:
    """States reachable from the empty state by sequences of length <= max_depth."""
    policy = Policy.parse(policy)
    if max_depth < 0:
        raise InvalidParams("max_depth must be >= 0")
    fn = _STEP[policy]
    blocks = sorted(set(universe))
    seen = {empty_state(policy, k)}
    frontier = list(seen)
    for _ in range(max_depth):
        nxt = []
        for s in frontier:
            for b in blocks:
                t, _ = fn(s, b, k)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if not nxt:
            break
        frontier = nxt
    return seen


def validate_state(policy: Policy, k: int, state: tuple) -> None:
    """Raise InvalidParams unless ``state`` satisfies the policy's invariants."""
    policy = Policy.parse(policy)
    if policy is Policy.MRU:
        if len(state) != k:
            raise InvalidParams("MRU state needs exactly k slots")
        blocks = [line[0] for line in state if line is not None]
        if any(line is not None and line[1] not in (0, 1) for line in state):
            raise InvalidParams("use bits must be 0 or 1")
        if k > 1 and all(line is not None and line[1] == 1 for line in state):
            raise InvalidParams("MRU state with every use bit set")
    else:
        blocks = list(state)
        if len(blocks) > k:
            raise InvalidParams("more blocks than lines")
    if len(set(blocks)) != len(blocks):
        raise InvalidParams("duplicate block in state")
    if any(b < 0 for b in blocks):
        raise InvalidParams("negative block id")


def format_state(policy: Policy, state: tuple) -> str:
    if Policy.parse(policy) is Policy.MRU:
        return "[" + " ".join("_" if s is None else f"{s[0]}:{s[1]}" for s in state) + "]"
    return "[" + " ".join(str(b) for b in state) + "]"


def parse_trace(text: str) -> list[int]:
    """One decimal block id per line; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            b = int(line)
        except ValueError:
            raise ParseError(lineno, f"not a block id: {line!r}") from None
        if b < 0:
            raise ParseError(lineno, "block ids must be non-negative")
        out.append(b)
    return out

