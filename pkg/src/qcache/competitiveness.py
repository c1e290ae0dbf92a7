"""Relative competitiveness of replacement policies.

A claim ``(P(k), Q(l), mode, r, c)`` states, for every access sequence
``sigma``, every state ``p`` of ``P`` and (block modes) every block ``b``::

    MISS        m_P(p, sigma)    <= r * m_Q(empty, sigma)    + c
    HIT         h_P(p, sigma)    >= r * h_Q(empty, sigma)    - c
    BLOCK_MISS  m_P,b(p, sigma)  <= r * m_Q,b(empty, sigma)  + c
    BLOCK_HIT   h_P,b(p, sigma)  >= r * h_Q,b(empty, sigma)  - c

``Q`` always starts empty.  All arithmetic is exact.

Exhaustive verification enumerates sequences over a finite block universe
up to renaming (first-occurrence order), all initial ``P`` states
reachable within a depth budget, and every block.  Since ``h = accesses - m``
for both policies, every mode reduces to the maximum number of misses of
``P`` over initial states, which is tracked for all initial states at once
with a precomputed transition table.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .cache_sim import (
    Policy,
    _STEP,
    empty_state,
    reachable_states,
    simulate,
    validate_state,
)
from .errors import InvalidParams, MissingBlock, ParseError

__all__ = [
    "ClaimMode",
    "CompetitivenessClaim",
    "Verdict",
    "Counterexample",
    "SearchBudget",
    "ClaimCatalogEntry",
    "check_claim",
    "verify_exhaustive",
    "verify_many",
    "fifo_block_miss_witness",
    "mru_block_hit_witness",
    "catalog",
    "claims_for",
    "equivalence_check",
    "parse_claims",
    "format_claim",
]


class ClaimMode(str, enum.Enum):
    MISS = "MISS"
    HIT = "HIT"
    BLOCK_MISS = "BLOCK_MISS"
    BLOCK_HIT = "BLOCK_HIT"

    @property
    def is_block(self) -> bool:
        return self in (ClaimMode.BLOCK_MISS, ClaimMode.BLOCK_HIT)

    @property
    def is_miss(self) -> bool:
        return self in (ClaimMode.MISS, ClaimMode.BLOCK_MISS)


@dataclass(frozen=True)
class CompetitivenessClaim:
    policy_p: Policy
    k: int
    policy_q: Policy
    l: int
    mode: ClaimMode
    r: Fraction
    c: Fraction

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise InvalidParams("associativities must be >= 1")
        if self.r < 0:
            raise InvalidParams("r must be non-negative")
        object.__setattr__(self, "policy_p", Policy.parse(self.policy_p))
        object.__setattr__(self, "policy_q", Policy.parse(self.policy_q))
        object.__setattr__(self, "mode", ClaimMode(self.mode))
        object.__setattr__(self, "r", Fraction(self.r))
        object.__setattr__(self, "c", Fraction(self.c))

    def rhs(self, q_count: int) -> Fraction:
        if self.mode.is_miss:
            return self.r * q_count + self.c
        return self.r * q_count - self.c

    def satisfied(self, p_count: int, q_count: int) -> bool:
        """Evaluate the defining inequality on one pair of counts (misses or hits)."""
        if self.mode.is_miss:
            return p_count <= self.rhs(q_count)
        return p_count >= self.rhs(q_count)

    def __str__(self) -> str:
        return format_claim(self)


@dataclass(frozen=True)
class Verdict:
    holds: bool
    lhs: Fraction
    rhs: Fraction

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class Counterexample:
    claim: CompetitivenessClaim
    sigma: tuple[int, ...]
    initial_state: tuple
    block: int | None
    lhs: Fraction
    rhs: Fraction

    def sort_key(self):
        return (self.sigma, -1 if self.block is None else self.block)


@dataclass(frozen=True)
class SearchBudget:
    max_blocks: int
    max_len: int
    max_state_depth: int

    def __post_init__(self):
        if min(self.max_blocks, self.max_len, self.max_state_depth) < 0:
            raise InvalidParams("budget entries must be >= 0")

    @classmethod
    def default(cls, k: int) -> "SearchBudget":
        return cls(max_blocks=k + 2, max_len=10, max_state_depth=8)

    def __str__(self) -> str:
        return f"blocks={self.max_blocks};len={self.max_len};depth={self.max_state_depth}"


# -- single instance -------------------------------------------------------

def check_claim(
    claim: CompetitivenessClaim,
    sigma: Sequence[int],
    p: tuple | None = None,
    block: int | None = None,
) -> Verdict:
    if claim.mode.is_block and block is None:
        raise MissingBlock(f"{claim.mode.value} needs a designated block")
    if p is None:
        p = empty_state(claim.policy_p, claim.k)
    else:
        validate_state(claim.policy_p, claim.k, p)
    rp = simulate(claim.policy_p, claim.k, sigma, p)
    rq = simulate(claim.policy_q, claim.l, sigma)
    if claim.mode is ClaimMode.MISS:
        lhs, q = rp.misses, rq.misses
    elif claim.mode is ClaimMode.HIT:
        lhs, q = rp.hits, rq.hits
    elif claim.mode is ClaimMode.BLOCK_MISS:
        lhs, q = rp.block_misses(block), rq.block_misses(block)
    else:
        lhs, q = rp.block_hits(block), rq.block_hits(block)
    return Verdict(claim.satisfied(lhs, q), Fraction(lhs), claim.rhs(q))


# -- exhaustive search -------------------------------------------------------

def _state_key(state: tuple):
    return tuple((-1, -1) if x is None else (x if isinstance(x, tuple) else (x, 0)) for x in state)


class _Walker:
    """Depth-first walk over canonical sequences, tracking every initial state.

    ``counts[i, b]`` holds the misses to block ``b`` when starting from the
    i-th initial state; column ``max_blocks`` holds total misses.
    """

    def __init__(self, policy: Policy, k: int, budget: SearchBudget, q_policies: Sequence[tuple[Policy, int]]):
        self.policy = Policy.parse(policy)
        self.k = k
        self.budget = budget
        nb = budget.max_blocks
        fn = _STEP[self.policy]
        init = sorted(reachable_states(self.policy, k, range(nb), budget.max_state_depth), key=_state_key)
        index = {s: i for i, s in enumerate(init)}
        states = list(init)
        rows_t, rows_m = [], []
        i = 0
        while i < len(states):
            tr, mi = [], []
            for b in range(nb):
                t, hit = fn(states[i], b, k)
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                tr.append(index[t])
                mi.append(0 if hit else 1)
            rows_t.append(tr)
            rows_m.append(mi)
            i += 1
        self.initial_states = init
        self.trans = np.array(rows_t, dtype=np.int32).reshape(len(states), nb)
        self.miss = np.array(rows_m, dtype=np.int16).reshape(len(states), nb)
        self.q_policies = [(Policy.parse(q), l) for q, l in q_policies]

    def walk(self, visit: Callable, prefix: Sequence[int] = (), min_len: int = 0) -> None:
        """Call ``visit(sigma, occ, counts, q_block_misses, q_total)`` on every node.

        Returning False from ``visit`` stops the walk.  With ``prefix`` only
        the subtree below it is visited, and nodes shorter than ``min_len``
        are skipped (used for partitioned runs).
        """
        nb = self.budget.max_blocks
        n0 = len(self.initial_states)
        counts = np.zeros((n0, nb + 1), dtype=np.int16)
        cur = np.arange(n0, dtype=np.int32)
        q_states = [empty_state(q, l) for q, l in self.q_policies]
        q_fns = [_STEP[q] for q, _ in self.q_policies]
        q_bm = [[0] * nb for _ in self.q_policies]
        q_tot = [0] * len(self.q_policies)
        occ = [0] * nb
        sigma: list[int] = []
        stop = False

        def rec(cur, counts, q_states, distinct):
            nonlocal stop
            if len(sigma) >= min_len:
                if visit(sigma, occ, counts, q_bm, q_tot) is False:
                    stop = True
                    return
            depth = len(sigma)
            if depth >= self.budget.max_len:
                return
            if depth < len(prefix):
                choices = [prefix[depth]]
            else:
                choices = range(min(distinct + 1, nb))
            for b in choices:
                nxt = self.trans[cur, b]
                m = self.miss[cur, b]
                new = counts.copy()
                new[:, b] += m
                new[:, nb] += m
                new_q = []
                for i, (q, l) in enumerate(self.q_policies):
                    s, hit = q_fns[i](q_states[i], b, l)
                    new_q.append(s)
                    if not hit:
                        q_bm[i][b] += 1
                        q_tot[i] += 1
                sigma.append(b)
                occ[b] += 1
                rec(nxt, new, new_q, max(distinct, b + 1))
                occ[b] -= 1
                sigma.pop()
                for i, (q, l) in enumerate(self.q_policies):
                    # undo Q counters by replaying the step on the saved state
                    _, hit = q_fns[i](q_states[i], b, l)
                    if not hit:
                        q_bm[i][b] -= 1
                        q_tot[i] -= 1
                if stop:
                    return

        if self.budget.max_len == 0 and prefix:
            return
        rec(cur, counts, q_states, 0)


def _scaled(claim: CompetitivenessClaim) -> tuple[int, int, int]:
    """Integers (D, R, C) with r = R/D and c = C/D."""
    d = math.lcm(claim.r.denominator, claim.c.denominator)
    return d, int(claim.r * d), int(claim.c * d)


def _run_claims(walker: _Walker, claims: Sequence[CompetitivenessClaim], prefix=(), min_len=0) -> dict:
    nb = walker.budget.max_blocks
    qidx = {q: i for i, q in enumerate(walker.q_policies)}
    prepared = []
    for ci, cl in enumerate(claims):
        d, r, c = _scaled(cl)
        prepared.append((ci, cl, qidx[(cl.policy_q, cl.l)], d, r, c))
    found: dict[int, Counterexample] = {}
    init = walker.initial_states

    def visit(sigma, occ, counts, q_bm, q_tot):
        if len(found) == len(prepared):
            return False
        length = len(sigma)
        mx = counts.max(axis=0)
        for ci, cl, qi, d, r, c in prepared:
            if ci in found:
                continue
            mode = cl.mode
            if mode is ClaimMode.MISS:
                lhs, q = int(mx[nb]), q_tot[qi]
                bad = lhs * d > r * q + c
                blk, col = None, nb
            elif mode is ClaimMode.HIT:
                lhs, q = length - int(mx[nb]), length - q_tot[qi]
                bad = lhs * d < r * q - c
                blk, col = None, nb
            else:
                bad = False
                blocks = range(nb) if length == 0 else (b for b in range(nb) if occ[b])
                for b in blocks:
                    if mode is ClaimMode.BLOCK_MISS:
                        lhs, q = int(mx[b]), q_bm[qi][b]
                        bad = lhs * d > r * q + c
                    else:
                        lhs, q = occ[b] - int(mx[b]), occ[b] - q_bm[qi][b]
                        bad = lhs * d < r * q - c
                    if bad:
                        blk, col = b, b
                        break
            if bad:
                i0 = int(np.argmax(counts[:, col]))
                found[ci] = Counterexample(cl, tuple(sigma), init[i0], blk, Fraction(lhs), cl.rhs(q))
        return True

    walker.walk(visit, prefix=prefix, min_len=min_len)
    return found


def _partition_job(args):
    policy, k, budget, q_policies, claims, prefix = args
    walker = _Walker(policy, k, budget, q_policies)
    return _run_claims(walker, claims, prefix=prefix, min_len=len(prefix))


def _prefixes(depth: int, nb: int) -> list[tuple[int, ...]]:
    out = [()]
    for _ in range(depth):
        out = [p + (b,) for p in out for b in range(min(max(p, default=-1) + 2, nb))]
    return out


def verify_many(
    claims: Sequence[CompetitivenessClaim],
    budget: SearchBudget,
    workers: int = 1,
) -> dict[CompetitivenessClaim, Counterexample | None]:
    """Exhaustively check several claims, sharing one walk per policy ``P(k)``.

    Returns the lexicographically smallest counterexample per claim (None if
    the budget contains none).
    """
    groups: dict[tuple[Policy, int], list[CompetitivenessClaim]] = {}
    for cl in claims:
        groups.setdefault((cl.policy_p, cl.k), []).append(cl)
    result: dict[CompetitivenessClaim, Counterexample | None] = {}
    for (policy, k), group in groups.items():
        q_policies = sorted({(cl.policy_q, cl.l) for cl in group})
        split = 3
        if workers > 1 and budget.max_len > split and budget.max_blocks > 0:
            from concurrent.futures import ProcessPoolExecutor

            walker = _Walker(policy, k, SearchBudget(budget.max_blocks, split - 1, budget.max_state_depth), q_policies)
            parts = [_run_claims(walker, group)]
            jobs = [(policy, k, budget, q_policies, group, p) for p in _prefixes(split, budget.max_blocks)]
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts.extend(ex.map(_partition_job, jobs))
            found = {}
            for part in parts:
                for ci, cx in part.items():
                    if ci not in found or cx.sort_key() < found[ci].sort_key():
                        found[ci] = cx
        else:
            found = _run_claims(_Walker(policy, k, budget, q_policies), group)
        for ci, cl in enumerate(group):
            result[cl] = found.get(ci)
    return result


def verify_exhaustive(claim: CompetitivenessClaim, budget: SearchBudget | None = None, workers: int = 1) -> Counterexample | None:
    if budget is None:
        budget = SearchBudget.default(claim.k)
    return verify_many([claim], budget, workers=workers)[claim]


def equivalence_check(policy: Policy, k: int, l: int, budget: SearchBudget) -> tuple[int, int]:
    """Compare (1,0) hit- and miss-type inequalities instance by instance.

    Every (sigma, initial state, block) in the budget is evaluated twice:
    once as ``h_P,b >= h_Q,b`` and once as ``m_P,b <= m_Q,b``; the same is
    done for the aggregate counts.  Returns (instances, discrepancies).
    """
    walker = _Walker(policy, k, budget, [(Policy.LRU, l)])
    nb = budget.max_blocks
    tally = [0, 0]

    def visit(sigma, occ, counts, q_bm, q_tot):
        length = len(sigma)
        cols = [b for b in range(nb) if occ[b]] + [nb]
        for col in cols:
            acc = length if col == nb else occ[col]
            q_miss = q_tot[0] if col == nb else q_bm[0][col]
            p_miss = counts[:, col]
            p_hit = acc - p_miss
            miss_ok = p_miss <= q_miss
            hit_ok = p_hit >= acc - q_miss
            tally[0] += len(p_miss)
            tally[1] += int(np.count_nonzero(miss_ok != hit_ok))
        return True

    walker.walk(visit)
    return tally[0], tally[1]


# -- constructive counterexamples --------------------------------------------

def fifo_block_miss_witness(k: int, l: int, n: int) -> list[int]:
    """Rounds ``<b, fresh_1, ..., fresh_{l-1}>`` repeated ``n`` times, b = 0.

    LRU(l) misses ``b`` only once, FIFO(k) keeps missing it as ``n`` grows.
    """
    if l < 2 or k < l:
        raise InvalidParams("need k >= l >= 2")
    if n < 1:
        raise InvalidParams("need n >= 1")
    sigma, fresh = [], 1
    for _ in range(n):
        sigma.append(0)
        sigma.extend(range(fresh, fresh + l - 1))
        fresh += l - 1
    return sigma


def mru_block_hit_witness(
    k: int,
    l: int,
    state: tuple | None = None,
    block: int = 0,
    repeats: int = 1,
) -> list[int]:
    """Sequence with zero MRU(k) hits to ``block`` but ``repeats`` LRU(l) hits.

    Each round starts from the MRU state ``q`` reached so far: fresh blocks
    are accessed until a global bit flip at the last position leaves the set
    holding only fresh blocks, the blocks at positions 2..k-2 are touched,
    and then ``<block, line1, line0, block>`` follows.  The first access to
    ``block`` replaces line 0, touching line 1 flips all other bits, so line
    0's block evicts ``block`` again before its second access.
    """
    if l < 3:
        raise InvalidParams("need l >= 3")
    if k < l:
        raise InvalidParams("need k >= l")
    if repeats < 1:
        raise InvalidParams("need repeats >= 1")
    step = _STEP[Policy.MRU]
    q = empty_state(Policy.MRU, k) if state is None else state
    validate_state(Policy.MRU, k, q)
    used = {line[0] for line in q if line is not None} | {block}
    next_fresh = max(used) + 1
    sigma: list[int] = []
    for _ in range(repeats):
        fresh_set = set()
        for _ in range(4 * k + 4):
            a = next_fresh
            next_fresh += 1
            fresh_set.add(a)
            sigma.append(a)
            q, _ = step(q, a, k)
            if q[k - 1] == (a, 1) and all(line[1] == 0 for line in q[:-1]) and all(
                line[0] in fresh_set for line in q
            ):
                break
        else:  # pragma: no cover - unreachable by the flip-position argument
            raise RuntimeError("no flip at the last position")
        lines = [line[0] for line in q]
        tail = lines[2 : k - 1] + [block, lines[1], lines[0], block]
        for a in tail:
            q, _ = step(q, a, k)
        sigma.extend(tail)
    return sigma


# -- catalog -----------------------------------------------------------------

@dataclass(frozen=True)
class ClaimCatalogEntry:
    policy: Policy
    mode: ClaimMode
    source: str
    applies: Callable[[int, int], bool] = field(compare=False)
    params: Callable[[int, int], tuple[Fraction, Fraction]] | None = field(default=None, compare=False)
    witness: Callable[[int, int], tuple[list[int], int]] | None = field(default=None, compare=False)

    @property
    def is_refutation(self) -> bool:
        return self.params is None

    def instantiate(self, k: int, l: int) -> CompetitivenessClaim:
        if not self.applies(k, l):
            raise InvalidParams(f"{self.source} does not apply to k={k}, l={l}")
        if self.params is None:
            raise InvalidParams(f"{self.source} is a refutation; no (r, c) exists")
        r, c = self.params(k, l)
        return CompetitivenessClaim(self.policy, k, Policy.LRU, l, self.mode, r, c)


def _fifo_miss(k, l):
    return Fraction(k, k - l + 1), Fraction(0)


def _fifo_hit(k, l):
    return 1 - Fraction(1, -(-k // (l - 1))), Fraction(0)


def _mru_miss(k, l):
    return Fraction(k - 1, k - l + 1), Fraction(l - 2)


def _mru_hit(k, l):
    r = 1 - Fraction(1, -(-k // (2 * l)))
    return r, r * (l - 1)


def _one(k, l):
    return Fraction(1), Fraction(0)


def _fifo_witness(k, l):
    return fifo_block_miss_witness(k, l, 2 * (-(-k // (l - 1))) + 2), 0


def _mru_witness(k, l):
    return mru_block_hit_witness(k, l, repeats=1), 0


def catalog() -> list[ClaimCatalogEntry]:
    """Known competitiveness results of FIFO, MRU and LRU relative to LRU(l)."""
    P = Policy
    M = ClaimMode
    return [
        ClaimCatalogEntry(P.FIFO, M.MISS, "fifo-miss", lambda k, l: k >= l >= 1, _fifo_miss),
        ClaimCatalogEntry(P.FIFO, M.BLOCK_HIT, "fifo-block-hit", lambda k, l: k >= l >= 2, _fifo_hit),
        ClaimCatalogEntry(P.FIFO, M.HIT, "fifo-hit", lambda k, l: k >= l >= 2, _fifo_hit),
        ClaimCatalogEntry(P.FIFO, M.BLOCK_MISS, "fifo-block-miss-refuted", lambda k, l: k >= l >= 2,
                          witness=_fifo_witness),
        ClaimCatalogEntry(P.MRU, M.BLOCK_HIT, "mru-keeps-two-mru-blocks", lambda k, l: k >= 2 and l <= 2, _one),
        ClaimCatalogEntry(P.MRU, M.BLOCK_MISS, "mru-keeps-two-mru-blocks", lambda k, l: k >= 2 and l <= 2, _one),
        ClaimCatalogEntry(P.MRU, M.HIT, "mru-keeps-two-mru-blocks", lambda k, l: k >= 2 and l <= 2, _one),
        ClaimCatalogEntry(P.MRU, M.MISS, "mru-keeps-two-mru-blocks", lambda k, l: k >= 2 and l <= 2, _one),
        ClaimCatalogEntry(P.MRU, M.BLOCK_MISS, "mru-block-miss", lambda k, l: k >= l >= 3,
                          lambda k, l: (Fraction(l), Fraction(0))),
        ClaimCatalogEntry(P.MRU, M.MISS, "mru-miss", lambda k, l: k >= l >= 2, _mru_miss),
        ClaimCatalogEntry(P.MRU, M.HIT, "mru-hit-phases", lambda k, l: l >= 1 and k >= 2 * l, _mru_hit),
        ClaimCatalogEntry(P.MRU, M.BLOCK_HIT, "mru-block-hit-refuted", lambda k, l: k >= l >= 3,
                          witness=_mru_witness),
    ] + [
        ClaimCatalogEntry(P.LRU, mode, "lru-stack", lambda k, l: k >= l >= 1, _one) for mode in ClaimMode
    ]


def claims_for(policy: Policy, k: int, mode: ClaimMode, l: int) -> list[CompetitivenessClaim]:
    """Every catalog bound for ``policy(k)`` vs ``LRU(l)`` in ``mode``."""
    policy = Policy.parse(policy)
    out = []
    for e in catalog():
        if e.policy is policy and e.mode is mode and not e.is_refutation and e.applies(k, l):
            cl = e.instantiate(k, l)
            if cl not in out:
                out.append(cl)
    return out


# -- claim files ---------------------------------------------------------------

def _frac(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(lineno, f"bad rational {tok!r}") from None


def parse_claims(text: str) -> list[CompetitivenessClaim]:
    """Lines ``P k Q l MODE r_num/r_den c_num/c_den``; ``#`` comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ParseError(lineno, "expected 7 fields")
        p, k, q, l, mode, r, c = parts
        try:
            out.append(
                CompetitivenessClaim(
                    Policy.parse(p), int(k), Policy.parse(q), int(l),
                    ClaimMode(mode.upper().replace("-", "_")), _frac(r, lineno), _frac(c, lineno),
                )
            )
        except (ValueError, InvalidParams) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(lineno, str(exc)) from None
    return out


def format_claim(cl: CompetitivenessClaim) -> str:
    r, c = cl.r, cl.c
    return (
        f"{cl.policy_p.value} {cl.k} {cl.policy_q.value} {cl.l} {cl.mode.value} "
        f"{r.numerator}/{r.denominator} {c.numerator}/{c.denominator}"
    )


def sequence_blocks(sigma: Iterable[int]) -> list[int]:
    seen = []
    for b in sigma:
        if b not in seen:
            seen.append(b)
    return seen
