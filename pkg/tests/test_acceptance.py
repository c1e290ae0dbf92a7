"""Acceptance suite: one PASS/FAIL line per criterion, repeated in the pytest summary.

Tolerances are pinned here: counts and bounds must match exactly, and the
wall-clock limits are the ones listed next to each check.
"""
from __future__ import annotations

import time
from itertools import product

import pytest

from conftest import ACCEPTANCE_LINES, corpus_files
from qcache.cache_sim import Policy, SetAssocConfig, reachable_states, simulate
from qcache.competitiveness import (
    SearchBudget,
    equivalence_check,
    fifo_block_miss_witness,
    mru_block_hit_witness,
)
from qcache.experiment import verify_catalog
from qcache.ipet import AnalysisConfig, analyze_program, build_model
from qcache.lpformat import parse_lp, write_lp
from qcache.lru_analysis import persistence_analysis
from qcache.milp import solve_exact
from qcache.oracle import count_paths, worst_observed
from qcache.program import LatencyModel, parse_program

SIM_TIME_LIMIT_S = 1e-3
CATALOG_TIME_LIMIT_S = 600.0
SOUNDNESS_TIME_LIMIT_S = 300.0
MAX_PATHS = 2 ** 10
COMP_CONFIGS = (AnalysisConfig.BLOCK_MISS, AnalysisConfig.BLOCK_HIT, AnalysisConfig.MISS, AnalysisConfig.HIT)
CACHE = SetAssocConfig(2, 4)
OBJECTIVES = {"cycles": LatencyModel(1, 11), "misses": LatencyModel.miss_count()}


def report(n: int, ok: bool, title: str, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def programs():
    return {p.stem: parse_program(p.read_text()) for p in corpus_files()}


@pytest.fixture(scope="module")
def bounds(programs):
    """Bound of every (program, policy, config, objective) on the reference cache."""
    out = {}
    start = time.perf_counter()
    for (name, g), pol, conf, (obj, lat) in product(programs.items(), Policy, AnalysisConfig, OBJECTIVES.items()):
        out[(name, pol, conf, obj)] = analyze_program(g, pol, CACHE, conf, lat).value
    out["_seconds"] = time.perf_counter() - start
    return out


# a b c c b d b e b f f b with a=0, b=1, ...
REUSE_SEQ = [0, 1, 2, 2, 1, 3, 1, 4, 1, 5, 5, 1]


def test_1_reuse_sequence_fifo_vs_lru():
    fifo = simulate(Policy.FIFO, 2, REUSE_SEQ)
    lru = simulate(Policy.LRU, 2, REUSE_SEQ)
    got = (fifo.misses, fifo.hits, fifo.block_misses(1), fifo.block_hits(1),
           lru.misses, lru.hits, lru.block_misses(1), lru.block_hits(1))
    elapsed = min(_timed(lambda: simulate(Policy.FIFO, 2, REUSE_SEQ)) for _ in range(20))
    ok = got == (8, 4, 3, 2, 6, 6, 1, 4) and elapsed < SIM_TIME_LIMIT_S
    report(1, ok, "two-block sequence counts",
           f"FIFO(2) {got[0]}m/{got[1]}h, b {got[2]}m/{got[3]}h; LRU(2) {got[4]}m/{got[5]}h, "
           f"b {got[6]}m/{got[7]}h; {elapsed * 1e6:.0f} us per run (limit 1 ms)")
    assert ok


def _timed(fn) -> float:
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


def _mru_trace(start, sigma, names):
    from qcache.cache_sim import step

    state, states, flips = start, [], 0
    for b in sigma:
        nxt, _ = step(Policy.MRU, 4, state, names[b])
        flips += _flipped(state, nxt)
        states.append(nxt)
        state = nxt
    return states, flips


def _flipped(before, after) -> bool:
    """Only a global flip clears use bits; replacements and hits set them."""
    return any(b0 == 1 and b1 == 0 for (_, b0), (_, b1) in zip(before, after))


def _st(names, spec: str):
    """'a0 b1 c1 d0' -> MRU state tuple."""
    return tuple((names[tok[:-1]], int(tok[-1])) for tok in spec.split())


def test_2_mru_example_states():
    names = {c: i for i, c in enumerate("abcdeuvwx")}
    evict_then_flip = (
        "a0 b1 c1 d0",
        "e d a e",
        ["e1 b1 c1 d0", "e0 b0 c0 d1", "a1 b0 c0 d1", "a1 e1 c0 d1"],
    )
    repeated_block = (
        "u0 v1 w0 x1",
        "b w u b x u v b",
        ["b1 v1 w0 x1", "b0 v0 w1 x0", "u1 v0 w1 x0", "u1 b1 w1 x0",
         "u0 b0 w0 x1", "u1 b0 w0 x1", "u1 v1 w0 x1", "u0 v0 b1 x0"],
    )
    total_states = total_flips = 0
    ok = True
    for start, seq, expected in (evict_then_flip, repeated_block):
        states, flips = _mru_trace(_st(names, start), seq.split(), names)
        ok &= states == [_st(names, s) for s in expected]
        total_states += len(states)
        total_flips += flips
    # one flip in the first sequence, three in the second
    ok &= total_flips == 4
    report(2, ok, "MRU step sequences", f"{total_states} states and use-bit vectors checked, {total_flips} global flips")
    assert ok


@pytest.mark.slow
def test_3_catalog_positive_claims():
    start = time.perf_counter()
    rows = verify_catalog(k_max=4)
    elapsed = time.perf_counter() - start
    positive = [r for r in rows if r.budget != "witness"]
    bad = [r for r in rows if not r.ok]
    ok = not bad and elapsed <= CATALOG_TIME_LIMIT_S
    report(3, ok, "catalog verification k<=4",
           f"{len(positive)} positive claims without counterexample, {len(rows) - len(positive)} refutation witnesses, "
           f"{len(bad)} failures, {elapsed:.0f} s (limit 600 s)")
    assert ok


def test_4_negative_witnesses():
    sigma = fifo_block_miss_witness(2, 2, 5)
    fifo_b = simulate(Policy.FIFO, 2, sigma).block_misses(0)
    lru_b = simulate(Policy.LRU, 2, sigma).block_misses(0)
    ok = fifo_b >= 3 and lru_b == 1
    details = [f"FIFO(2) b misses {fifo_b}, LRU(2) b misses {lru_b} (n=5)"]
    for k, l in ((3, 3), (4, 3)):
        for h in (1, 2, 3):
            starts = reachable_states(Policy.MRU, k, range(k + 1), k + 2)
            for q in starts:
                w = mru_block_hit_witness(k, l, state=q, block=0, repeats=h)
                mh = simulate(Policy.MRU, k, w, q).block_hits(0)
                lh = simulate(Policy.LRU, l, w).block_hits(0)
                ok &= mh == 0 and lh == h
        details.append(f"MRU({k}) vs LRU({l}) h=1..3 from {len(starts)} start states")
    report(4, ok, "block competitiveness refutations", "; ".join(details))
    assert ok


def test_5_hit_miss_equivalence():
    total = bad = 0
    for pol in Policy:
        for k in (2, 3):
            n, d = equivalence_check(pol, k, k, SearchBudget(k + 2, 8, 3))
            total += n
            bad += d
    ok = bad == 0
    report(5, ok, "(1,0) hit/miss equivalence", f"{total} instances over all policies, k=l=2..3, {bad} discrepancies")
    assert ok


def _soundness(programs, bounds, configs):
    violations = []
    for name, g in programs.items():
        for pol in Policy:
            for obj, lat in OBJECTIVES.items():
                own = worst_observed(g, pol, CACHE, lat)
                lru = worst_observed(g, Policy.LRU, CACHE, lat)
                for conf in configs:
                    ref = (lru if conf.is_lru_reference else own).max_cost
                    if bounds[(name, pol, conf, obj)] < ref:
                        violations.append((name, pol.value, conf.value, obj))
    return violations


@pytest.mark.xfail(strict=True, reason="the all-hit baseline ignores cold misses and is below every real run")
def test_6_ipet_soundness_all_configurations(programs, bounds):
    sizes = [count_paths(g, MAX_PATHS) for g in programs.values()]
    violations = _soundness(programs, bounds, list(AnalysisConfig))
    seconds = bounds["_seconds"]
    ok = len(programs) >= 10 and max(sizes) <= MAX_PATHS and not violations and seconds <= SOUNDNESS_TIME_LIMIT_S
    by_conf = sorted({v[2] for v in violations})
    report(6, ok, "IPET soundness, 11 configurations",
           f"{len(programs)} programs (max {max(sizes)} paths), {len(violations)} violations "
           f"in configurations {by_conf or 'none'}, {seconds:.0f} s (limit 300 s)")
    assert ok


def test_6b_ipet_soundness_sound_configurations(programs, bounds):
    configs = [c for c in AnalysisConfig if c is not AnalysisConfig.ALLHIT]
    violations = _soundness(programs, bounds, configs)
    ok = not violations
    print(f"       10 configurations without allhit: {len(violations)} violations")
    assert ok


def test_7_monotonicity(programs, bounds):
    violations = 0
    checked = 0
    for name, pol, obj in product(programs, Policy, OBJECTIVES):
        b = {c: bounds[(name, pol, c, obj)] for c in AnalysisConfig}
        checked += 1
        if b[AnalysisConfig.ALL_COMP] > min(b[c] for c in COMP_CONFIGS):
            violations += 1
        if any(not b[AnalysisConfig.ALLHIT] <= v <= b[AnalysisConfig.ALLMISS] for v in b.values()):
            violations += 1
    ok = violations == 0
    report(7, ok, "monotonicity", f"{checked} program/policy/objective triples, {violations} violations")
    assert ok


TREND_CACHES = (SetAssocConfig(2, 4), SetAssocConfig(4, 2))


def test_8_mru_matches_lru_when_sets_are_small(programs):
    lat = LatencyModel.miss_count()
    eligible = violations = fifo_checked = 0
    for cache in TREND_CACHES:
        for name, g in programs.items():
            largest = max(
                sum(1 for b in g.blocks() if b % cache.nb_sets == s) for s in range(cache.nb_sets)
            )
            if largest > 2:
                continue
            eligible += 1
            mru = analyze_program(g, Policy.MRU, cache, AnalysisConfig.ALL_COMP, lat).value
            lru = analyze_program(g, Policy.LRU, cache, AnalysisConfig.LRU_MAYMUST_PERS, lat).value
            if mru != lru:
                violations += 1
            pr = persistence_analysis(g, cache)
            if any(pr.persistent.values()):
                fifo_checked += 1
                fifo = analyze_program(g, Policy.FIFO, cache, AnalysisConfig.ALL_COMP, lat).value
                allmiss = analyze_program(g, Policy.FIFO, cache, AnalysisConfig.ALLMISS, lat).value
                if not fifo < allmiss:
                    violations += 1
    ok = violations == 0 and eligible > 0
    report(8, ok, "competitive bounds on small conflict sets",
           f"{eligible} program/cache pairs with <=2 blocks per set, {fifo_checked} FIFO strictness checks, "
           f"{violations} violations")
    assert ok


def test_9_lp_roundtrip(programs):
    checked = mismatches = 0
    for (name, g), pol, conf, lat in product(programs.items(), Policy, AnalysisConfig, OBJECTIVES.values()):
        analysed = Policy.LRU if conf.is_lru_reference else pol
        model, _, _ = build_model(g, analysed, CACHE, conf, lat)
        again = parse_lp(write_lp(model))
        checked += 1
        if solve_exact(again).value != solve_exact(model).value:
            mismatches += 1
    ok = mismatches == 0
    report(9, ok, "LP round-trip", f"{checked} emitted models re-parsed and re-solved, {mismatches} mismatches")
    assert ok
