from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from programs import access_outcomes, path_count, program_text, statements
from qcache.cache_sim import Policy, SetAssocConfig
from qcache.lru_analysis import (
    Baseline,
    baseline_classifications,
    classification_csv,
    may_join,
    may_update,
    must_join,
    must_may_analysis,
    must_update,
    persistence_analysis,
)
from qcache.oracle import enumerate_paths
from qcache.program import ROOT_SCOPE, AccessRef, Classification, parse_program
from test_program import LOOP

cfgs = st.builds(SetAssocConfig, st.integers(1, 3), st.integers(1, 3))


def test_must_update_ages():
    cfg = SetAssocConfig(1, 2)
    s = must_update({}, 0, cfg)
    s = must_update(s, 1, cfg)
    assert s == {1: 0, 0: 1}
    assert must_update(s, 2, cfg) == {2: 0, 1: 1}


def test_may_update_and_joins():
    cfg = SetAssocConfig(1, 2)
    assert may_update({0: 0, 1: 1}, 2, cfg) == {2: 0, 0: 1}
    assert must_join({0: 0, 1: 1}, {0: 1}) == {0: 1}
    assert may_join({0: 0}, {0: 1, 1: 1}) == {0: 0, 1: 1}
    assert must_join(None, {0: 0}) == {0: 0}


def test_other_sets_untouched():
    cfg = SetAssocConfig(2, 1)
    assert must_update({1: 0}, 0, cfg) == {1: 0, 0: 0}


def test_loop_classifications():
    g = parse_program(LOOP)
    cls = must_may_analysis(g, SetAssocConfig(1, 2))
    assert cls[AccessRef("s", "h", 0)] is Classification.ALWAYS_MISS
    assert cls[AccessRef("h", "b", 0)] is Classification.UNKNOWN
    assert "s->h,0,0,AM" in classification_csv(g, cls)


def test_persistence_conflict_sets():
    g = parse_program(LOOP)
    pr = persistence_analysis(g, SetAssocConfig(1, 3))
    assert pr.accesses(1, "L", 2) == {AccessRef("h", "b", 0)}
    assert not pr.accesses(1, ROOT_SCOPE, 2)
    assert pr.essential_scopes(1, 2) == {"L"}
    assert pr.essential_scopes(1, 3) == {ROOT_SCOPE}
    assert pr.conflicts[(0, ROOT_SCOPE)] == {0, 1, 2}
    assert "1,L,2,1,1" in pr.to_csv(g)


def test_dm_baseline_single_way():
    g = parse_program(LOOP)
    cls, pers = baseline_classifications(g, SetAssocConfig(1, 4), Baseline.DM_MUST_PERS)
    assert all(c is not Classification.ALWAYS_HIT for c in cls.values())
    assert pers is not None and pers.max_assoc == 1
    allhit, _ = baseline_classifications(g, SetAssocConfig(1, 4), Baseline.ALL_HIT)
    assert set(allhit.values()) == {Classification.ALWAYS_HIT}


def _small(stmt) -> bool:
    return path_count(stmt) <= 300


@given(statements, cfgs)
@settings(max_examples=60, deadline=None)
def test_must_may_sound_on_every_path(stmt, cfg):
    if not _small(stmt):
        return
    g = parse_program(program_text(stmt))
    cls = must_may_analysis(g, cfg)
    for p in enumerate_paths(g):
        for ref, hit in access_outcomes(g, p, Policy.LRU, cfg):
            if cls[ref] is Classification.ALWAYS_HIT:
                assert hit
            elif cls[ref] is Classification.ALWAYS_MISS:
                assert not hit


@given(statements, cfgs)
@settings(max_examples=60, deadline=None)
def test_dm_must_hits_hold_for_every_policy(stmt, cfg):
    if not _small(stmt):
        return
    g = parse_program(program_text(stmt))
    cls, _ = baseline_classifications(g, cfg, Baseline.DM_MUST)
    for p in enumerate_paths(g):
        for pol in Policy:
            for ref, hit in access_outcomes(g, p, pol, cfg):
                if cls[ref] is Classification.ALWAYS_HIT:
                    assert hit


@given(statements, cfgs)
@settings(max_examples=60, deadline=None)
def test_persistent_accesses_miss_once_per_scope_entry(stmt, cfg):
    if not _small(stmt):
        return
    g = parse_program(program_text(stmt))
    pr = persistence_analysis(g, cfg)
    for p in enumerate_paths(g):
        entries = {ROOT_SCOPE: 1}
        for lp in g.loops:
            entries[lp.id] = sum(1 for key in p.edges if key in lp.entry_edges)
        outcomes = list(access_outcomes(g, p, Policy.LRU, cfg))
        for (b, s, a), refs in pr.persistent.items():
            if a != cfg.associativity:
                continue
            misses = sum(1 for ref, hit in outcomes if ref in refs and not hit)
            assert misses <= entries[s]
