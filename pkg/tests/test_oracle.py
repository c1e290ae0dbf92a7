from __future__ import annotations

import pytest
from hypothesis import given, settings

from programs import path_count, program_text, statements
from qcache.cache_sim import Policy, SetAssocConfig, simulate_set_assoc
from qcache.errors import BudgetExceeded
from qcache.oracle import count_paths, enumerate_paths, worst_observed
from qcache.program import LatencyModel, parse_program
from test_program import LOOP


def test_loop_paths():
    g = parse_program(LOOP)
    paths = list(enumerate_paths(g))
    assert len(paths) == 4
    assert max(len(p.accesses) for p in paths) == 7
    assert paths[0].format().startswith("s->h")


def test_worst_observed_by_hand():
    # longest path 0,1,2,1,2,1,2 in one LRU(2) set: three cold misses, then hits
    rep = worst_observed(parse_program(LOOP), Policy.LRU, SetAssocConfig(1, 2), LatencyModel(1, 10))
    assert rep.path_count == 4
    assert rep.max_cost == 3 * 10 + 4
    assert rep.max_misses == 3
    assert rep.to_csv().splitlines()[1].startswith("LRU,2,1,4,34,3,")


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        count_paths(parse_program(LOOP), budget=3)


@given(statements)
@settings(max_examples=80, deadline=None)
def test_path_count_matches_formula(stmt):
    expected = path_count(stmt)
    g = parse_program(program_text(stmt))
    if expected > 3000:
        return
    assert count_paths(g) == expected
    seen = {p.edges for p in enumerate_paths(g)}
    assert len(seen) == expected


@given(statements)
@settings(max_examples=40, deadline=None)
def test_worst_observed_matches_direct_simulation(stmt):
    if path_count(stmt) > 500:
        return
    g = parse_program(program_text(stmt))
    cfg = SetAssocConfig(2, 2)
    lat = LatencyModel(1, 7)
    for pol in Policy:
        rep = worst_observed(g, pol, cfg, lat)
        best = 0
        for p in enumerate_paths(g):
            r = simulate_set_assoc(cfg, pol, p.accesses)
            best = max(best, r.hits * 1 + r.misses * 7)
        assert rep.max_cost == best
        assert sorted(rep.costs)[-1] == best
