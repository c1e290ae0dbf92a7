from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcache.errors import BudgetExceeded, Infeasible, InvalidParams
from qcache.milp import LinearModel, node_limit_from_env, solve_exact, solve_lp


def brute_force(model: LinearModel):
    names = list(model.variables)
    best = None
    for vals in itertools.product(*(range(model.variables[v] + 1) for v in names)):
        point = dict(zip(names, vals))
        if model.feasible(point):
            val = model.evaluate(point)
            best = val if best is None else max(best, val)
    return best


@st.composite
def small_models(draw):
    m = LinearModel()
    n = draw(st.integers(1, 4))
    names = [m.add_var(f"x{i}", draw(st.integers(0, 4))) for i in range(n)]
    for j in range(draw(st.integers(0, 4))):
        coeffs = {v: draw(st.integers(-3, 3)) for v in names}
        m.add_constraint(f"c{j}", coeffs, draw(st.sampled_from(["<=", ">=", "="])), draw(st.integers(-4, 8)))
    m.set_objective({v: draw(st.integers(-3, 5)) for v in names})
    return m


@pytest.mark.parametrize("engine", ["auto", "exact"])
@given(model=small_models())
@settings(max_examples=120, deadline=None)
def test_matches_enumeration(engine, model):
    expected = brute_force(model)
    if expected is None:
        with pytest.raises(Infeasible):
            solve_exact(model, engine=engine)
        return
    sol = solve_exact(model, engine=engine)
    assert sol.value == expected
    assert model.feasible(sol.values)
    assert model.evaluate(sol.values) == expected


def test_fractional_relaxation_needs_branching():
    m = LinearModel()
    for v in ("x", "y"):
        m.add_var(v, 10)
    m.add_constraint("a", {"x": 2, "y": 2}, "<=", 3)
    m.set_objective({"x": 1, "y": 1})
    val, _ = solve_lp(m)
    assert val == Fraction(3, 2)
    sol = solve_exact(m)
    assert sol.value == 1 and sol.nodes > 1


def test_rational_constraints_scaled():
    m = LinearModel()
    m.add_var("x", 9)
    con = m.add_constraint("half", {"x": Fraction(1, 2)}, "<=", Fraction(3, 2))
    assert (con.coeffs, con.rhs) == ({"x": 1}, 3)


def test_model_errors():
    m = LinearModel()
    m.add_var("x", 1)
    with pytest.raises(InvalidParams):
        m.add_var("x", 2)
    with pytest.raises(InvalidParams):
        m.add_var("y", -1)
    with pytest.raises(InvalidParams):
        m.add_constraint("c", {"z": 1}, "<=", 0)
    with pytest.raises(InvalidParams):
        m.add_constraint("c", {"x": 1}, "<", 0)
    with pytest.raises(InvalidParams):
        m.set_objective({"x": Fraction(1, 2)})
    with pytest.raises(InvalidParams):
        solve_exact(m, engine="glpk")


def test_infeasible():
    m = LinearModel()
    m.add_var("x", 3)
    m.add_constraint("c", {"x": 1}, ">=", 4)
    with pytest.raises(Infeasible):
        solve_exact(m)
    with pytest.raises(Infeasible):
        solve_lp(m)


def test_node_limit(monkeypatch):
    m = LinearModel()
    names = [m.add_var(f"x{i}", 1) for i in range(8)]
    m.add_constraint("c", {v: 2 for v in names}, "<=", 7)
    m.set_objective({v: 1 for v in names})
    with pytest.raises(BudgetExceeded):
        solve_exact(m, node_limit=1)
    monkeypatch.setenv("QCACHE_SOLVER_NODE_LIMIT", "1")
    assert node_limit_from_env() == 1
    with pytest.raises(BudgetExceeded):
        solve_exact(m)
    monkeypatch.setenv("QCACHE_SOLVER_NODE_LIMIT", "zero")
    with pytest.raises(InvalidParams):
        node_limit_from_env()


def test_copy_is_independent():
    m = LinearModel()
    m.add_var("x", 2)
    m.add_constraint("c", {"x": 1}, "<=", 1)
    c = m.copy()
    c.constraints[0].coeffs["x"] = 5
    assert m.constraints[0].coeffs["x"] == 1
