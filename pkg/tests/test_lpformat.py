from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcache.errors import ParseError
from qcache.lpformat import emit_lp, parse_lp, write_lp
from qcache.milp import LinearModel

var_names = st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True)


@st.composite
def models(draw):
    m = LinearModel(tag=draw(st.sampled_from(["", "LRU:all-comp"])))
    names = draw(st.lists(var_names, min_size=0, max_size=12, unique=True))
    for v in names:
        m.add_var(v, draw(st.integers(0, 10 ** 6)))
    for j in range(draw(st.integers(0, 5))):
        coeffs = {v: draw(st.integers(-50, 50)) for v in draw(st.lists(st.sampled_from(names), unique=True))} if names else {}
        m.add_constraint(f"row{j}", coeffs, draw(st.sampled_from(["<=", ">=", "="])), draw(st.integers(-100, 100)))
    if names:
        m.set_objective({v: draw(st.integers(-20, 20)) for v in names})
    return m


def _shape(m: LinearModel):
    return (
        list(m.variables.items()),
        m.objective,
        [(c.name, c.coeffs, c.sense, c.rhs) for c in m.constraints],
        m.tag,
    )


@given(models())
@settings(max_examples=150, deadline=None)
def test_roundtrip(m):
    assert _shape(parse_lp(write_lp(m))) == _shape(m)


def test_long_rows_wrap():
    m = LinearModel()
    names = [m.add_var(f"v{i}", 1) for i in range(20)]
    m.add_constraint("big", {v: 1 for v in names}, "<=", 5)
    m.set_objective({v: 1 for v in names})
    text = write_lp(m)
    assert text.count("\n   ") >= 4
    assert _shape(parse_lp(text)) == _shape(m)


def test_unsafe_constraint_name_replaced():
    m = LinearModel()
    m.add_var("x", 1)
    m.add_constraint("bad name", {"x": 1}, "<=", 1)
    m.add_constraint("ok", {"x": 1}, ">=", 0)
    m.add_constraint("ok", {"x": 1}, ">=", 0)
    names = [c.name for c in parse_lp(write_lp(m)).constraints]
    assert names == ["c0", "ok", "c2"]


def test_unsafe_variable_rejected():
    m = LinearModel()
    m.add_var("x y", 1)
    with pytest.raises(ValueError):
        write_lp(m)


def test_emit_writes_file(tmp_path):
    m = LinearModel()
    m.add_var("x", 3)
    m.set_objective({"x": 2})
    out = tmp_path / "m.lp"
    text = emit_lp(m, out)
    assert out.read_text() == text
    assert text.startswith("Maximize\n obj: 2 x\n")


@pytest.mark.parametrize(
    "text",
    [
        "Minimize\n obj: x\nBounds\n 0 <= x <= 1\nEnd\n",
        "Maximize\n obj: x\nBounds\n 1 <= x <= 2\nEnd\n",
        "Maximize\n obj: x\nBounds\n 0 <= x <= 1\n",
        "Maximize\n obj: y\nBounds\n 0 <= x <= 1\nEnd\n",
        "Maximize\n obj: x\nSubject To\n c: x <=\nBounds\n 0 <= x <= 1\nEnd\n",
        "Maximize\n obj: x\nSubject To\n c: x <= 1 2\nBounds\n 0 <= x <= 1\nEnd\n",
        "x\nMaximize\n obj: x\nEnd\n",
        "Maximize\n obj: x\nBounds\n 0 <= x <= inf\nEnd\n",
        "Maximize\n obj: x\nBounds\n 0 <= x <= 1\nEnd\nmore\n",
        "Maximize\n obj: 2 3 x\nBounds\n 0 <= x <= 1\nEnd\n",
    ],
)
def test_rejects(text):
    with pytest.raises(ParseError):
        parse_lp(text)


def test_accepts_variants():
    text = "\\ comment\nmaximise\n obj: x + 2 y\nst\n c1: x + y =< 3\n x - y >= -1\nbounds\n x <= 2\n 0 <= y <= 2\ngenerals\n x y\nend\n"
    m = parse_lp(text)
    assert m.variables == {"x": 2, "y": 2}
    assert [(c.name, c.sense, c.rhs) for c in m.constraints] == [("c1", "<=", 3), ("c1", ">=", -1)]
