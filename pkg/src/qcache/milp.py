"""Integer linear models and an exact branch-and-bound solver.

All variables are integers in ``[0, ub]``.  Coefficients are stored as
integers: rational constraints are scaled by the common denominator when
added.  LP relaxations go to HiGHS first; its answer is only used after
the basis is re-derived in rational arithmetic and checked for primal
and dual feasibility, so every accepted bound is exact.  Relaxations
HiGHS cannot settle fall back to a bounded-variable primal simplex over
``Fraction``.  Branch-and-bound explores nodes best bound first and
branches on the lowest-index fractional variable.
"""
from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import BudgetExceeded, Infeasible, InvalidParams, UnboundedModel

__all__ = ["Constraint", "LinearModel", "Solution", "solve_lp", "solve_exact", "node_limit_from_env"]

SENSES = ("<=", ">=", "=")


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, int]
    sense: str
    rhs: int

    def activity(self, values: Mapping[str, int]) -> int:
        return sum(c * values.get(v, 0) for v, c in self.coeffs.items())

    def satisfied(self, values: Mapping[str, int]) -> bool:
        act = self.activity(values)
        return {"<=": act <= self.rhs, ">=": act >= self.rhs, "=": act == self.rhs}[self.sense]


@dataclass
class LinearModel:
    """Maximize ``objective`` over integer variables ``0 <= v <= variables[v]``."""

    variables: dict[str, int] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, int] = field(default_factory=dict)
    tag: str = ""

    def add_var(self, name: str, ub: int) -> str:
        if name in self.variables:
            raise InvalidParams(f"variable {name!r} declared twice")
        if ub < 0:
            raise InvalidParams(f"variable {name!r} has a negative upper bound")
        self.variables[name] = int(ub)
        return name

    def add_constraint(self, name: str, coeffs: Mapping[str, Fraction | int], sense: str, rhs: Fraction | int = 0) -> Constraint:
        """Add ``sum(coeffs) sense rhs``; rational data is scaled to integers."""
        if sense not in SENSES:
            raise InvalidParams(f"bad sense {sense!r}")
        for v in coeffs:
            if v not in self.variables:
                raise InvalidParams(f"constraint {name!r} uses undeclared variable {v!r}")
        fr = {v: Fraction(c) for v, c in coeffs.items() if c != 0}
        rhs = Fraction(rhs)
        den = math.lcm(rhs.denominator, *(c.denominator for c in fr.values())) if fr else rhs.denominator
        con = Constraint(name, {v: int(c * den) for v, c in fr.items()}, sense, int(rhs * den))
        self.constraints.append(con)
        return con

    def set_objective(self, coeffs: Mapping[str, int]) -> None:
        for v, c in coeffs.items():
            if v not in self.variables:
                raise InvalidParams(f"objective uses undeclared variable {v!r}")
            if int(c) != c:
                raise InvalidParams("objective coefficients must be integers")
        self.objective = {v: int(c) for v, c in coeffs.items() if c != 0}

    def copy(self) -> "LinearModel":
        return LinearModel(
            dict(self.variables),
            [Constraint(c.name, dict(c.coeffs), c.sense, c.rhs) for c in self.constraints],
            dict(self.objective),
            self.tag,
        )

    def evaluate(self, values: Mapping[str, int]) -> int:
        return sum(c * values.get(v, 0) for v, c in self.objective.items())

    def feasible(self, values: Mapping[str, int]) -> bool:
        if any(not 0 <= values.get(v, 0) <= ub for v, ub in self.variables.items()):
            return False
        return all(c.satisfied(values) for c in self.constraints)


@dataclass(frozen=True)
class Solution:
    value: int
    values: dict[str, int]
    nodes: int


# -- simplex -------------------------------------------------------------------

class _Simplex:
    """Bounded primal simplex on ``A x (sense) b``, ``lb <= x <= ub``, maximize ``c x``."""

    def __init__(self, rows, senses, rhs, cost, lb, ub):
        n = len(lb)
        self.lb = [Fraction(v) for v in lb]
        self.ub = [None if v is None else Fraction(v) for v in ub]
        self.cost = dict(cost)
        self.x = list(self.lb)
        self.rows: list[dict[int, Fraction]] = []
        self.basis: list[int] = []
        self.artificial: set[int] = set()
        for row, sense, b in zip(rows, senses, rhs):
            r = {j: Fraction(a) for j, a in row.items() if a}
            resid = Fraction(b) - sum(a * self.x[j] for j, a in r.items())
            slack_sign = {"<=": 1, ">=": -1, "=": 0}[sense]
            if slack_sign:
                s = n
                n += 1
                self.lb.append(Fraction(0))
                self.ub.append(None)
                self.x.append(Fraction(0))
                r[s] = Fraction(slack_sign)
            flip = resid < 0
            if flip:
                r = {j: -a for j, a in r.items()}
                resid = -resid
            if slack_sign and r[s] == 1:
                del r[s]
                self.basis.append(s)
                self.x[s] = resid
            else:
                art = n
                n += 1
                self.lb.append(Fraction(0))
                self.ub.append(None)
                self.x.append(resid)
                self.artificial.add(art)
                self.basis.append(art)
            self.rows.append(r)
        self.n = n

    def _reduced(self, cost: Mapping[int, Fraction]) -> dict[int, Fraction]:
        d: dict[int, Fraction] = {j: Fraction(c) for j, c in cost.items() if c}
        for i, row in enumerate(self.rows):
            cb = cost.get(self.basis[i], 0)
            if cb:
                for j, a in row.items():
                    d[j] = d.get(j, 0) - cb * a
        for j in self.basis:
            d.pop(j, None)
        return {j: v for j, v in d.items() if v}

    def _iterate(self, d: dict[int, Fraction], max_iter: int = 100000) -> None:
        bland = False
        degenerate = 0
        for _ in range(max_iter):
            best, best_val = None, None
            for j, dj in d.items():
                if dj > 0:
                    if self.ub[j] is not None and self.x[j] >= self.ub[j]:
                        continue
                elif dj < 0:
                    if self.x[j] <= self.lb[j]:
                        continue
                else:
                    continue
                if bland:
                    if best is None or j < best:
                        best = j
                else:
                    if best is None or abs(dj) > best_val or (abs(dj) == best_val and j < best):
                        best, best_val = j, abs(dj)
            if best is None:
                return
            j = best
            direction = 1 if d[j] > 0 else -1
            theta = None if self.ub[j] is None else self.ub[j] - self.lb[j]
            leave, leave_at_ub = None, False
            for i, row in enumerate(self.rows):
                a = row.get(j)
                if not a:
                    continue
                rate = -a * direction
                bi = self.basis[i]
                if rate < 0:
                    lim = (self.x[bi] - self.lb[bi]) / -rate
                    at_ub = False
                elif self.ub[bi] is not None:
                    lim = (self.ub[bi] - self.x[bi]) / rate
                    at_ub = True
                else:
                    continue
                if theta is None or lim < theta or (lim == theta and leave is not None and bi < self.basis[leave]):
                    theta, leave, leave_at_ub = lim, i, at_ub
            if theta is None:
                raise UnboundedModel("LP relaxation is unbounded")
            degenerate = degenerate + 1 if theta == 0 else 0
            bland = degenerate > 20
            if theta:
                step = theta * direction
                self.x[j] += step
                for i, row in enumerate(self.rows):
                    a = row.get(j)
                    if a:
                        self.x[self.basis[i]] -= a * step
            if leave is None:
                continue  # bound flip
            bi = self.basis[leave]
            self.x[bi] = self.ub[bi] if leave_at_ub else self.lb[bi]
            self._pivot(leave, j, d)
        raise RuntimeError("simplex iteration limit")  # pragma: no cover

    def _pivot(self, r: int, j: int, d: dict[int, Fraction]) -> None:
        row = self.rows[r]
        piv = row.pop(j)
        old = self.basis[r]
        new = {k: a / piv for k, a in row.items()}
        new[old] = 1 / piv
        self.rows[r] = new
        self.basis[r] = j
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            t = other.pop(j, None)
            if t:
                for k, a in new.items():
                    v = other.get(k, 0) - t * a
                    if v:
                        other[k] = v
                    else:
                        other.pop(k, None)
        t = d.pop(j, None)
        if t:
            for k, a in new.items():
                v = d.get(k, 0) - t * a
                if v:
                    d[k] = v
                else:
                    d.pop(k, None)

    def solve(self) -> Fraction | None:
        """Optimal objective value, or None when infeasible."""
        if self.artificial:
            self._iterate(self._reduced({a: -1 for a in self.artificial}))
            if any(self.x[a] != 0 for a in self.artificial):
                return None
            for a in self.artificial:
                self.ub[a] = Fraction(0)
            basic = set(self.basis)
            for row in self.rows:
                for a in self.artificial - basic:
                    row.pop(a, None)
        self._iterate(self._reduced(self.cost))
        return sum((Fraction(c) * self.x[j] for j, c in self.cost.items()), Fraction(0))


class _Prepared:
    """Index-based view of a model shared by all relaxations of one solve."""

    def __init__(self, model: LinearModel):
        self.names = list(model.variables)
        idx = {v: i for i, v in enumerate(self.names)}
        self.rows = [{idx[v]: c for v, c in con.coeffs.items()} for con in model.constraints]
        self.senses = [con.sense for con in model.constraints]
        self.rhs = [con.rhs for con in model.constraints]
        self.cost = {idx[v]: c for v, c in model.objective.items()}
        self._highs = None

    def highs_data(self):
        if self._highs is None:
            import numpy as np
            from scipy.sparse import csr_matrix

            n = len(self.names)

            def mat(sel, sign):
                data, ri, ci = [], [], []
                for r, i in enumerate(sel):
                    for j, a in self.rows[i].items():
                        data.append(sign[r] * a)
                        ri.append(r)
                        ci.append(j)
                return csr_matrix((data, (ri, ci)), shape=(len(sel), n), dtype=float)

            ineq = [i for i, s in enumerate(self.senses) if s != "="]
            eq = [i for i, s in enumerate(self.senses) if s == "="]
            sign_ub = [1 if self.senses[i] == "<=" else -1 for i in ineq]
            c = np.zeros(n)
            for j, v in self.cost.items():
                c[j] = -v
            self._highs = (
                c,
                mat(ineq, sign_ub) if ineq else None,
                np.array([s * self.rhs[i] for s, i in zip(sign_ub, ineq)], dtype=float) if ineq else None,
                mat(eq, [1] * len(eq)) if eq else None,
                np.array([self.rhs[i] for i in eq], dtype=float) if eq else None,
                ineq,
                eq,
            )
        return self._highs


def _certify(prep: _Prepared, lb, ub, x, y) -> Fraction | None:
    """Exact optimality check of a primal point ``x`` and row duals ``y``.

    ``y`` belongs to the problem ``max c x``: non-negative on ``<=`` rows,
    non-positive on ``>=`` rows.  Bound duals are derived from the reduced
    costs.  Returns the certified optimum or None.
    """
    for j, v in enumerate(x):
        if v < lb[j] or v > ub[j]:
            return None
    for row, sense, b, yi in zip(prep.rows, prep.senses, prep.rhs, y):
        act = sum(a * x[j] for j, a in row.items())
        if sense == "<=" and (act > b or yi < 0):
            return None
        if sense == ">=" and (act < b or yi > 0):
            return None
        if sense == "=" and act != b:
            return None
    d = [Fraction(0)] * len(x)
    for j, c in prep.cost.items():
        d[j] += c
    for row, yi in zip(prep.rows, y):
        if yi:
            for j, a in row.items():
                d[j] -= yi * a
    dual = sum((yi * b for yi, b in zip(y, prep.rhs)), Fraction(0))
    for j, dj in enumerate(d):
        dual += dj * (ub[j] if dj > 0 else lb[j])
    primal = sum((Fraction(c) * x[j] for j, c in prep.cost.items()), Fraction(0))
    return primal if primal == dual else None


def _rational(v: float) -> Fraction:
    return Fraction(v).limit_denominator(10 ** 6)


def _highs_relaxation(prep: _Prepared, lb, ub):
    """Relaxation via HiGHS, accepted only with an exact certificate.

    Returns ``(value, x)``, ``(None, None)`` for infeasible, or ``False``
    when floating point could not be certified.
    """
    from scipy.optimize import linprog

    c, a_ub, b_ub, a_eq, b_eq, ineq, eq = prep.highs_data()
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=list(zip(lb, ub)), method="highs")
    if res.status != 0 or res.x is None:
        return False
    x = [_rational(v) for v in res.x]
    y = [Fraction(0)] * len(prep.rows)
    if ineq:
        for i, mval in zip(ineq, res.ineqlin.marginals):
            sign = 1 if prep.senses[i] == "<=" else -1
            y[i] = -sign * _rational(mval)
    if eq:
        for i, mval in zip(eq, res.eqlin.marginals):
            y[i] = -_rational(mval)
    val = _certify(prep, lb, ub, x, y)
    if val is None:
        return False
    return val, x


def _exact_relaxation(prep: _Prepared, lb, ub):
    sx = _Simplex(prep.rows, prep.senses, prep.rhs, prep.cost, lb, ub)
    val = sx.solve()
    if val is None:
        return None, None
    return val, sx.x[: len(prep.names)]


def _elastic(prep: _Prepared) -> _Prepared:
    """Phase-one problem: maximize minus the total violation of every row.

    Each row gets non-negative violation variables; the original problem is
    feasible iff the optimum is 0.
    """
    el = _Prepared.__new__(_Prepared)
    n = len(prep.names)
    el.names = list(prep.names)
    el.rows, el.senses, el.rhs, el.cost = [], list(prep.senses), list(prep.rhs), {}
    for row, sense in zip(prep.rows, prep.senses):
        row = dict(row)
        if sense in ("<=", "="):
            row[n] = -1
            el.cost[n] = -1
            el.names.append(f"_under{n}")
            n += 1
        if sense in (">=", "="):
            row[n] = 1
            el.cost[n] = -1
            el.names.append(f"_over{n}")
            n += 1
        el.rows.append(row)
    el._highs = None
    return el


def _highs_infeasible(prep: _Prepared, lb, ub) -> bool:
    """True only if an exact certificate shows the relaxation is infeasible."""
    if prep.__dict__.get("_elastic") is None:
        prep._elastic = _elastic(prep)
    el = prep._elastic
    extra = len(el.names) - len(lb)
    bound = sum(abs(b) for b in prep.rhs) + sum(
        sum(abs(a) for a in row.values()) * max(max(lb), max(ub), 1) for row in prep.rows
    )
    got = _highs_relaxation(el, list(lb) + [0] * extra, list(ub) + [bound] * extra)
    return got is not False and got[0] < 0


def _solve_relaxation(prep: _Prepared, lb, ub, engine: str = "auto"):
    if any(lo > hi for lo, hi in zip(lb, ub)):
        return None, None
    if engine == "auto":
        got = _highs_relaxation(prep, lb, ub)
        if got is not False:
            return got
        if _highs_infeasible(prep, lb, ub):
            return None, None
    return _exact_relaxation(prep, lb, ub)


def solve_lp(model: LinearModel, engine: str = "auto") -> tuple[Fraction, dict[str, Fraction]]:
    """Exact optimum of the LP relaxation."""
    prep = _Prepared(model)
    val, x = _solve_relaxation(prep, [0] * len(prep.names), list(model.variables.values()), engine)
    if val is None:
        raise Infeasible("LP relaxation is infeasible")
    return val, dict(zip(prep.names, x))


def node_limit_from_env(default: int = 20000) -> int:
    raw = os.environ.get("QCACHE_SOLVER_NODE_LIMIT")
    if not raw:
        return default
    try:
        val = int(raw)
    except ValueError:
        raise InvalidParams(f"QCACHE_SOLVER_NODE_LIMIT must be an integer, got {raw!r}") from None
    if val < 1:
        raise InvalidParams("QCACHE_SOLVER_NODE_LIMIT must be >= 1")
    return val


def solve_exact(model: LinearModel, node_limit: int | None = None, engine: str = "auto") -> Solution:
    """Integer optimum by best-first branch-and-bound.

    ``engine="auto"`` solves relaxations with HiGHS and accepts a result
    only after an exact primal/dual certificate; anything uncertified
    (including infeasibility) is re-solved by the rational simplex, which
    ``engine="exact"`` uses throughout.  Raises Infeasible when no integer
    point exists and BudgetExceeded when more than ``node_limit``
    relaxations would be needed.
    """
    if engine not in ("auto", "exact"):
        raise InvalidParams(f"unknown LP engine {engine!r}")
    limit = node_limit_from_env() if node_limit is None else node_limit
    prep = _Prepared(model)
    names = prep.names
    ub0 = list(model.variables.values())
    nodes = 0

    def relax(lb, ub):
        nonlocal nodes
        nodes += 1
        if nodes > limit:
            raise BudgetExceeded(f"branch-and-bound exceeded {limit} nodes")
        return _solve_relaxation(prep, lb, ub, engine)

    lb0 = [0] * len(names)
    val, x = relax(lb0, ub0)
    if val is None:
        raise Infeasible("no feasible point")
    heap = [(-val, 0, lb0, ub0, x)]
    seq = 1
    best: tuple[int, list[int]] | None = None
    while heap:
        neg, _, lb, ub, x = heapq.heappop(heap)
        bound = -neg
        if best is not None and math.floor(bound) <= best[0]:
            break
        frac = next((i for i, v in enumerate(x) if v.denominator != 1), None)
        if frac is None:
            best = (int(bound), [int(v) for v in x])
            continue
        v = x[frac]
        for lo, hi in ((lb, ub[:frac] + [math.floor(v)] + ub[frac + 1:]), (lb[:frac] + [math.ceil(v)] + lb[frac + 1:], ub)):
            cval, cx = relax(lo, hi)
            if cval is None:
                continue
            if best is not None and math.floor(cval) <= best[0]:
                continue
            heapq.heappush(heap, (-cval, seq, lo, hi, cx))
            seq += 1
    if best is None:
        raise Infeasible("no integer point")
    return Solution(best[0], dict(zip(names, best[1])), nodes)
