"""CPLEX LP text format for ``LinearModel``.

Only the subset needed here is written and read: a ``Maximize`` objective,
``Subject To`` rows with ``<=``, ``>=`` or ``=``, a ``Bounds`` section with
``0 <= v <= ub`` for every variable and a ``General`` section listing all
variables.  A backslash starts a comment.  Bounds are emitted in variable
declaration order, and the parser restores that order.
"""
from __future__ import annotations

import re
from pathlib import Path

from .errors import ParseError
from .milp import Constraint, LinearModel

__all__ = ["write_lp", "parse_lp", "emit_lp"]

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")
_TERMS_PER_LINE = 8


def _expr(coeffs: dict[str, int], first_var: str) -> list[str]:
    if not coeffs:
        return [f"0 {first_var}"]
    parts = []
    for i, (v, c) in enumerate(coeffs.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = v if mag == 1 else f"{mag} {v}"
        parts.append(("- " if sign == "-" else "") + term if i == 0 else f"{sign} {term}")
    return [" ".join(parts[i:i + _TERMS_PER_LINE]) for i in range(0, len(parts), _TERMS_PER_LINE)]


def write_lp(model: LinearModel) -> str:
    for v in model.variables:
        if not _NAME.match(v):
            raise ValueError(f"variable name {v!r} is not LP-safe")
    first = next(iter(model.variables), "x")
    out = []
    if model.tag:
        out.append(f"\\ {model.tag}")
    out.append("Maximize")
    obj = _expr(model.objective, first)
    out.append(" obj: " + obj[0])
    out.extend("   " + line for line in obj[1:])
    out.append("Subject To")
    used = set()
    for i, con in enumerate(model.constraints):
        name = con.name if _NAME.match(con.name) and con.name not in used else f"c{i}"
        used.add(name)
        lines = _expr(con.coeffs, first)
        lines[-1] += f" {con.sense} {con.rhs}"
        out.append(f" {name}: " + lines[0])
        out.extend("   " + line for line in lines[1:])
    out.append("Bounds")
    for v, ub in model.variables.items():
        out.append(f" 0 <= {v} <= {ub}")
    out.append("General")
    names = list(model.variables)
    for i in range(0, len(names), 10):
        out.append(" " + " ".join(names[i:i + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def emit_lp(model: LinearModel, destination: str | Path | None = None) -> str:
    """Render ``model``; also write it when a destination path is given."""
    text = write_lp(model)
    if destination is not None:
        Path(destination).write_text(text)
    return text


_SECTIONS = {
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "general": "gen", "generals": "gen", "gen": "gen", "integers": "gen",
    "end": "end",
}
_SENSE = {"<=": "<=", "=<": "<=", "<": "<=", ">=": ">=", "=>": ">=", ">": ">=", "=": "="}
_TOKEN = re.compile(r"<=|>=|=<|=>|[<>=]|[+-]|[^\s<>=+-]+")


def _parse_terms(tokens: list[str], lineno: int) -> dict[str, int]:
    coeffs: dict[str, int] = {}
    sign, coef = 1, None
    for tok in tokens:
        if tok in "+-":
            if coef is not None:
                raise ParseError(lineno, "dangling coefficient")
            sign = sign * (-1 if tok == "-" else 1)
            continue
        try:
            val = int(tok)
        except ValueError:
            val = None
        if val is not None:
            if coef is not None:
                raise ParseError(lineno, "two coefficients in a row")
            coef = val
            continue
        if not _NAME.match(tok):
            raise ParseError(lineno, f"bad variable name {tok!r}")
        coeffs[tok] = coeffs.get(tok, 0) + sign * (1 if coef is None else coef)
        sign, coef = 1, None
    if coef is not None and coef != 0:
        raise ParseError(lineno, "constant term in an expression")
    return coeffs


def parse_lp(text: str) -> LinearModel:
    section = None
    tag = ""
    obj_tokens: list[str] = []
    obj_line = 0
    rows: list[tuple[int, list[str]]] = []  # (line, tokens) of pending constraint text
    bounds: dict[str, int] = {}
    general: list[str] = []
    seen_end = False
    pending: list[str] = []
    pending_line = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("\\") and not tag and section is None:
            tag = raw[1:].strip()
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            if pending:
                raise ParseError(pending_line, "incomplete constraint")
            section = _SECTIONS[key]
            if section == "min":
                raise ParseError(lineno, "only maximisation models are supported")
            if section == "end":
                seen_end = True
            continue
        if section is None:
            raise ParseError(lineno, "text before the objective section")
        if section == "end":
            raise ParseError(lineno, "text after End")
        if section == "max":
            if not obj_tokens:
                obj_line = lineno
            obj_tokens.extend(_TOKEN.findall(line))
        elif section == "st":
            toks = _TOKEN.findall(line)
            if not pending:
                pending_line = lineno
            pending.extend(toks)
            if any(t in _SENSE for t in pending) and pending[-1] not in _SENSE and pending[-1] not in "+-":
                rows.append((pending_line, pending))
                pending = []
        elif section == "bounds":
            toks = _TOKEN.findall(line)
            if len(toks) == 5 and toks[1] in ("<=", "=<") and toks[3] in ("<=", "=<"):
                lo, v, hi = toks[0], toks[2], toks[4]
            elif len(toks) == 3 and toks[1] in ("<=", "=<"):
                lo, v, hi = "0", toks[0], toks[2]
            else:
                raise ParseError(lineno, "bounds must read 'lo <= var <= hi' or 'var <= hi'")
            try:
                lo_i, hi_i = int(lo), int(hi)
            except ValueError:
                raise ParseError(lineno, "bounds must be finite integers") from None
            if lo_i != 0:
                raise ParseError(lineno, "lower bounds must be 0")
            bounds[v] = hi_i
        elif section == "gen":
            general.extend(line.split())
    if pending:
        raise ParseError(pending_line, "incomplete constraint")
    if not seen_end:
        raise ParseError(len(text.splitlines()), "missing End")

    model = LinearModel(tag=tag)
    for v, ub in bounds.items():
        model.variables[v] = ub
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    elif len(obj_tokens) > 1 and obj_tokens[1] == ":":
        obj_tokens = obj_tokens[2:]
    objective = _parse_terms([t[:-1] if t.endswith(":") else t for t in obj_tokens], obj_line)
    for lineno, toks in rows:
        name = f"c{len(model.constraints)}"
        if toks[0].endswith(":"):
            name, toks = toks[0][:-1], toks[1:]
        elif len(toks) > 1 and toks[1] == ":":
            name, toks = toks[0], toks[2:]
        idx = next(i for i, t in enumerate(toks) if t in _SENSE)
        rhs_toks = toks[idx + 1:]
        if len(rhs_toks) == 2 and rhs_toks[0] in "+-":
            rhs_toks = [rhs_toks[0] + rhs_toks[1]]
        try:
            if len(rhs_toks) != 1:
                raise ValueError
            rhs = int(rhs_toks[0])
        except ValueError:
            raise ParseError(lineno, f"bad right-hand side {' '.join(rhs_toks)!r}") from None
        coeffs = {v: c for v, c in _parse_terms(toks[:idx], lineno).items() if c}
        for v in coeffs:
            if v not in model.variables:
                raise ParseError(lineno, f"variable {v!r} has no finite bound")
        model.constraints.append(Constraint(name, coeffs, _SENSE[toks[idx]], rhs))
    objective = {v: c for v, c in objective.items() if c}
    for v in objective:
        if v not in model.variables:
            raise ParseError(obj_line, f"variable {v!r} has no finite bound")
    for v in general:
        if v not in model.variables:
            raise ParseError(len(text.splitlines()), f"integer variable {v!r} has no bound")
    model.objective = objective
    return model
