"""Batch experiments: bounds over a corpus, normalized tables, catalog checks."""
from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .cache_sim import Policy, SetAssocConfig, simulate
from .competitiveness import (
    ClaimMode,
    CompetitivenessClaim,
    SearchBudget,
    catalog,
    format_claim,
    verify_many,
)
from .errors import InvalidParams, QCacheError
from .ipet import AnalysisConfig, analyze_program, build_model
from .lpformat import emit_lp
from .oracle import DEFAULT_PATH_BUDGET, worst_observed
from .program import LatencyModel, parse_program

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ComparisonTable",
    "load_config",
    "run_experiment",
    "CatalogRow",
    "verify_catalog",
    "catalog_csv",
    "KNOWN_UNSOUND",
]

ALL_CONFIGS = tuple(c.value for c in AnalysisConfig)
KNOWN_UNSOUND = ("allhit",)  # every first access misses, so this baseline cannot bound real runs
RATIO_DIGITS = 6


@dataclass
class ExperimentConfig:
    programs: list[str] = field(default_factory=list)
    policies: tuple[str, ...] = ("LRU", "FIFO", "MRU")
    k: int = 4
    nb_sets: int = 2
    hit_latency: int = 1
    miss_latency: int = 11
    objective: str = "cycles"
    configs: tuple[str, ...] = ALL_CONFIGS
    baseline: str = "lru-maymust-pers"
    oracle: bool = True
    path_budget: int = DEFAULT_PATH_BUDGET
    node_limit: int | None = None
    out_csv: str | None = None
    lp_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.policies = tuple(Policy.parse(p).value for p in self.policies)
        self.configs = tuple(AnalysisConfig(c).value for c in self.configs)
        AnalysisConfig(self.baseline)
        if self.objective not in ("cycles", "misses"):
            raise InvalidParams("objective must be 'cycles' or 'misses'")
        SetAssocConfig(self.nb_sets, self.k)
        LatencyModel(self.hit_latency, self.miss_latency)

    @property
    def latency(self) -> LatencyModel:
        if self.objective == "misses":
            return LatencyModel.miss_count()
        return LatencyModel(self.hit_latency, self.miss_latency)

    @property
    def cache(self) -> SetAssocConfig:
        return SetAssocConfig(self.nb_sets, self.k)


def _coerce(kind, raw: str):
    if kind in ("int", int):
        return int(raw)
    if kind in ("bool", bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind in ("int | None",):
        return None if raw.lower() in ("", "none") else int(raw)
    if kind in ("str | None",):
        return None if raw.lower() in ("", "none") else raw
    if kind in ("list[str]", "tuple[str, ...]"):
        return [x for x in raw.replace(",", " ").split() if x]
    return raw


def load_config(text: str, base_dir: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; list values are comma or space separated."""
    from .errors import ParseError

    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in kinds:
            raise ParseError(lineno, f"unknown key {key!r}")
        try:
            values[key] = _coerce(kinds[key], val)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    if base_dir is not None and "programs" in values:
        values["programs"] = [str(Path(base_dir) / p) if not Path(p).is_absolute() else p for p in values["programs"]]
    for key in ("policies", "configs"):
        if key in values:
            values[key] = tuple(values[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


@dataclass
class ResultRow:
    program: str
    policy: str
    config: str
    bound: int | None
    baseline: int | None = None
    oracle_max: int | None = None
    sound: bool | None = None
    vacuous: bool = False
    nodes: int = 0
    error: str = ""

    @property
    def ratio(self) -> Fraction | None:
        if self.bound is None or not self.baseline:
            return None
        return Fraction(self.bound, self.baseline)


def _fmt(fr: Fraction | float | None) -> str:
    if fr is None:
        return ""
    if isinstance(fr, Fraction):
        # exact rounding half away from zero at RATIO_DIGITS decimals
        scaled = fr * 10 ** RATIO_DIGITS
        q = math.floor(scaled + Fraction(1, 2))
        sign = "-" if q < 0 else ""
        q = abs(q)
        return f"{sign}{q // 10 ** RATIO_DIGITS}.{q % 10 ** RATIO_DIGITS:0{RATIO_DIGITS}d}"
    return f"{fr:.{RATIO_DIGITS}f}"


@dataclass
class ComparisonTable:
    config: ExperimentConfig
    rows: list[ResultRow]

    def geomeans(self) -> dict[tuple[str, str], float]:
        out = {}
        for pol in self.config.policies:
            for cfgname in self.config.configs:
                ratios = [r.ratio for r in self.rows if r.policy == pol and r.config == cfgname and r.ratio and r.ratio > 0]
                if ratios:
                    out[(pol, cfgname)] = statistics.geometric_mean(float(x) for x in ratios)
        return out

    @property
    def failures(self) -> list[ResultRow]:
        """Rows whose bound is below the oracle, excluding baselines unsound by construction."""
        return [r for r in self.rows if r.sound is False and r.config not in KNOWN_UNSOUND]

    def to_csv(self) -> str:
        c = self.config
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["program", "policy", "k", "nb_sets", "config", "objective", "bound", "baseline", "ratio",
                    "oracle_max", "sound", "vacuous", "nodes", "error"])
        for r in self.rows:
            w.writerow([r.program, r.policy, c.k, c.nb_sets, r.config, c.objective,
                        "" if r.bound is None else r.bound, "" if r.baseline is None else r.baseline,
                        _fmt(r.ratio), "" if r.oracle_max is None else r.oracle_max,
                        "" if r.sound is None else str(r.sound).lower(), str(r.vacuous).lower(), r.nodes, r.error])
        for (pol, cfgname), gm in sorted(self.geomeans().items(), key=lambda kv: (c.policies.index(kv[0][0]), c.configs.index(kv[0][1]))):
            w.writerow(["GEOMEAN", pol, c.k, c.nb_sets, cfgname, c.objective, "", "", _fmt(gm), "", "", "", "", ""])
        return buf.getvalue()


def _run_program(args) -> list[ResultRow]:
    cfg, path = args
    name = Path(path).stem
    rows: list[ResultRow] = []
    try:
        g = parse_program(Path(path).read_text())
    except (OSError, QCacheError) as exc:
        return [ResultRow(name, pol, c, None, error=f"{type(exc).__name__}: {exc}") for pol in cfg.policies for c in cfg.configs]
    lat = cfg.latency
    cache = cfg.cache
    needed = list(dict.fromkeys(cfg.configs + (cfg.baseline,)))
    oracle_cache: dict[str, int | None] = {}

    def oracle_for(pol: str) -> int | None:
        if pol not in oracle_cache:
            try:
                oracle_cache[pol] = worst_observed(g, pol, cache, lat, cfg.path_budget).max_cost
            except QCacheError:
                oracle_cache[pol] = None
        return oracle_cache[pol]

    for pol in cfg.policies:
        bounds: dict[str, ResultRow] = {}
        for cname in needed:
            conf = AnalysisConfig(cname)
            row = ResultRow(name, pol, cname, None)
            try:
                rep = analyze_program(g, pol, cache, conf, lat, cfg.node_limit)
                row.bound, row.vacuous, row.nodes = rep.value, rep.vacuous, rep.nodes
                if cfg.lp_dir:
                    model, _, _ = build_model(g, Policy.LRU if conf.is_lru_reference else pol, cache, conf, lat)
                    emit_lp(model, Path(cfg.lp_dir) / f"{name}_{pol}_{cname}.lp")
            except QCacheError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            if cfg.oracle and row.bound is not None:
                ref = oracle_for("LRU" if conf.is_lru_reference else pol)
                row.oracle_max = ref
                row.sound = None if ref is None else row.bound >= ref
            bounds[cname] = row
        base = bounds[cfg.baseline].bound
        for cname in cfg.configs:
            bounds[cname].baseline = base
            rows.append(bounds[cname])
    return rows


def run_experiment(cfg: ExperimentConfig) -> ComparisonTable:
    """Bounds for every (program, policy, config); rows ordered by program then policy then config."""
    if cfg.lp_dir:
        Path(cfg.lp_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, p) for p in cfg.programs]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            parts = list(ex.map(_run_program, jobs))
    else:
        parts = [_run_program(j) for j in jobs]
    rows = [r for part in parts for r in part]
    order = {p: i for i, p in enumerate(cfg.policies)}
    corder = {c: i for i, c in enumerate(cfg.configs)}
    rows.sort(key=lambda r: (r.program, order[r.policy], corder[r.config]))
    table = ComparisonTable(cfg, rows)
    if cfg.out_csv:
        Path(cfg.out_csv).write_text(table.to_csv())
    return table


# -- catalog verification ----------------------------------------------------------

@dataclass
class CatalogRow:
    claim: str
    budget: str
    outcome: str
    witness_sigma: str
    source: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome in ("NO_COUNTEREXAMPLE", "REFUTED")


def _refutation_row(entry, k: int, l: int) -> CatalogRow:
    sigma, b = entry.witness(k, l)
    rp = simulate(entry.policy, k, sigma)
    rq = simulate(Policy.LRU, l, sigma)
    if entry.mode is ClaimMode.BLOCK_MISS:
        # growth: doubling the rounds must add misses for the analysed policy, not for LRU
        from .competitiveness import fifo_block_miss_witness

        n = len(sigma) // l
        longer = fifo_block_miss_witness(k, l, 2 * n)
        grows = simulate(entry.policy, k, longer).block_misses(b) > rp.block_misses(b)
        refuted = rp.block_misses(b) > rq.block_misses(b) and rq.block_misses(b) == simulate(Policy.LRU, l, longer).block_misses(b) and grows
    else:
        refuted = rp.block_hits(b) == 0 and rq.block_hits(b) >= 1
    claim = f"{entry.policy.value} {k} LRU {l} {entry.mode.value} none"
    return CatalogRow(claim, "witness", "REFUTED" if refuted else "WITNESS_FAILED",
                      " ".join(map(str, sigma)), entry.source)


def verify_catalog(k_max: int = 4, budget: SearchBudget | None = None, workers: int = 1,
                   policies: Sequence[str] | None = None) -> list[CatalogRow]:
    """Exhaustively check every positive catalog claim for l <= k <= k_max; run the witnesses of refutations.

    Without an explicit budget each ``k`` uses ``SearchBudget.default(k)``.
    """
    wanted = None if policies is None else {Policy.parse(p) for p in policies}
    rows: list[CatalogRow] = []
    for k in range(1, k_max + 1):
        bud = budget or SearchBudget.default(k)
        positives: list[tuple[CompetitivenessClaim, str]] = []
        for entry in catalog():
            if wanted is not None and entry.policy not in wanted:
                continue
            for l in range(1, k + 1):
                if not entry.applies(k, l):
                    continue
                if entry.is_refutation:
                    rows.append(_refutation_row(entry, k, l))
                else:
                    positives.append((entry.instantiate(k, l), entry.source))
        found = verify_many([cl for cl, _ in positives], bud, workers=workers) if positives else {}
        for cl, src in positives:
            cx = found[cl]
            rows.append(CatalogRow(format_claim(cl), str(bud),
                                   "NO_COUNTEREXAMPLE" if cx is None else "COUNTEREXAMPLE",
                                   "" if cx is None else " ".join(map(str, cx.sigma)), src))
    return rows


def catalog_csv(rows: Sequence[CatalogRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["claim", "budget", "outcome", "witness_sigma"])
    for r in rows:
        w.writerow([r.claim, r.budget, r.outcome, r.witness_sigma])
    return buf.getvalue()
