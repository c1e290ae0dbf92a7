from __future__ import annotations

from fractions import Fraction

import pytest

from conftest import CORPUS
from qcache.errors import InvalidParams, ParseError
from qcache.experiment import (
    ExperimentConfig,
    ResultRow,
    _fmt,
    catalog_csv,
    load_config,
    run_experiment,
    verify_catalog,
)


def test_load_config_defaults_and_paths(tmp_path):
    cfg = load_config("programs = a.prog, b.prog\nk = 2\noracle = no\nnode_limit = none\n", tmp_path)
    assert cfg.programs == [str(tmp_path / "a.prog"), str(tmp_path / "b.prog")]
    assert (cfg.k, cfg.oracle, cfg.node_limit, cfg.nb_sets) == (2, False, None, 2)
    assert load_config("k = 2", jobs=3).jobs == 3


@pytest.mark.parametrize("text", ["k 2", "colour = red", "k = two", "oracle = maybe"])
def test_load_config_errors(text):
    with pytest.raises(ParseError):
        load_config(text)


def test_config_validation():
    with pytest.raises(InvalidParams):
        ExperimentConfig(objective="energy")
    with pytest.raises(ValueError):
        ExperimentConfig(configs=("allhit", "nonsense"))


def test_ratio_formatting_is_exact():
    assert _fmt(Fraction(1, 3)) == "0.333333"
    assert _fmt(Fraction(2, 3)) == "0.666667"
    assert _fmt(Fraction(1, 2 * 10 ** 6)) == "0.000001"
    assert _fmt(Fraction(7)) == "7.000000"
    assert _fmt(None) == ""
    assert ResultRow("p", "LRU", "allmiss", 9, 3).ratio == 3


def test_small_experiment(tmp_path):
    out = tmp_path / "t.csv"
    cfg = ExperimentConfig(
        programs=[str(CORPUS / "diamond.prog"), str(CORPUS / "loop_simple.prog")],
        policies=("FIFO",),
        configs=("allhit", "allmiss", "all-comp"),
        out_csv=str(out),
        lp_dir=str(tmp_path / "lp"),
    )
    table = run_experiment(cfg)
    assert [r.config for r in table.rows] == ["allhit", "allmiss", "all-comp"] * 2
    assert all(r.sound for r in table.rows if r.config != "allhit")
    assert table.failures == []
    text = out.read_text()
    assert text.count("GEOMEAN") == 3
    # the baseline configuration is modelled too
    assert len(list((tmp_path / "lp").glob("*.lp"))) == 8


def test_missing_program_reported(tmp_path):
    cfg = ExperimentConfig(programs=[str(tmp_path / "nope.prog")], policies=("LRU",), configs=("allmiss",))
    (row,) = run_experiment(cfg).rows
    assert row.bound is None and row.error.startswith("FileNotFoundError")


def test_verify_catalog_small():
    rows = verify_catalog(k_max=2)
    assert rows and all(r.ok for r in rows)
    assert any(r.outcome == "REFUTED" for r in rows)
    assert catalog_csv(rows).startswith("claim,budget,outcome,witness_sigma\n")
