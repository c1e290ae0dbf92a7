from __future__ import annotations

import pytest

from conftest import CORPUS
from qcache.cli import main
from qcache.lpformat import parse_lp

REUSE_SEQ = "0 1 2 2 1 3 1 4 1 5 5 1"


def test_simulate(capsys):
    assert main(["simulate", "--policy", "FIFO", "-k", "2", "--seq", REUSE_SEQ]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "1,2,3" in out and out[-1] == "total,4,8"


def test_simulate_trace_verbose(tmp_path, capsys):
    trace = tmp_path / "t.txt"
    trace.write_text("0\n1\n0\n")
    assert main(["simulate", "--policy", "nmru", "-k", "2", "--trace", str(trace), "-v"]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[-1] == "total,1,2"
    assert "# 0 HIT set0" in captured.err


def test_verify_claim_file(tmp_path, capsys):
    f = tmp_path / "claims.txt"
    f.write_text("FIFO 2 LRU 2 MISS 2 0\nFIFO 2 LRU 2 MISS 1 0\n")
    assert main(["verify-claims", "--claims", str(f), "--budget", "3,6,4"]) == 1
    out = capsys.readouterr().out.splitlines()
    assert out[1].endswith("NO_COUNTEREXAMPLE,")
    assert ",COUNTEREXAMPLE," in out[2]


def test_verify_catalog_small(capsys):
    assert main(["verify-claims", "--kmax", "2"]) == 0
    assert "REFUTED" in capsys.readouterr().out


def test_analyze_programs(tmp_path, capsys):
    lp = tmp_path / "m.lp"
    js = tmp_path / "m.json"
    prog = str(CORPUS / "loop_simple.prog")
    rc = main(["analyze", prog, "--policy", "MRU", "--all-comp", "--objective", "misses",
               "--emit-lp", str(lp), "--json", str(js)])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("program,policy")
    row = out[1].split(",")
    assert row[4] == "all-comp"
    assert row[8] == "true"
    assert parse_lp(lp.read_text()).variables
    assert js.read_text().startswith("{")


def test_analyze_allhit_not_a_failure(capsys):
    rc = main(["analyze", str(CORPUS / "diamond.prog"), "--baseline", "allhit"])
    assert rc == 0
    assert ",false," in capsys.readouterr().out


def test_analyze_config_file(tmp_path, capsys):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(f"programs = {CORPUS / 'diamond.prog'}\npolicies = LRU\nconfigs = allmiss, lru-maymust-pers\n")
    assert main(["analyze", "--config-file", str(cfg)]) == 0
    assert "GEOMEAN,LRU" in capsys.readouterr().out


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(f"programs = {CORPUS / 'straight.prog'}\npolicies = FIFO\nconfigs = all-comp\n")
    assert main(["sweep", str(cfg), "--vary", "k=1,2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("program,") and sum(1 for l in out if l.startswith("program,")) == 1
    assert {l.split(",")[2] for l in out[1:]} == {"1", "2"}


def test_emit_lp(capsys):
    assert main(["emit-lp", str(CORPUS / "diamond.prog"), "--config", "miss", "--policy", "FIFO"]) == 0
    assert capsys.readouterr().out.startswith("\\ FIFO\nMaximize")


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze"],
        ["analyze", "missing.prog"],
        ["simulate", "--policy", "PLRU", "--seq", "0"],
    ],
)
def test_errors_exit_2(argv):
    assert main(argv) == 2


def test_conflicting_flags():
    with pytest.raises(SystemExit):
        main(["analyze", str(CORPUS / "diamond.prog"), "--config", "miss", "--hit"])
