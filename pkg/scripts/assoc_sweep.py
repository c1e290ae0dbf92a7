#!/usr/bin/env python3
"""Geometric-mean bound ratios of each policy and configuration as associativity grows."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from qcache.experiment import load_config, run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "corpus" / "experiment.cfg"))
    ap.add_argument("--assoc", default="1,2,4,8", help="comma-separated associativities")
    ap.add_argument("--objective", choices=["cycles", "misses"], default="misses")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    path = Path(args.config)
    base = load_config(path.read_text(), path.parent, objective=args.objective, jobs=args.jobs)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["k", "policy", "config", "geomean_ratio", "unsound_rows"])
    failed = False
    for k in (int(x) for x in args.assoc.split(",")):
        table = run_experiment(replace(base, k=k, out_csv=None))
        failed |= bool(table.failures)
        for (pol, conf), gm in table.geomeans().items():
            bad = sum(1 for r in table.failures if r.policy == pol and r.config == conf)
            w.writerow([k, pol, conf, f"{gm:.6f}", bad])
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
