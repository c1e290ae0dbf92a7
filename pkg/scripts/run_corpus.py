#!/usr/bin/env python3
"""Bound every corpus program for all policies and configurations; print the comparison table."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from qcache.experiment import load_config, run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "corpus" / "experiment.cfg"))
    ap.add_argument("--objective", choices=["cycles", "misses"])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", help="CSV destination (default stdout)")
    args = ap.parse_args()
    path = Path(args.config)
    cfg = load_config(path.read_text(), path.parent, objective=args.objective, jobs=args.jobs, out_csv=args.out)
    table = run_experiment(cfg)
    if not args.out:
        sys.stdout.write(table.to_csv())
    for row in table.failures:
        print(f"unsound: {row.program} {row.policy} {row.config} bound={row.bound} oracle={row.oracle_max}",
              file=sys.stderr)
    return 1 if table.failures else 0


if __name__ == "__main__":
    sys.exit(main())
