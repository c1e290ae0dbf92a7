#!/usr/bin/env python3
"""Exhaustively check every catalog claim up to k_max and run the refutation witnesses."""
from __future__ import annotations

import argparse
import sys
import time

from qcache.experiment import catalog_csv, verify_catalog


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=4)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--policy", action="append", help="restrict to these policies (repeatable)")
    args = ap.parse_args()
    start = time.perf_counter()
    rows = verify_catalog(args.kmax, workers=args.workers, policies=args.policy)
    sys.stdout.write(catalog_csv(rows))
    bad = [r for r in rows if not r.ok]
    print(f"{len(rows)} rows, {len(bad)} failures, {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
