#!/usr/bin/env python3
"""Run every builtin scenario and print a one-line summary for each.

Artifacts (trace, report, point map) land under --out (default ./out).
Exits nonzero if any scenario misses its expected outcome.
"""

import argparse
import sys
import time

from fieldrover.cli import main as cli_main
from fieldrover.scenarios import builtin_scenarios


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="artifact root directory")
    args = parser.parse_args()

    worst = 0
    for name in sorted(builtin_scenarios()):
        t0 = time.perf_counter()
        rc = cli_main(["run", name, "--out", args.out])
        print(f"  -> exit {rc}, wall {time.perf_counter() - t0:.1f}s")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
