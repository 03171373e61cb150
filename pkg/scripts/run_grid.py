#!/usr/bin/env python3
"""Reproduce the full evaluation grid: 3 protocols x |V| in {1000, 8000, 16000}
x |D| in {2, 4, 6, 8} x 4 scenarios, one hour of simulated time per cell.

    python3 scripts/run_grid.py --out results/grid --parallel 4
    python3 scripts/run_grid.py --quick            # 1000 nodes, 10 minutes

Extra arguments are passed to ``podsim sweep`` unchanged.
"""

import sys

from podsim.cli import main

if __name__ == "__main__":
    args = sys.argv[1:]
    if not any(a == "--out" or a.startswith("--out=") for a in args):
        args += ["--out", "results/grid"]
    sys.exit(main(["sweep", *args]))
