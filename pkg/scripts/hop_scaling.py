#!/usr/bin/env python3
"""Mean happy-path hops per protocol as the network grows.

    python3 scripts/hop_scaling.py --sizes 1000,4000,8000,16000 --domains 8 --minutes 5
"""

import argparse
import math

from podsim.metrics import aggregate
from podsim.sim import SimConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,2000,4000,8000,16000")
    ap.add_argument("--domains", type=int, default=8)
    ap.add_argument("--minutes", type=float, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]

    print(f"{'nodes':>7} {'log2':>6} " + " ".join(f"{p:>9}" for p in ("kademlia", "fedkad", "sovkad")))
    for n in sizes:
        hops = []
        for protocol in ("kademlia", "fedkad", "sovkad"):
            cfg = SimConfig(protocol=protocol, n_nodes=n, n_domains=args.domains,
                            sim_duration=args.minutes * 60_000.0, seed=args.seed, scenario="happy_path")
            (s,) = aggregate(run(cfg))
            hops.append(s.hops_mean)
        print(f"{n:>7} {math.log2(n):>6.2f} " + " ".join(f"{h:>9.3f}" for h in hops), flush=True)


if __name__ == "__main__":
    main()
