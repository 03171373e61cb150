#!/usr/bin/env python3
"""Congregated attack on one domain, with and without SovKad's attack response.

Prints success rate and messages for lookups targeting the attacked domain,
plus the honest share of that domain's membership at the end of the run.

    python3 scripts/congregated_ablation.py --nodes 8000 --domains 8 --minutes 10
    python3 scripts/congregated_ablation.py --strategy drop_all
"""

import argparse
import dataclasses

from podsim.metrics import aggregate
from podsim.sim import AdversaryConfig, ReputationParams, SimConfig, Simulation


def one(protocol, args, responses=True):
    cfg = SimConfig(
        protocol=protocol, n_nodes=args.nodes, n_domains=args.domains,
        sim_duration=args.minutes * 60_000.0, seed=args.seed,
        byzantine_fraction=args.fraction, byzantine_placement="congregated", victim_domain=0,
        scenario="byzantine_congregated", adversary=AdversaryConfig(args.strategy),
        reputation=ReputationParams(responses_enabled=responses),
    ).validate()
    sim = Simulation(cfg)
    records = sim.run()
    (s,) = aggregate(records, domain=0)
    honest, total = sim.domain_population(0)
    return s, honest / total, sim.responses


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=8000)
    ap.add_argument("--domains", type=int, default=8)
    ap.add_argument("--minutes", type=float, default=10)
    ap.add_argument("--fraction", type=float, default=0.3)
    ap.add_argument("--strategy", default="intra_only_drop", choices=["intra_only_drop", "drop_all"])
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rows = [("fedkad", *one("fedkad", args)),
            ("sovkad", *one("sovkad", args)),
            ("sovkad (no response)", *one("sovkad", args, responses=False))]
    print(f"{'protocol':<22}{'success':>9}{'hops':>7}{'messages':>10}{'honest share':>14}  responses")
    for name, s, share, resp in rows:
        print(f"{name:<22}{s.success_rate:>9.4f}{s.hops_mean:>7.3f}{s.messages_mean:>10.2f}"
              f"{share:>14.3f}  {dict(sorted(resp.items()))}")
    gap = rows[1][1].success_rate - rows[0][1].success_rate
    gap_off = rows[2][1].success_rate - rows[0][1].success_rate
    print(f"success gap sovkad - fedkad: {gap:+.4f} (responses off: {gap_off:+.4f})")


if __name__ == "__main__":
    main()
