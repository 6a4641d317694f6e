#!/usr/bin/env python3
"""Throughput sweep: 10..N agents step 10, CSV to stdout.

Equivalent to `parley stress --sweep`, kept as a script so sweep results
land in a file for comparison across machines:

    python3 scripts/stress_sweep.py --max-agents 150 --duration 2 > sweep.csv
"""

from __future__ import annotations

import argparse
import csv
import sys

from parley.cli import stress_episode


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-agents", type=int, default=150)
    parser.add_argument("--duration", type=float, default=2.0, help="real seconds per rung")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    writer = csv.writer(sys.stdout)
    writer.writerow(["agents", "duration_sec", "actions", "deliveries", "actions_per_sec", "deliveries_per_sec"])
    for agents in range(10, args.max_agents + 1, 10):
        result = stress_episode(agents, args.duration, seed=args.seed)
        writer.writerow([
            result["agents"],
            result["duration_sec"],
            result["actions"],
            result["deliveries"],
            round(result["actions_per_sec"], 1),
            round(result["deliveries_per_sec"], 1),
        ])
        sys.stdout.flush()
        print(f"agents={agents}: {result['actions_per_sec']:.0f} actions/s", file=sys.stderr)


if __name__ == "__main__":
    main()
