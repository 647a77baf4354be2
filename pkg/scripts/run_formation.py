#!/usr/bin/env python3
"""Run the bundled five-robot formation benchmark and summarize convergence.

Usage:
    python scripts/run_formation.py [--horizon 300] [--mode adaptive]
                                    [--seed 7] [--out out/formation]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from coopreg.scenarios import FORMATION_OFFSETS, formation_scenario
from coopreg.simkit import analyze, run, validate_scenario, write_trajectory_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=int, default=300)
    ap.add_argument("--mode", choices=["distributed", "adaptive"], default="distributed")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="optionally export trajectory.csv here")
    args = ap.parse_args()

    scenario = formation_scenario(
        horizon=args.horizon, observer_mode=args.mode, seed=args.seed
    )
    checks = validate_scenario(scenario)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")

    t0 = time.perf_counter()
    log = run(scenario)
    elapsed = time.perf_counter() - t0
    report = analyze(log, scenario.thresholds, checks)

    print(f"\nsimulated {args.horizon} steps in {elapsed * 1e3:.1f} ms")
    for s in report.series:
        print(f"  {s.name:16s} final {s.final:.3e}  rate {s.fit.rate:.4f}  {s.note}")

    # achieved relative positions (follower state holds position - offset)
    leader_pos = log.v[-1, :2]
    print("\nfinal relative positions (target offsets in parentheses):")
    for i, (ox, oy) in enumerate(FORMATION_OFFSETS):
        pos = log.x[i][-1, :2] + np.array([ox, oy])
        rel = pos - leader_pos
        print(f"  follower {i + 1}: ({rel[0]:+.6f}, {rel[1]:+.6f})   ({ox:+.0f}, {oy:+.0f})")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "trajectory.csv").open("w", encoding="utf-8", newline="") as fh:
            write_trajectory_csv(log, fh)
        print(f"\ntrajectory written to {out / 'trajectory.csv'}")
    return 0 if report.converged else 1


if __name__ == "__main__":
    sys.exit(main())
