#!/usr/bin/env python3
"""Replay every golden scenario and print a summary table.

Usage: python scripts/run_scenarios.py [--out DIR] [--seed N]
"""

import argparse
import sys
import time
from pathlib import Path

from tipsmon import harness


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="scenario_runs", help="output directory")
    parser.add_argument("--seed", type=int, default=2024, help="session id seed")
    args = parser.parse_args()

    out = Path(args.out)
    print(f"{'scenario':<8} {'violations':<22} {'proficient':<10} {'ms':>6}  report")
    worst = 0
    for name in harness.SCENARIO_NAMES:
        start = time.perf_counter()
        report = harness.replay_scenario(name, out / name, seed=args.seed)
        elapsed = (time.perf_counter() - start) * 1000
        kinds = ",".join(v.error_type for v in report.violations) or "-"
        print(
            f"{name:<8} {kinds:<22} {str(report.proficient):<10} {elapsed:>6.0f}  "
            f"{out / name / report.session_id / 'report.json'}"
        )
        if not report.proficient and name == "clean":
            worst = 1
        if name != "clean" and len(report.violations) != 1:
            worst = 1
    return worst


if __name__ == "__main__":
    sys.exit(main())
