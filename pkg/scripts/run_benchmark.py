#!/usr/bin/env python3
"""Run the full four-policy benchmark and print the headline rates.

Equivalent to `riskenv benchmark` plus a compact console table; use --quick
for a 20-scenario smoke run.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from riskenv import bench
from riskenv.config import COVARIANCE_CASES, RunConfig, load_config


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="results")
    parser.add_argument("--quick", action="store_true",
                        help="20 scenarios instead of the configured count")
    args = parser.parse_args()

    cfg = load_config(args.config)
    n = 20 if args.quick else cfg.scenario.n_scenarios
    scenarios = bench.generate_scenarios(n, cfg.seed, cfg)
    rows = bench.sweep(scenarios, list(cfg.policies), list(COVARIANCE_CASES),
                       list(cfg.betas), cfg)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "rates.csv").write_text(bench.rows_to_csv(rows))
    print(f"wrote {out_dir / 'rates.csv'} ({len(rows)} cells, {n} scenarios each)\n")

    print(f"{'policy':<34}{'case':<7}{'beta':>5} {'succ':>6} {'coll':>6} {'tout':>6}")
    for r in rows:
        print(f"{r.policy:<34}{r.covariance_case:<7}{r.beta:>5.2f} "
              f"{r.success_rate:>6.2f} {r.collision_rate:>6.2f} "
              f"{r.timeout_rate:>6.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
