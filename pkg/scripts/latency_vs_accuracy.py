"""Per-layer latency of each strategy against predictor accuracy, per skewness and interconnect.

    python scripts/latency_vs_accuracy.py [--config strategy_sweep.json] [--out results/latency.csv]
"""

import argparse
from pathlib import Path

from moegps.config import load_run_config
from moegps.sweep import group_points, records_to_csv, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="strategy_sweep.json")
    ap.add_argument("--scenario", default="typical", choices=("optimistic", "typical", "pessimistic"))
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    records = run_sweep(cfg, scenario=args.scenario, workers=4)
    for (hw, s), by in group_points(records).items():
        base = by["none"][0].total
        dist = by["distribution_only"][0].total
        print(f"\n{hw}  skew={s}  baseline {base * 1e3:.2f} ms  distribution-only {dist * 1e3:.2f} ms")
        print("  accuracy  token-to-expert(ms)  overhead(ms)  vs baseline")
        for r in by["token_to_expert"]:
            b = r.breakdown
            print(f"  {r.accuracy:8.2f}  {r.total * 1e3:19.2f}  {b.prediction_overhead * 1e3:12.2f}  {r.total / base:10.3f}")

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(records_to_csv(records))
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
