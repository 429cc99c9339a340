"""Distribution-Only saving minus best Token-to-Expert saving, over link bandwidth and skewness.

Positive entries mean Distribution-Only is the faster choice.

    python scripts/savings_by_bandwidth.py [--config bandwidth_sweep.json] [--out results/savings.csv]
"""

import argparse
import csv
from pathlib import Path

from moegps.config import load_run_config
from moegps.sweep import run_sweep, savings_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="bandwidth_sweep.json")
    ap.add_argument("--skew", type=float, nargs="*", help="override the skewness grid")
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    rows = savings_table(run_sweep(cfg, skewness=args.skew or None, workers=4))
    skews = sorted({r["skewness"] for r in rows})
    table = {(r["hardware_id"], r["skewness"]): r for r in rows}
    hws = list(dict.fromkeys(r["hardware_id"] for r in rows))

    print(f"{'hardware':>14} " + " ".join(f"s={s:<6}" for s in skews))
    for hw in hws:
        cells = [table[(hw, s)]["savings_difference_frac"] for s in skews]
        print(f"{hw:>14} " + " ".join(f"{c:+8.3f}" for c in cells))
    print("\nbest token-to-expert accuracy:")
    for hw in hws:
        print(f"{hw:>14} " + " ".join(f"{table[(hw, s)]['best_accuracy']:8.2f}" for s in skews))

    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
