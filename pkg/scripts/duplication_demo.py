"""Balance skewed routing traces by expert duplication and report the copies it takes.

    python scripts/duplication_demo.py [--gpus 4] [--experts 8] [--tokens 4096]
"""

import argparse

from moegps.domain import WorkloadConfig, distribution_from_skewness, sample_trace
from moegps.duplication import Placement, balance_by_duplication, initial_dispatch, verify_balance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gpus", type=int, default=4)
    ap.add_argument("--experts", type=int, default=8)
    ap.add_argument("--tokens", type=int, default=4096)
    ap.add_argument("--max-copies", type=int)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    placement = Placement.round_robin(args.experts, args.gpus, max_copies=args.max_copies)
    print(f"{'skew':>6} {'loads before':>28} {'loads after':>28} {'copies':>7} {'rounds':>7} ok")
    for s in (1.0, 1.4, 2.0, 2.6, 4.0, float(args.experts)):
        dist = distribution_from_skewness(args.experts, s)
        trace = sample_trace(dist, WorkloadConfig(1, args.tokens, skewness=s), seed=args.seed)
        layer = trace.layers[0]
        before = initial_dispatch(layer, placement).loads.tolist()
        res = balance_by_duplication(layer, placement)
        rep = verify_balance(res.dispatch, layer, res.placement)
        print(f"{s:6.2f} {str(before):>28} {str(res.dispatch.loads.tolist()):>28} "
              f"{res.copies_made:7d} {res.iterations:7d} {rep.ok and res.complete}")


if __name__ == "__main__":
    main()
