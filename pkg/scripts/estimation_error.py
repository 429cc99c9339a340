"""How well frequency statistics predict routing on synthetic traces.

Part 1: MLE distribution error rate against training-set size, per skewness.
Part 2: probability-model vs position-conditional accuracy on held-out tokens.

    python scripts/estimation_error.py [--experts 8] [--seeds 20]
"""

import argparse

import numpy as np

from moegps.domain import WorkloadConfig, distribution_from_skewness, sample_trace
from moegps.estimation import error_rate, mle_estimate
from moegps.predictors import evaluate_accuracy, fit_conditional_model, fit_probability_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--experts", type=int, default=8)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--skew", type=float, nargs="*", default=[1.0, 1.4, 2.0, 2.6, 4.0])
    args = ap.parse_args()
    E = args.experts
    sizes = [10**2, 10**3, 10**4, 10**5]

    print("median MLE error rate over seeds")
    print(f"{'skew':>6} " + " ".join(f"N={n:<8}" for n in sizes))
    for s in args.skew:
        dist = distribution_from_skewness(E, s)
        meds = []
        for n in sizes:
            errs = [error_rate(mle_estimate(sample_trace(dist, WorkloadConfig(1, n, skewness=s), seed=k)), dist)
                    for k in range(args.seeds)]
            meds.append(np.median(errs))
        print(f"{s:6.2f} " + " ".join(f"{m:10.4f}" for m in meds))

    # i.i.d. synthetic routing carries no positional signal, so conditioning
    # overfits: train accuracy rises while held-out accuracy does not
    print("\ntop-1 prediction accuracy (train / test)")
    print(f"{'skew':>6} {'probability':>20} {'conditional':>20}")
    for s in args.skew:
        dist = distribution_from_skewness(E, s)
        train = sample_trace(dist, WorkloadConfig(64, 128, skewness=s), seed=1)
        test = sample_trace(dist, WorkloadConfig(16, 128, skewness=s), seed=2)
        prob = fit_probability_model(train)
        cond = fit_conditional_model(train, key="position")
        pa = (evaluate_accuracy(prob, train), evaluate_accuracy(prob, test))
        ca = (evaluate_accuracy(cond, train), evaluate_accuracy(cond, test))
        print(f"{s:6.2f} {pa[0]:9.3f} / {pa[1]:.3f}    {ca[0]:9.3f} / {ca[1]:.3f}")


if __name__ == "__main__":
    main()
