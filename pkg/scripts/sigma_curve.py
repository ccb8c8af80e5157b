"""Sigma(t) for the generalized distribution function of a Levy model, as CSV.

    python3 scripts/sigma_curve.py --model levy-cp-normal --lo -3 --hi 5 --points 33
"""
import argparse
import sys

import numpy as np

from effbound.bounds import bound_levy, sigma_curve_csv
from effbound.errors import EffboundError
from effbound.functionals import Functional
from effbound.models import build_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="levy-cp-normal")
    ap.add_argument("--lo", type=float, default=-3.0)
    ap.add_argument("--hi", type=float, default=5.0)
    ap.add_argument("--points", type=int, default=33)
    ap.add_argument("--known-lambda", action="store_true")
    args = ap.parse_args()
    model = build_model(args.model)
    ts = [t for t in np.linspace(args.lo, args.hi, args.points) if abs(t) > 1e-9]
    sig = []
    for t in ts:
        try:
            r = bound_levy(model, Functional.generalized_cdf(t), known_lambda=args.known_lambda)
            sig.append(float(r.sigma[0, 0]))
        except EffboundError as exc:  # a point the bound rejects stays in the curve as nan
            print(f"t={t:.4g}: {exc}", file=sys.stderr)
            sig.append(float("nan"))
    sys.stdout.write(sigma_curve_csv(ts, sig))


if __name__ == "__main__":
    main()
