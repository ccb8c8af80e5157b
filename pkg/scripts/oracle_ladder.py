"""Cramer-Rao suprema over nested submodels next to the bound they approach.

    python3 scripts/oracle_ladder.py --model levy-cp-normal --t 1.5 --dims 4,8,16,32,64
"""
import argparse
import json

from effbound.bounds import bound_decon, bound_levy
from effbound.functionals import Functional
from effbound.models import DeconvPair, build_model
from effbound.oracle import cramer_rao_ladder, ladder_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="levy-cp-normal")
    ap.add_argument("--t", type=float, default=1.5)
    ap.add_argument("--side", choices=["left", "right"], default="left")
    ap.add_argument("--dims", default="4,8,16,32,64")
    ap.add_argument("--degree", type=int, default=1)
    args = ap.parse_args()
    model = build_model(args.model)
    z = Functional.left(args.t) if args.side == "left" else Functional.right(args.t)
    bound = bound_decon if isinstance(model, DeconvPair) else bound_levy
    sigma = float(bound(model, z).sigma[0, 0])
    dims = [int(d) for d in args.dims.split(",")]
    res = cramer_rao_ladder(model, z, dims, args.degree)
    print(json.dumps(ladder_report(res, sigma), indent=2))


if __name__ == "__main__":
    main()
