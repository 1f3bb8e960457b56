"""Sup-node distance of f_hat_m to a fine reference along a mesh ladder.

    python3 scripts/convergence_ladder.py --alpha 0.5 --ref 4096
"""
import argparse
import math

import numpy as np

from induced_ulam import canonical_lsv
from induced_ulam.pipeline import solve_density


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--ref", type=int, default=4096)
    p.add_argument("--ladder", default="128,256,512,1024,2048")
    p.add_argument("--eps", type=float, default=1e-13)
    args = p.parse_args()

    spec = canonical_lsv(args.alpha)
    _, ref = solve_density(spec, args.ref, args.eps)
    print("m,sup_dist,ratio,dist_over_lnm_per_m,lambda2")
    prev = None
    for m in (int(v) for v in args.ladder.split(",")):
        _, r = solve_density(spec, m, args.eps)
        d = float(np.max(np.abs(r.density.values - ref.density.values[::args.ref // m])))
        ratio = "" if prev is None else f"{d / prev:.4f}"
        print(f"{m},{d:.6e},{ratio},{d * m / math.log(m):.6e},{r.lambda2:.4f}")
        prev = d


if __name__ == "__main__":
    main()
