"""How |f_m - f_2m| and f_m itself scale near the neutral fixed point.

Prints the local values on a geometric grid and the fitted log-log slopes.

    python3 scripts/weight_shape.py --alpha 0.5 --m 1024
"""
import argparse

import numpy as np

from induced_ulam import canonical_lsv
from induced_ulam.pipeline import solve_density
from induced_ulam.pullback import eval_fm, make_evaluator


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--lo", type=float, default=1e-3)
    p.add_argument("--hi", type=float, default=1e-1)
    args = p.parse_args()

    spec = canonical_lsv(args.alpha)
    ind, a = solve_density(spec, args.m, 1e-13, min_branches=args.N)
    _, b = solve_density(spec, 2 * args.m, 1e-13, min_branches=args.N)
    xs = np.geomspace(args.lo, args.hi, 40)
    fa = eval_fm(make_evaluator(ind, a.density, args.N), xs, args.N)
    fb = eval_fm(make_evaluator(ind, b.density, args.N), xs, args.N)
    diff = np.abs(fa - fb)
    print("x,f_m,abs_diff,weighted_diff")
    for x, f, d in zip(xs, fa, diff):
        print(f"{x:.4e},{f:.6e},{d:.4e},{x ** (1 + args.alpha) * d:.4e}")
    ln = np.log(xs)
    print(f"# slope log f_m: {np.polyfit(ln, np.log(fa), 1)[0]:.4f} (singularity x^-{args.alpha})")
    print(f"# slope log|f_m - f_2m|: {np.polyfit(ln, np.log(diff), 1)[0]:.4f} (envelope x^-{1 + args.alpha})")


if __name__ == "__main__":
    main()
