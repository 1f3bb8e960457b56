"""Run every numerical bound check for a list of alphas.

    python3 scripts/lemma_check.py --alphas 0.3,0.5,0.7
"""
import argparse

from induced_ulam import canonical_lsv
from induced_ulam.constants import compute_constants
from induced_ulam.inducing import build_induced
from induced_ulam.lemmas import run_all


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--alphas", default="0.3,0.5,0.7")
    p.add_argument("--tail-tol", type=float, default=1e-8)
    p.add_argument("--cap", type=int, default=1_000_000)
    args = p.parse_args()

    print("alpha,suite,checked,violations,worst_ratio")
    for a in (float(v) for v in args.alphas.split(",")):
        spec = canonical_lsv(a)
        ind = build_induced(spec, tail_tol=args.tail_tol, cap=args.cap)
        for r in run_all(spec, compute_constants(spec, 1.0), ind):
            print(f"{a},{r.name},{r.checked},{r.violations},{r.worst_ratio:.6g}")


if __name__ == "__main__":
    main()
