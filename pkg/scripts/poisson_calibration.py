"""Depth-4 exhaustive Poisson decay and pivotal maxima, and the sweep against them."""

import argparse

from dyadica import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-depth", type=int, default=None)
    args = ap.parse_args()
    r = verify.poisson_pivotal(seed=args.seed, max_depth=args.max_depth)
    print(r.line())
    for k, v in r.measured.items():
        print(f"  {k}: {v}")


if __name__ == "__main__":
    main()
