"""Print the bilinear form ledgers (size classes, canonical split, far-below split,
diagonal split) for one seeded instance."""

import argparse

import numpy as np

from dyadica.forms import FormConfig, run_identities
from dyadica.grid import GridSpec
from dyadica.kernel import KernelSpec, Operator
from dyadica.measure import cascade


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--kappa", type=int, default=1)
    ap.add_argument("--eps", type=float, default=0.9)
    ap.add_argument("--rho", type=float, default=3.0)
    ap.add_argument("--tau", type=int, default=2)
    args = ap.parse_args()
    g = GridSpec(1, args.depth)
    s, w = cascade(g, 0.25, seed=args.seed), cascade(g, 0.25, seed=args.seed + 1)
    rng = np.random.default_rng(args.seed)
    op = Operator(KernelSpec("hilbert", 0.0, 2.0 ** -(args.depth + 2), 2.0), s, w)
    rep = run_identities(op, rng.normal(size=len(s)), rng.normal(size=len(w)),
                         FormConfig(args.kappa, args.rho, args.eps, args.tau))
    for name, led in (("size", rep.size), ("canonical", rep.canonical), ("farbelow", rep.farbelow),
                      ("diagonal", rep.ntv)):
        print(f"[{name}] relative residual {led.max_relative():.2e}")
        for k, v in led.parts.items():
            print(f"  {k:14s} {v: .10e}")
        if led.counts:
            print("  counts", led.counts)


if __name__ == "__main__":
    main()
