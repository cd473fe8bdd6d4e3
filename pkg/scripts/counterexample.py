"""Both sides of the quadratic inequality for the logarithmic weight pair, plus the
local A_p band, the maximal-function failure and the discretised tower witness."""

import argparse
import math

import numpy as np

from dyadica.appendix import (AppendixConfig, failure_increment_slope, local_ap_band, maximal_failure,
                              quadratic_sums, rhs_tail_constant, tower_growth)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=1.5)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--nmax", type=int, default=10 ** 6)
    ap.add_argument("--tower-depth", type=int, default=16)
    args = ap.parse_args()
    cfg = AppendixConfig(args.p, args.alpha, args.eps, args.nmax)
    band = local_ap_band(cfg.p, cfg.alpha)
    print(f"local A_p over [0, 2^-k], k=2..20: band {band.band:.4f}, max/min {band.width:.4f}")
    s = quadratic_sums(cfg)
    print("N,rhs,lhs")
    for N, r, l in zip(s.checkpoints, s.rhs_integral, s.lhs_integral):
        print(f"{N},{r:.12g},{l:.12g}")
    Ns, inc = s.rhs_tail()
    print(f"rhs tail (RHS_2N - RHS_N) N^eps -> {inc[-1] * Ns[-1] ** cfg.eps:.6f}, "
          f"constant {rhs_tail_constant(cfg):.6f}")
    print(f"lhs increment slope {s.lhs_increment_slope():.4f} (predicted {1 + cfg.lhs_exponent:.4f}), "
          f"log-log slope of LHS_N {s.lhs_slope():.4f}")
    U = math.log(2) * 2.0 ** np.arange(1, 9)
    inc = np.diff(maximal_failure(cfg.alpha, U))
    print("maximal failure increments / ln 2 along doubling cut-offs:", np.round(inc / math.log(2), 6))
    print(f"alpha=1/2 growth exponent {failure_increment_slope(0.5, np.geomspace(1.0, 1e4, 13)):.4f}")
    for d, v in tower_growth(cfg.p, cfg.alpha, cfg.eps, range(8, args.tower_depth + 1)):
        print(f"tower depth {d}: {v:.6f}")


if __name__ == "__main__":
    main()
