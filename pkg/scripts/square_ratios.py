"""L^p ratios of the square functions against their depth-4 calibration, over depths."""

import argparse

from dyadica.squarefn import SquareSpec, calibrate, ratio_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kinds", default="haar,alpert,corona,shifted_corona")
    ap.add_argument("--p", default="1.5,2,3")
    ap.add_argument("--kappa", type=int, default=2)
    ap.add_argument("--depths", default="4,6,8,10")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("kind,p,depth,max_ratio,calibration,ratio_over_calibration")
    for kind in args.kinds.split(","):
        spec = SquareSpec(kind, kappa=args.kappa)
        for p in map(float, args.p.split(",")):
            cal = calibrate(spec, p, 4)
            for d in map(int, args.depths.split(",")):
                rep = ratio_report(spec, p, d, args.trials, args.seed)
                print(f"{kind},{p},{d},{rep.max_ratio:.6f},{cal:.6f},{rep.max_ratio / cal:.4f}")


if __name__ == "__main__":
    main()
