"""Exact std of R_k over center draws, from the second-moment integral.

Prints std(R_k) on a d grid for a (k, j, p) configuration and the log-log
slope in d.  With j = k caps the ratio is far from Gaussian at moderate d and
the slope is steeper than -1/2; with anti-caps it sits at -1/2.
"""

import argparse

from rgglab.concentration import exact_ratio_std, loglog_slope


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--j", type=int, default=10)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--d", type=int, nargs="+", default=[100, 400, 1600, 6400, 25600])
    args = ap.parse_args(argv)
    stds = []
    for d in args.d:
        stds.append(exact_ratio_std(args.k, args.j, d, args.p))
        print(f"d={d:<6} std={stds[-1]:.5f}")
    print(f"slope over the grid {loglog_slope(args.d, stds):.3f}")
    for a, b, s, t in zip(args.d, args.d[1:], stds, stds[1:]):
        print(f"  local slope {a}->{b}: {loglog_slope([a, b], [s, t]):.3f}")


if __name__ == "__main__":
    main()
