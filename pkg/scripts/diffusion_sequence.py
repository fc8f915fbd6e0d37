"""Cap discrepancy of a point mass under repeated cap-convolution pushes.

Prints the discrepancy after each push with the particle-noise floor
2.6 sqrt((1 - p) / (p N)) of a uniform ensemble of the same size; once the
sequence reaches the floor further pushes are indistinguishable.
"""

import argparse
import math

import numpy as np

from rgglab.concentration import ParticleDistribution, cap_convolution_push, cap_discrepancy
from rgglab.rng import RngStream
from rgglab.sphere import tau_of_p


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--p", type=float, default=0.2)
    ap.add_argument("--particles", type=int, default=200_000)
    ap.add_argument("--pushes", type=int, default=5)
    ap.add_argument("--z-samples", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    root = RngStream(args.seed)
    tau = tau_of_p(args.d, args.p)
    nu = ParticleDistribution.point_mass(np.eye(args.d)[0], args.particles)
    floor = 2.6 * math.sqrt((1 - args.p) / (args.p * args.particles))
    prev = None
    for step in range(args.pushes + 1):
        disc = cap_discrepancy(nu, tau, args.z_samples, root.substream(100 + step), p=args.p)
        ratio = "" if prev is None else f" ratio {disc / prev:.3f}"
        print(f"push {step}: discrepancy {disc:.5g}{ratio}")
        prev = disc
        nu = cap_convolution_push(nu, tau, root.substream(step))
    print(f"noise floor ~ {floor:.4g}")


if __name__ == "__main__":
    main()
