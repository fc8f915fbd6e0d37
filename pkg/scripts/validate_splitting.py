"""Cross-check of the splitting estimator of prefix intersection measures.

For random centers it compares the splitting estimate of the final
intersection measure (averaged over independent runs) with plain Monte Carlo
on the same centers, in units of the combined standard error; then it compares
the noise-corrected std of R_k across center draws with the exact value.
"""

import argparse
import math

import numpy as np

from rgglab.concentration import (
    exact_ratio_std,
    final_ratio_summary,
    intersection_measure_mc,
    martingale_traces,
    sequential_intersection,
)
from rgglab.graphs import reduced_sphere_vectors
from rgglab.rng import RngStream
from rgglab.sphere import CapSpec, Orientation, tau_of_p


def same_centers(k, j, d, p, runs, particles, plain, stream):
    centers = reduced_sphere_vectors(k, d, 1, stream.substream(0))[0]
    tau = tau_of_p(d, p)
    is_cap = np.arange(k) < j
    caps = [CapSpec(np.r_[c, np.zeros(d - c.size)], tau, Orientation.CAP if ic else Orientation.ANTICAP)
            for c, ic in zip(centers, is_cap)]
    ref, ref_se = intersection_measure_mc(caps, plain, stream.substream(1))
    est = np.array([sequential_intersection(centers, tau, is_cap, d, particles, stream.substream(2 + r)).measures[-1]
                    for r in range(runs)])
    se = math.hypot(ref_se, est.std(ddof=1) / math.sqrt(runs))
    return ref, est.mean(), (est.mean() - ref) / se


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--particles", type=int, default=5000)
    ap.add_argument("--plain", type=int, default=4_000_000)
    ap.add_argument("--traces", type=int, default=100)
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args(argv)
    root = RngStream(args.seed)
    configs = [(4, 2, 100, 0.3), (6, 3, 400, 0.3), (5, 5, 50, 0.2), (6, 0, 4, 0.3)]
    for i, (k, j, d, p) in enumerate(configs):
        ref, est, z = same_centers(k, j, d, p, args.runs, args.particles, args.plain, root.substream(i))
        print(f"k={k} j={j} d={d} p={p}: plain {ref:.5g}  splitting {est:.5g}  z={z:+.2f}")
    for i, (k, j, d, p) in enumerate([(20, 4, 500, 0.1), (10, 10, 400, 0.1)]):
        s = final_ratio_summary(martingale_traces(k, j, d, p, args.traces, args.particles,
                                                  root.substream(100 + i)))
        print(f"k={k} j={j} d={d}: mean {s.mean:.4f} (se {s.stderr:.4f}) corrected std {s.std_corrected:.4f} "
              f"exact {exact_ratio_std(k, j, d, p):.4f}")


if __name__ == "__main__":
    main()
