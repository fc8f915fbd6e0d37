"""Pilot run fixing the default constant C2 of the coupling tolerance

    eps = C2 * sqrt((n p + ln n) ln^4 n / d).

For each candidate C2 the coupled sampler is run at the reference setting and
the sandwich frequency G- ⊆ G ⊆ G+ is reported.  The default in
rgglab.graphs is the smallest candidate whose frequency clears 0.99, which
leaves headroom over the 0.95 acceptance level.
"""

import argparse

import numpy as np

from rgglab.errors import InsufficientAcceptanceError
from rgglab.graphs import coupled_triple_sample, coupling_epsilon
from rgglab.rng import RngStream


def sandwich_frequency(n, p, d, c2, budget, trials, seed):
    eps = coupling_epsilon(n, p, d, c2)
    ok = 0
    for t in range(trials):
        try:
            ok += coupled_triple_sample(n, p, d, eps, budget, RngStream(seed, t)).sandwich_ok
        except InsufficientAcceptanceError:
            pass
    return eps, ok / trials


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--p", type=float, default=0.25)
    ap.add_argument("--d", type=int, default=4000)
    ap.add_argument("--budget", type=int, default=100_000)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=9001)
    ap.add_argument("--c2", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.75, 1.0])
    args = ap.parse_args(argv)
    for c2 in args.c2:
        eps, freq = sandwich_frequency(args.n, args.p, args.d, c2, args.budget, args.trials, args.seed)
        se = np.sqrt(freq * (1 - freq) / args.trials)
        print(f"C2={c2:<5} eps={eps:.4f} sandwich={freq:.3f} (se {se:.3f})")


if __name__ == "__main__":
    main()
