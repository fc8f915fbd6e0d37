"""Calibrate the constant in the slab-mass bound

    slab(d, tau(p), eps) <= p * C * eps * exp(2 d tau eps) * sqrt(d ln(1/p)).

The bound's constant is not given explicitly, so it is fixed once as the
largest observed ratio over a calibration grid (rounded up).  Only grid points
with 0 <= tau(p) <= 1/2 are used; outside that range the density ratio bound
behind the slab estimate does not apply (d = 2 is singular near tau = 1).  The value is
frozen in tests/conftest.py and re-checked there on a wider grid.
"""

import itertools
import math

from rgglab.sphere import slab_measure, tau_of_p

D_GRID = [10, 50, 200, 1000]
P_GRID = [1e-4, 1e-3, 0.01, 0.1, 0.3]
EPS_GRID = [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3]


def ratio(d, p, eps):
    tau = tau_of_p(d, p)
    shape = p * eps * math.exp(2 * d * tau * eps) * math.sqrt(d * math.log(1 / p))
    return slab_measure(d, tau, eps) / shape


def in_range(d, p):
    return 0.0 <= tau_of_p(d, p) <= 0.5


def main():
    worst = max(
        (ratio(d, p, e), d, p, e)
        for d, p, e in itertools.product(D_GRID, P_GRID, EPS_GRID)
        if in_range(d, p)
    )
    print(f"max ratio {worst[0]:.6f} at d={worst[1]} p={worst[2]} eps={worst[3]}")
    print(f"calibrated constant: {math.ceil(worst[0] * 100) / 100:.2f}")


if __name__ == "__main__":
    main()
