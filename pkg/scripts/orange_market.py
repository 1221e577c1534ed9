"""Solve the orange juice market for a range of proximal parameters.

Prints one line per r with the iteration count, first-stage supply and the
worst deviation from the reference quantities and prices, followed by the
exact solution from complementary basis enumeration.
"""

import argparse

import numpy as np

from svipha.instances import ORANGE_PRICES, ORANGE_QUANTITIES, orange_market, orange_prices
from svipha.oracle import extensive_slcp_oracle
from svipha.pha import PhaConfig, pha_solve


def gaps(x1, x2):
    q = np.asarray(x2)[:, :2]
    return (float(np.ravel(x1)[0]), float(np.max(np.abs(q - ORANGE_QUANTITIES))),
            float(np.max(np.abs(orange_prices(q) - ORANGE_PRICES))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.03, 0.01])
    ap.add_argument("--tol", type=float, default=1e-5)
    ap.add_argument("--max-iter", type=int, default=20000)
    args = ap.parse_args(argv)

    slcp = orange_market()
    print(f"{'r':>6} {'status':>12} {'iters':>6} {'time_s':>7} {'Q_S':>9} {'qty_gap':>8} {'price_gap':>9}")
    for r in args.r:
        rep = pha_solve(slcp.to_problem(), PhaConfig(r=r, tol=args.tol, max_iter=args.max_iter,
                                                     record_history=False))
        x = rep.x_final.values
        qs, dq, dp = gaps(x[0, :1], x[:, 1:])
        print(f"{r:6.3g} {rep.status:>12} {rep.iterations:6d} {rep.wall_time:7.2f} {qs:9.3f} {dq:8.3f} {dp:9.4f}")
    (x1, x2), = extensive_slcp_oracle(slcp)
    qs, dq, dp = gaps(x1, x2)
    print(f"{'exact':>6} {'':>12} {'':>6} {'':>7} {qs:9.3f} {dq:8.3f} {dp:9.4f}")
    print("exact second stage (Q_J, Q_F, eta):")
    for row in x2:
        print("  " + "  ".join(f"{v:10.4f}" for v in row))


if __name__ == "__main__":
    main()
