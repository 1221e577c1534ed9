"""Run the benchmark grid and write one CSV row per (dim, sn, r) cell.

By default this runs the full grid for the generated pseudomonotone
instances and again with ``--monotone-only`` draws, so the r comparison is
also visible on instances that have solutions.

    python3 scripts/benchmark.py --seeds 10 --out bench.csv
"""

import argparse
import csv
import sys

from svipha.cli import BENCH_HEADER, bench_cell, summarize

DIMS = [(40, 20), (50, 50), (100, 100)]
SCENARIOS = [50, 100, 200]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--sn", type=int, nargs="+", default=SCENARIOS)
    ap.add_argument("--dims", nargs="+", default=[f"{a},{b}" for a, b in DIMS])
    ap.add_argument("--tol", type=float, default=1e-5)
    ap.add_argument("--max-iter", type=int, default=2000)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--skip-pseudo", action="store_true", help="only run monotone-only cells")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    dims = [tuple(int(v) for v in d.split(",")) for d in args.dims]
    families = [True] if args.skip_pseudo else [False, True]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(["family"] + BENCH_HEADER + ["median_iter"])
    for monotone in families:
        family = "monotone" if monotone else "pseudo"
        for n1, n2 in dims:
            for sn in args.sn:
                for lab in ("1", "sqrt"):
                    runs = bench_cell(n1, n2, sn, range(args.seeds), lab, args.tol, args.max_iter,
                                      monotone, args.threads)
                    row = summarize(runs)
                    wr.writerow([family, row["dim"], sn, f"{row['r']:.6g}", f"{row['avg_iter']:.1f}",
                                 f"{row['avg_time_s']:.4f}", f"{row['converged_frac']:.2f}",
                                 f"{row['median_iter']:g}"])
                    fh.flush()
                    statuses = sorted({r.status for r in runs})
                    print(f"{family} [{n1},{n2}] sn={sn} r={lab}: {statuses}", file=sys.stderr)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
