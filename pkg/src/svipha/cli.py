"""Command-line front end: ``solve``, ``generate``, ``elicit``, ``bench``, ``verify``.

Exit codes: 0 converged or success, 1 iteration limit, 2 bad input,
3 subproblem failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import elicitation as el
from .instances import GeneratorParams, gen_pseudo_slcp, orange_market, textbook_examples
from .model import TwoStageSlcp, slcp_stopping_error
from .pha import CONVERGED, INNER_FAILURE, MAX_ITERS, PhaConfig, pha_solve

EXIT_OK, EXIT_MAXITER, EXIT_PARSE, EXIT_INNER = 0, 1, 2, 3
EXIT_FOR_STATUS = {CONVERGED: EXIT_OK, MAX_ITERS: EXIT_MAXITER, INNER_FAILURE: EXIT_INNER}
BENCH_HEADER = ["dim", "sn", "r", "avg_iter", "avg_time_s", "converged_frac"]


class InputError(Exception):
    pass


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def load_instance(spec: str) -> TwoStageSlcp:
    """``orange`` names the built-in market; anything else is a JSON path."""
    if spec == "orange":
        return orange_market()
    try:
        return TwoStageSlcp.from_dict(_read_json(spec))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _config(args) -> PhaConfig:
    try:
        return PhaConfig(r=args.r, s=args.s, rho=args.rho, tol=args.tol,
                         max_iter=args.max_iter, threads=args.threads)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text)


def cmd_solve(args) -> int:
    slcp = load_instance(args.instance)
    cfg = _config(args)
    rep = pha_solve(slcp.to_problem(), cfg)
    if args.format == "csv":
        _write(rep.history_csv(), args.out)
    else:
        _write(json.dumps(rep.to_dict(n1=slcp.n1), indent=2), args.out)
    if args.history:
        Path(args.history).write_text(rep.history_csv())
    print(f"{rep.status} {rep.iterations} {rep.final_error:.6e} {rep.wall_time:.4f}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_FOR_STATUS[rep.status]


def cmd_generate(args) -> int:
    try:
        params = GeneratorParams(args.n1, args.n2, args.sn, seed=args.seed, monotone_only=args.monotone_only)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    slcp = gen_pseudo_slcp(params)
    _write(json.dumps(slcp.to_dict()), args.out)
    return EXIT_OK


CRITERIA = {
    "T5": lambda d, a: el.check_theorem5(d),
    "T6": lambda d, a: el.check_theorem6(d),
    "C6-1": lambda d, a: el.check_cor6_1(d),
    "T7": lambda d, a: el.check_theorem7(d, a.e2),
    "C7-1": lambda d, a: el.check_cor7_1(d, a.e2),
    "T8": lambda d, a: el.check_theorem8(d, a.e3),
    "C8-1": lambda d, a: el.compute_e3_hat(d),
}


def load_elicitation_data(spec: str, grid_points: int, seed: int) -> el.ElicitationData:
    """A textbook example name, a ``{"DF", "P_M"}`` fixture, or an instance JSON."""
    examples = textbook_examples()
    if spec in examples:
        e = examples[spec]
        return el.ElicitationData.from_matrices(e.M, e.P_M)
    if spec == "orange":
        return el.ElicitationData.from_problem(orange_market().to_problem())
    data = _read_json(spec)
    try:
        if "P_M" in data:
            return el.ElicitationData.from_dict(data)
        problem = TwoStageSlcp.from_dict(data).to_problem()
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return el.ElicitationData.from_problem(problem)


def cmd_elicit(args) -> int:
    d = load_elicitation_data(args.instance, args.grid, args.seed)
    if args.criterion:
        if args.criterion in ("T7", "C7-1") and args.e2 is None:
            raise InputError(f"{args.criterion} needs --e2")
        if args.criterion == "T8" and args.e3 is None:
            raise InputError("T8 needs --e3")
        reports = [CRITERIA[args.criterion](d, args)]
    else:
        reports = el.elicit_all(d, e2=args.e2, e3=args.e3)
    _write(json.dumps([r.to_dict() for r in reports], indent=2), args.out)
    for r in reports:
        rel = ">" if r.strict else ">="
        level = f"s {rel} {r.level_bound:.6g}" if r.applicable else f"n/a: {r.reason}"
        print(f"{r.criterion:5s} {level}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchRun:
    n1: int
    n2: int
    sn: int
    r_label: str
    r: float
    seed: int
    status: str
    iterations: int
    time_s: float
    error: str = ""


def r_choices(n1: int, n2: int) -> dict[str, float]:
    return {"1": 1.0, "sqrt": math.sqrt(n1 + n2)}


def bench_cell(n1, n2, sn, seeds, r_label="sqrt", tol=1e-5, max_iter=2000,
               monotone_only=False, threads=1) -> list[BenchRun]:
    """Solve ``len(seeds)`` generated instances for one table cell; failures are recorded, not raised."""
    r = r_choices(n1, n2)[r_label]
    runs = []
    for seed in seeds:
        try:
            slcp = gen_pseudo_slcp(GeneratorParams(n1, n2, sn, seed=seed, monotone_only=monotone_only))
            rep = pha_solve(slcp.to_problem(), PhaConfig(r=r, tol=tol, max_iter=max_iter,
                                                         record_history=False, threads=threads))
            runs.append(BenchRun(n1, n2, sn, r_label, r, seed, rep.status, rep.iterations, rep.wall_time))
        except Exception as exc:  # per-cell failures must not stop the sweep
            runs.append(BenchRun(n1, n2, sn, r_label, r, seed, "Error", 0, 0.0, repr(exc)))
    return runs


def summarize(runs: list[BenchRun]) -> dict:
    """Averages over converged runs (NaN when none converged)."""
    conv = [x for x in runs if x.status == CONVERGED]
    first = runs[0]
    return {
        "dim": f"[{first.n1},{first.n2}]",
        "sn": first.sn,
        "r": first.r,
        "avg_iter": statistics.fmean(x.iterations for x in conv) if conv else float("nan"),
        "avg_time_s": statistics.fmean(x.time_s for x in conv) if conv else float("nan"),
        "converged_frac": len(conv) / len(runs),
        "median_iter": statistics.median(x.iterations for x in runs),
    }


def bench_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(BENCH_HEADER)
    for row in rows:
        wr.writerow([row["dim"], row["sn"], f"{row['r']:.6g}", f"{row['avg_iter']:.1f}",
                     f"{row['avg_time_s']:.4f}", f"{row['converged_frac']:.2f}"])
    return buf.getvalue()


def _parse_dims(items: list[str]) -> list[tuple[int, int]]:
    out = []
    for s in items:
        try:
            a, b = s.split(",")
            out.append((int(a), int(b)))
        except ValueError:
            raise InputError(f"bad --dims entry {s!r}, expected N1,N2") from None
    return out


def cmd_bench(args) -> int:
    dims = _parse_dims(args.dims)
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = []
    for n1, n2 in dims:
        for sn in args.sn:
            for lab in args.r_choice:
                runs = bench_cell(n1, n2, sn, seeds, lab, args.tol, args.max_iter,
                                  args.monotone_only, args.threads)
                row = summarize(runs)
                rows.append(row)
                print(f"dim=[{n1},{n2}] sn={sn} r={row['r']:.4g} avg_iter={row['avg_iter']:.1f} "
                      f"conv={row['converged_frac']:.2f}", file=sys.stderr)
    _write(bench_csv(rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def solution_policy(slcp: TwoStageSlcp, sol: dict) -> np.ndarray:
    """Policy array from a report-style ``{"x1": [...], "x2": {"0": [...], ...}}``."""
    try:
        x1 = np.asarray(sol["x1"], dtype=float).reshape(slcp.n1)
        x2 = sol["x2"]
        rows = [np.asarray(x2[str(i)] if isinstance(x2, dict) else x2[i], dtype=float).reshape(slcp.n2)
                for i in range(slcp.n_scenarios)]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise InputError(f"malformed solution: {exc!r}") from None
    return np.hstack([np.tile(x1, (slcp.n_scenarios, 1)), np.stack(rows)])


def cmd_verify(args) -> int:
    slcp = load_instance(args.instance)
    x = solution_policy(slcp, _read_json(args.solution))
    err = slcp_stopping_error(slcp, x)
    _write(json.dumps({"err": err, "tol": args.tol, "ok": bool(err <= args.tol)}), args.out)
    return EXIT_OK if err <= args.tol else EXIT_MAXITER


# ---------------------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--r", type=float, default=1.0, help="proximal parameter")
    p.add_argument("--s", type=float, default=None, help="elicitation level (default r/2)")
    p.add_argument("--rho", type=float, default=1.618, help="dual relaxation")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="svipha", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run elicited PHA on an instance")
    p.add_argument("instance", help="instance JSON path or 'orange'")
    _solver_flags(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--history", metavar="CSV", help="also write the error history here")
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="random pseudomonotone two-stage SLCP")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--sn", type=int, required=True, help="number of scenarios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--monotone-only", action="store_true")
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("elicit", help="run elicitation criteria")
    p.add_argument("instance", help="instance JSON, {DF, P_M} fixture, or a textbook example name")
    p.add_argument("--criterion", choices=sorted(CRITERIA))
    p.add_argument("--e2", type=float, default=None)
    p.add_argument("--e3", type=float, default=None)
    p.add_argument("--grid", type=int, default=16, help="grid size for nonlinear maps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=["json"], default="json")
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_elicit)

    p = sub.add_parser("bench", help="reproduce the benchmark table structure")
    p.add_argument("--dims", nargs="+", default=["40,20"], help="N1,N2 pairs")
    p.add_argument("--sn", type=int, nargs="+", default=[50])
    p.add_argument("--seeds", type=int, default=10, help="instances per cell")
    p.add_argument("--r-choice", nargs="+", choices=["1", "sqrt"], default=["1", "sqrt"])
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--monotone-only", action="store_true")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="stopping error of a stored solution")
    p.add_argument("instance")
    p.add_argument("solution", help="report JSON with x1 and x2")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out", "-o", default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
