"""Elicited progressive hedging for multistage SVIs.

One outer iteration:

1. solve every scenario subproblem ``-F(x) - w^k - r (x - x^k) in N_C(x)``
   (warm-started at the previous subproblem solutions),
2. ``x^{k+1} = P_N(xhat^k)``,
3. ``w^{k+1} = w^k + rho (r - s) (xhat^k - x^{k+1})``, re-projected onto M.

With ``rho = 1`` and ``s = 0`` this is classical progressive hedging.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import SviProblem, aggregated_stopping_error, slcp_stopping_error
from .scenario_space import Policy, ScenarioSpace
from .subproblem import NewtonConfig, SingularNewtonSystem, _Operators, solve_subproblems

CONVERGED = "Converged"
MAX_ITERS = "MaxIters"
INNER_FAILURE = "InnerFailure"


@dataclass
class PhaConfig:
    r: float = 1.0
    s: float | None = None  # defaults to r / 2
    rho: float = 1.618
    tol: float = 1e-5
    max_iter: int = 2000
    inner: NewtonConfig = field(default_factory=NewtonConfig)
    record_history: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.s is None:
            self.s = self.r / 2
        if not self.r > self.s >= 0:
            raise ValueError(f"need r > s >= 0, got r={self.r}, s={self.s}")
        if not 0 < self.rho < 2:
            raise ValueError("rho must lie in (0, 2)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.threads < 1:
            raise ValueError("max_iter and threads must be at least 1")


@dataclass
class SolveReport:
    status: str
    iterations: int
    final_error: float
    x_final: Policy
    w_final: Policy
    wall_time: float
    error_history: list[float] = field(default_factory=list)
    rs_norm_history: list[float] = field(default_factory=list)
    failed_scenario: int | None = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self, n1: int | None = None) -> dict:
        """Report JSON; ``x1`` is the first-stage block (size ``n1``)."""
        sp = self.x_final.space
        n1 = sp.stage_dims[0] if n1 is None else n1
        xv, wv = self.x_final.values, self.w_final.values
        return {
            "status": self.status,
            "iterations": self.iterations,
            "final_error": self.final_error,
            "wall_time_s": self.wall_time,
            "x1": xv[0, :n1].tolist(),
            "x2": {str(i): xv[i, n1:].tolist() for i in range(sp.n_scenarios)},
            "w": {str(i): wv[i].tolist() for i in range(sp.n_scenarios)},
            "error_history": list(self.error_history),
            "failed_scenario": self.failed_scenario,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw))

    def history_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["iteration", "err", "rs_norm"])
        for k, e in enumerate(self.error_history, start=1):
            rs = self.rs_norm_history[k - 1] if k - 1 < len(self.rs_norm_history) else ""
            wr.writerow([k, repr(e), repr(rs) if rs != "" else ""])
        return buf.getvalue()


def rs_norm(x: Policy, w: Policy, r: float, s: float) -> float:
    """``sqrt(||x||^2 + ||w||^2 / (r (r - s)))`` in the policy norm."""
    if not r > s:
        raise ValueError("rs-norm needs r > s")
    sp = x.space
    return math.sqrt(sp.inner_values(x.values, x.values) + sp.inner_values(w.values, w.values) / (r * (r - s)))


def stopping_error(problem: SviProblem, x) -> float:
    """Outer stopping error, evaluated at ``P_N(x)``."""
    v = x.values if isinstance(x, Policy) else np.asarray(x, dtype=float)
    if problem.slcp is not None:
        return slcp_stopping_error(problem.slcp, problem.space.project_n_values(v))
    return aggregated_stopping_error(problem, v)


def _chunks(J: int, threads: int):
    bounds = np.linspace(0, J, min(threads, J) + 1).astype(int)
    return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def pha_solve(
    problem: SviProblem,
    cfg: PhaConfig | None = None,
    x0: Policy | None = None,
    w0: Policy | None = None,
    callback: Callable[[int, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
) -> SolveReport:
    """Run the elicited PHA until the stopping error drops below ``cfg.tol``.

    ``callback(k, x, w, xhat)`` is invoked after every outer iteration with
    the new iterates (read-only arrays).
    """
    cfg = cfg or PhaConfig()
    sp: ScenarioSpace = problem.space
    J, n = sp.n_scenarios, sp.n
    x = np.zeros((J, n)) if x0 is None else sp.check_values(x0.values).copy()
    w = np.zeros((J, n)) if w0 is None else sp.check_values(w0.values).copy()
    if np.max(np.abs(x - sp.project_n_values(x)), initial=0.0) > 1e-12:
        raise ValueError("x0 is not nonanticipative")
    if np.max(np.abs(sp.project_n_values(w)), initial=0.0) > 1e-10:
        raise ValueError("w0 is not in the multiplier subspace")

    r, s, rho = cfg.r, cfg.s, cfg.rho
    lower = np.stack([c.lower for c in problem.sets])
    upper = np.stack([c.upper for c in problem.sets])
    ops = _Operators(problem.maps, w, x, r)
    chunks = _chunks(J, cfg.threads)
    pool = ThreadPoolExecutor(cfg.threads) if len(chunks) > 1 else None

    xhat = x.copy()
    errors: list[float] = []
    rs_hist: list[float] = []
    status = MAX_ITERS
    failed = None
    err = math.inf
    k = 0
    t0 = time.perf_counter()
    try:
        for k in range(1, cfg.max_iter + 1):
            ops.c = w - r * x

            def run(rows):
                return solve_subproblems(
                    None, None, None, None, r, xhat[rows], cfg.inner,
                    bounds=(lower[rows], upper[rows]), ops=ops, rows=rows,
                )

            try:
                if pool is None:
                    results = [run(chunks[0])]
                else:
                    results = list(pool.map(run, chunks))
            except SingularNewtonSystem as exc:
                status, failed = INNER_FAILURE, int(exc.index)
                break
            new_xhat = np.empty_like(xhat)
            bad = []
            for rows, res in zip(chunks, results):
                new_xhat[rows] = res.x
                bad.extend(rows[~res.converged].tolist())
            if bad:
                status, failed = INNER_FAILURE, bad[0]
                break
            xhat = new_xhat
            x_new = sp.project_n_values(xhat)
            w_new = sp.project_m_values(w + rho * (r - s) * (xhat - x_new))
            if cfg.record_history:
                dx = x_new - x
                dw = w_new - w
                rs_hist.append(math.sqrt(
                    sp.inner_values(dx, dx) + sp.inner_values(dw, dw) / (r * (r - s))))
            x, w = x_new, w_new
            err = stopping_error(problem, x)
            if cfg.record_history:
                errors.append(err)
            if callback is not None:
                callback(k, x, w, xhat)
            if err <= cfg.tol:
                status = CONVERGED
                break
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - t0
    if status == INNER_FAILURE:
        err = stopping_error(problem, x)
    return SolveReport(
        status=status,
        iterations=k,
        final_error=float(err),
        x_final=Policy(sp, x),
        w_final=Policy(sp, w),
        wall_time=wall,
        error_history=errors,
        rs_norm_history=rs_hist,
        failed_scenario=failed,
    )
