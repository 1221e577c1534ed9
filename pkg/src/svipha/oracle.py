"""Brute-force verifiers kept independent of the solver path."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .model import SviProblem, TwoStageSlcp

log = logging.getLogger(__name__)

MAX_ENUM_DIM = 14


def lcp_enumerate(M, q, tol: float = 1e-10, dedup: float = 1e-8) -> list[np.ndarray]:
    """All solutions of ``0 <= z perp M z + q >= 0`` by trying every support.

    Singular principal submatrices are skipped (logged), never perturbed.
    """
    M = np.asarray(M, dtype=float)
    q = np.asarray(q, dtype=float)
    n = q.size
    if n > MAX_ENUM_DIM:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUM_DIM}, got {n}")
    sols: list[np.ndarray] = []
    for pattern in itertools.product((False, True), repeat=n):
        B = np.flatnonzero(pattern)
        z = np.zeros(n)
        if B.size:
            MBB = M[np.ix_(B, B)]
            try:
                zB = np.linalg.solve(MBB, -q[B])
            except np.linalg.LinAlgError:
                log.debug("singular support %s skipped", B.tolist())
                continue
            if not np.all(np.isfinite(zB)) or np.linalg.cond(MBB) > 1e14:
                log.debug("ill-conditioned support %s skipped", B.tolist())
                continue
            z[B] = zB
        if np.any(z < -tol):
            continue
        if np.any(M @ z + q < -tol):
            continue
        z = np.maximum(z, 0.0)
        if not any(np.max(np.abs(z - s)) <= dedup for s in sols):
            sols.append(z)
    return sols


def aggregated_slcp_system(slcp: TwoStageSlcp):
    """Matrix and vector of the expectation-aggregated two-stage LCP.

    Unknowns: ``(x1, x2(xi^1), ..., x2(xi^J))``.
    """
    n1, n2, J = slcp.n1, slcp.n2, slcp.n_scenarios
    N = n1 + J * n2
    A = np.zeros((N, N))
    b = np.zeros(N)
    p = slcp.probabilities
    for i in range(J):
        M11, M12, M21, M22, q1, q2 = slcp.blocks(i)
        cols = slice(n1 + i * n2, n1 + (i + 1) * n2)
        A[:n1, :n1] += p[i] * M11
        A[:n1, cols] += p[i] * M12
        b[:n1] += p[i] * q1
        A[cols, :n1] = M21
        A[cols, cols] = M22
        b[cols] = q2
    return A, b


def extensive_slcp_oracle(slcp: TwoStageSlcp) -> list[tuple[np.ndarray, np.ndarray]]:
    """Every ``(x1, x2)`` solving the aggregated system; ``x2`` has shape ``(J, n2)``."""
    A, b = aggregated_slcp_system(slcp)
    if b.size > MAX_ENUM_DIM:
        raise ValueError(f"aggregated dimension {b.size} exceeds {MAX_ENUM_DIM}")
    out = []
    for z in lcp_enumerate(A, b):
        x1 = z[: slcp.n1]
        x2 = z[slcp.n1:].reshape(slcp.n_scenarios, slcp.n2)
        out.append((x1, x2))
    return out


def oracle_policy(slcp: TwoStageSlcp, x1, x2) -> np.ndarray:
    """Stack an oracle solution into a ``J x n`` policy array."""
    J = slcp.n_scenarios
    return np.hstack([np.tile(np.asarray(x1, dtype=float), (J, 1)), np.asarray(x2, dtype=float)])


def fd_jacobian(F, x, h: float = 1e-5) -> np.ndarray:
    """Central differences with step ``h (1 + |x_i|)`` per column."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        step = h * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        fp = np.asarray(F(x + e), dtype=float)
        fm = np.asarray(F(x - e), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError(f"non-finite evaluation while differencing column {j}")
        cols.append((fp - fm) / (2 * step))
    return np.column_stack(cols)


@dataclass
class ProbeReport:
    points: np.ndarray
    nonempty: bool
    diameter: float
    convex_ok: bool
    grid_size: int


def solution_set_probe(
    problem: SviProblem,
    grid_radius: float,
    grid_step: float,
    tol: float | None = None,
    center=None,
) -> ProbeReport:
    """Scan a grid over ``C`` intersected with ``N`` for approximate solutions (``n_bar <= 2``).

    A point ``x`` is kept when ``||x - Pi(x - P_N F(x))||_inf <= tol``;
    ``Pi`` projects onto the feasible box and then onto ``N``.  Midpoints of
    found pairs must also pass within ``2 tol``.
    """
    sp = problem.space
    if sp.n_bar > 2:
        raise ValueError("solution probe is limited to n_bar <= 2")
    if grid_step <= 0 or grid_radius < 0:
        raise ValueError("need grid_step > 0 and grid_radius >= 0")
    tol = grid_step if tol is None else tol
    n = sp.n
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    ticks = np.arange(-grid_radius, grid_radius + 0.5 * grid_step, grid_step)
    if ticks.size == 0:
        raise ValueError("empty grid")
    C = problem.sets[0]

    def residual(v):
        x = np.tile(v, (sp.n_scenarios, 1))
        F = np.array([problem.maps[i](x[i]) for i in range(sp.n_scenarios)])
        G = sp.project_n_values(F)
        y = np.array([problem.sets[i].project(x[i] - G[i]) for i in range(sp.n_scenarios)])
        y = sp.project_n_values(y)
        return np.max(np.abs(x - y))

    # nonanticipative points are constant across scenarios when n_bar <= 2
    found = []
    total = 0
    for offs in itertools.product(ticks, repeat=n):
        v = center + np.array(offs)
        if not all(s.contains(v) for s in problem.sets):
            continue
        total += 1
        if residual(v) <= tol:
            found.append(v)
    pts = np.array(found).reshape(-1, n)
    if pts.shape[0] == 0:
        return ProbeReport(pts, False, 0.0, True, total)
    diffs = pts[:, None, :] - pts[None, :, :]
    diam = float(np.max(np.linalg.norm(diffs, axis=-1)))
    convex_ok = True
    for a, b in itertools.combinations(range(pts.shape[0]), 2):
        if residual(0.5 * (pts[a] + pts[b])) > 2 * tol:
            convex_ok = False
            break
    del C
    return ProbeReport(pts, True, diam, convex_ok, total)
