"""Per-scenario proximal subproblems solved by semismooth Newton.

Each subproblem asks for ``x`` in the box ``C`` with

    -G(x) in N_C(x),   G(x) = F(x) + w + r (x - x_anchor),

which is recast as ``Phi(x) = 0`` with the Fischer-Burmeister function
``phi(a, b) = sqrt(a^2 + b^2) - a - b`` (nested once for two-sided bounds).
Newton steps use an element of the B-subdifferential of ``Phi`` and an
Armijo backtracking search on ``0.5 ||Phi||^2``.

Many independent subproblems can be solved together by
:func:`solve_subproblems`; every system keeps its own step length and stops
on its own, so results do not depend on how scenarios are batched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import AffineMap, FeasibleSet, ScenarioMap

log = logging.getLogger(__name__)


class SingularNewtonSystem(RuntimeError):
    def __init__(self, index: int):
        super().__init__(f"Newton system singular for subproblem {index} even after regularization")
        self.index = index


@dataclass
class NewtonConfig:
    inner_tol: float = 1e-10
    max_newton_iters: int = 100
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    delta: float = 1e-12
    tikhonov: float = 1e-10

    def __post_init__(self):
        if min(self.inner_tol, self.max_newton_iters, self.armijo, self.min_step, self.delta) <= 0:
            raise ValueError("Newton parameters must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class SubproblemSpec:
    map: ScenarioMap
    set: FeasibleSet
    w: np.ndarray
    x_anchor: np.ndarray
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("proximal parameter r must be positive")
        self.w = np.asarray(self.w, dtype=float)
        self.x_anchor = np.asarray(self.x_anchor, dtype=float)
        if self.w.shape != (self.set.dim,) or self.x_anchor.shape != (self.set.dim,):
            raise ValueError("w and x_anchor must match the set dimension")


@dataclass
class SubproblemResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    nonunique_suspect: bool = False


@dataclass
class BatchResult:
    x: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    nonunique_suspect: np.ndarray = field(default=None)


# -- Fischer-Burmeister pieces ---------------------------------------------------

def _fb(a, b, da, db, delta):
    """FB value and partials; at the kink use the limiting direction ``(da, db)``."""
    rho = np.hypot(a, b)
    val = rho - a - b
    kink = rho <= delta
    ra = np.where(kink, 0.0, a)
    rb = np.where(kink, 0.0, b)
    if np.any(kink):
        dn = np.hypot(da, db)
        flat = dn <= delta
        ra = np.where(kink & ~flat, da, ra)
        rb = np.where(kink & ~flat, db, rb)
        ra = np.where(kink & flat, 1.0, ra)
        rb = np.where(kink & flat, 1.0, rb)
        rho = np.where(kink, np.hypot(ra, rb), rho)
    ga = ra / rho - 1.0
    gb = rb / rho - 1.0
    return val, ga, gb


class _Bounds:
    def __init__(self, lower, upper):
        self.lower = lower
        self.upper = upper
        lf = np.isfinite(lower)
        uf = np.isfinite(upper)
        self.lo_only = lf & ~uf
        self.up_only = ~lf & uf
        self.both = lf & uf
        self.free = ~lf & ~uf
        self.all_lower = bool(np.all(self.lo_only))


def _phi(X, G, JG, bounds: _Bounds, delta):
    """Residual ``Phi`` and the row scalings ``(Da, Db)`` with ``JPhi = diag(Da) + diag(Db) JG``."""
    dGz = JG.sum(axis=-1)  # JG @ ones: direction used at kinks
    lo, up = bounds.lower, bounds.upper
    if bounds.all_lower:
        val, ga, gb = _fb(X - lo, G, np.ones_like(X), dGz, delta)
        return val, ga, gb
    Phi = np.zeros_like(X)
    Da = np.zeros_like(X)
    Db = np.zeros_like(X)
    a = np.where(bounds.lo_only | bounds.both, X - np.where(np.isfinite(lo), lo, 0.0), 0.0)
    c = np.where(bounds.up_only | bounds.both, np.where(np.isfinite(up), up, 0.0) - X, 0.0)

    m = bounds.lo_only
    v, ga, gb = _fb(a, G, np.ones_like(X), dGz, delta)
    Phi = np.where(m, v, Phi)
    Da = np.where(m, ga, Da)
    Db = np.where(m, gb, Db)

    m = bounds.up_only
    v, ga, gb = _fb(c, -G, -np.ones_like(X), -dGz, delta)
    Phi = np.where(m, v, Phi)
    Da = np.where(m, -ga, Da)
    Db = np.where(m, -gb, Db)

    m = bounds.both
    if np.any(m):
        psi, ga2, gb2 = _fb(c, -G, -np.ones_like(X), -dGz, delta)
        dpsi_z = -ga2 - gb2 * dGz
        v, ga, gb = _fb(a, psi, np.ones_like(X), dpsi_z, delta)
        Phi = np.where(m, v, Phi)
        Da = np.where(m, ga - gb * ga2, Da)
        Db = np.where(m, -gb * gb2, Db)

    m = bounds.free
    Phi = np.where(m, G, Phi)
    Da = np.where(m, 0.0, Da)
    Db = np.where(m, 1.0, Db)
    return Phi, Da, Db


# -- batched evaluation of G ------------------------------------------------------

class _Operators:
    """``G_b(x) = F_b(x) + c_b + r x`` with ``c_b = w_b - r anchor_b`` for a batch."""

    def __init__(self, maps, W, anchors, r):
        self.r = float(r)
        self.c = np.asarray(W, dtype=float) - self.r * np.asarray(anchors, dtype=float)
        self.n = self.c.shape[1]
        self.affine = all(isinstance(m, AffineMap) for m in maps)
        if self.affine:
            self.M = np.stack([m.M for m in maps])
            self.q = np.stack([m.q for m in maps])
            self.JG = self.M + self.r * np.eye(self.n)
        else:
            self.maps = list(maps)

    def value(self, idx, X):
        if self.affine:
            return np.einsum("bij,bj->bi", self.M[idx], X) + self.q[idx] + self.c[idx] + self.r * X
        out = np.empty_like(X)
        for t, b in enumerate(idx):
            out[t] = self.maps[b](X[t])
        return out + self.c[idx] + self.r * X

    def jacobian(self, idx, X):
        if self.affine:
            return self.JG[idx]
        I = self.r * np.eye(self.n)
        return np.stack([self.maps[b].jacobian(X[t]) + I for t, b in enumerate(idx)])


def _solve_linear(A, rhs, tikhonov):
    """Batched dense LU; per-system Tikhonov fallback. Returns (d, ok, regularized)."""
    B, n = rhs.shape
    reg = np.zeros(B, dtype=bool)
    try:
        d = np.linalg.solve(A, rhs[..., None])[..., 0]
        ok = np.all(np.isfinite(d), axis=1)
        if np.all(ok):
            return d, ok, reg
    except np.linalg.LinAlgError:
        d = np.full_like(rhs, np.nan)
    ok = np.zeros(B, dtype=bool)
    I = np.eye(n)
    for b in range(B):
        for shift in (0.0, tikhonov):
            try:
                db = np.linalg.solve(A[b] + shift * I, rhs[b])
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(db)):
                d[b] = db
                ok[b] = True
                reg[b] = shift > 0
                break
    return d, ok, reg


def solve_subproblems(
    maps: Sequence[ScenarioMap],
    sets: Sequence[FeasibleSet],
    W: np.ndarray,
    anchors: np.ndarray,
    r: float,
    warm_start: np.ndarray,
    cfg: NewtonConfig | None = None,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
    ops: _Operators | None = None,
    rows: np.ndarray | None = None,
) -> BatchResult:
    """Solve ``len(maps)`` independent subproblems from the given warm starts.

    Raises :class:`SingularNewtonSystem` if a Newton system stays singular
    after Tikhonov regularization.
    """
    cfg = cfg or NewtonConfig()
    X = np.array(warm_start, dtype=float)
    B, n = X.shape
    if bounds is None:
        lower = np.stack([s.lower for s in sets])
        upper = np.stack([s.upper for s in sets])
    else:
        lower, upper = bounds
    if ops is None:
        ops = _Operators(maps, W, anchors, r)
    # rows maps local system indices onto the operator's global indices
    rows = np.arange(B) if rows is None else np.asarray(rows)

    iters = np.zeros(B, dtype=int)
    done = np.zeros(B, dtype=bool)
    stuck = np.zeros(B, dtype=bool)
    suspect = np.zeros(B, dtype=bool)
    res = np.full(B, np.inf)

    def residual(idx, Xs):
        G = ops.value(rows[idx], Xs)
        JG = ops.jacobian(rows[idx], Xs)
        bnd = _Bounds(lower[idx], upper[idx])
        Phi, Da, Db = _phi(Xs, G, JG, bnd, cfg.delta)
        return Phi, Da, Db, JG

    active = np.arange(B)
    Phi, Da, Db, JG = residual(active, X)
    for it in range(cfg.max_newton_iters + 1):
        r_inf = np.max(np.abs(Phi), axis=1, initial=0.0)
        res[active] = r_inf
        ok = r_inf <= cfg.inner_tol
        done[active[ok]] = True
        keep = ~ok
        if it == cfg.max_newton_iters or not np.any(keep):
            break
        active = active[keep]
        Phi, Da, Db, JG = Phi[keep], Da[keep], Db[keep], JG[keep]
        Xa = X[active]

        Jphi = Db[:, :, None] * JG
        Jphi[:, np.arange(n), np.arange(n)] += Da
        d, solved, regd = _solve_linear(Jphi, -Phi, cfg.tikhonov)
        if not np.all(solved):
            raise SingularNewtonSystem(int(active[np.argmin(solved)]))
        suspect[active[regd]] = True

        psi = 0.5 * np.sum(Phi * Phi, axis=1)
        grad = np.einsum("bij,bi->bj", Jphi, Phi)
        # Newton direction must be a reasonable descent direction
        slope = np.einsum("bj,bj->b", grad, d)
        bad = ~(slope < -1e-12 * np.linalg.norm(grad, axis=1) * np.linalg.norm(d, axis=1))
        if np.any(bad):
            d[bad] = -grad[bad]
            slope[bad] = -np.sum(grad[bad] ** 2, axis=1)
            suspect[active[bad]] = True

        t = np.ones(active.size)
        pending = np.ones(active.size, dtype=bool)
        newX = Xa.copy()
        newPhi, newDa, newDb, newJG = Phi.copy(), Da.copy(), Db.copy(), JG.copy()
        tried_grad = bad.copy()
        while np.any(pending):
            sel = np.flatnonzero(pending)
            trial = Xa[sel] + t[sel, None] * d[sel]
            P, A_, B_, J_ = residual(active[sel], trial)
            psi_t = 0.5 * np.sum(P * P, axis=1)
            acc = psi_t <= psi[sel] + cfg.armijo * t[sel] * slope[sel]
            acc |= np.max(np.abs(P), axis=1, initial=0.0) <= cfg.inner_tol
            s_acc = sel[acc]
            newX[s_acc], newPhi[s_acc], newDa[s_acc], newDb[s_acc], newJG[s_acc] = (
                trial[acc], P[acc], A_[acc], B_[acc], J_[acc])
            pending[s_acc] = False
            rej = sel[~acc]
            t[rej] *= cfg.backtrack
            small = rej[t[rej] < cfg.min_step]
            if small.size:
                retry = small[~tried_grad[small]]
                give_up = small[tried_grad[small]]
                if retry.size:
                    d[retry] = -grad[retry]
                    slope[retry] = -np.sum(grad[retry] ** 2, axis=1)
                    t[retry] = 1.0
                    tried_grad[retry] = True
                    suspect[active[retry]] = True
                if give_up.size:
                    stuck[active[give_up]] = True
                    pending[give_up] = False
        X[active] = newX
        iters[active] += 1
        still = ~stuck[active]
        active = active[still]
        Phi, Da, Db, JG = newPhi[still], newDa[still], newDb[still], newJG[still]
        if active.size == 0:
            break
        # residuals of stuck systems keep their last accepted value
    stuck_idx = np.flatnonzero(stuck)
    if stuck_idx.size:
        P, _, _, _ = residual(stuck_idx, X[stuck_idx])
        res[stuck_idx] = np.max(np.abs(P), axis=1, initial=0.0)
    return BatchResult(X, res, iters, done.copy(), suspect)


def solve_scenario_subproblem(
    spec: SubproblemSpec, warm_start, cfg: NewtonConfig | None = None
) -> SubproblemResult:
    """Solve one regularized scenario subproblem from ``warm_start``.

    The returned point has ``||Phi||_inf <= cfg.inner_tol`` when
    ``converged`` is true; otherwise it is the last accepted iterate.
    """
    warm = np.asarray(warm_start, dtype=float)
    if warm.shape != (spec.set.dim,) or not np.all(np.isfinite(warm)):
        raise ValueError("warm start must be a finite vector of the set dimension")
    out = solve_subproblems(
        [spec.map], [spec.set], spec.w[None], spec.x_anchor[None], spec.r, warm[None], cfg
    )
    return SubproblemResult(
        out.x[0], float(out.residual[0]), int(out.iterations[0]), bool(out.converged[0]),
        bool(out.nonunique_suspect[0]),
    )
