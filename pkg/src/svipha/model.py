"""SVI problem data: per-scenario maps, feasible sets, and solution residuals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .scenario_space import Policy, ScenarioSpace, nonanticipativity_defect

FD_STEP = 1e-5


class EvaluationError(ValueError):
    """A scenario map returned non-finite output."""

    def __init__(self, scenario: int, message: str):
        super().__init__(f"scenario {scenario}: {message}")
        self.scenario = scenario


def central_jacobian(fun: Callable, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for j in range(n):
        step = h * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        J[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * step)
    return J


@dataclass
class ScenarioMap:
    """``x -> F(x, xi)`` for one scenario, with optional analytic Jacobian."""

    fun: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fun(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        return central_jacobian(self, x)

    @property
    def is_affine(self) -> bool:
        return False


@dataclass
class AffineMap(ScenarioMap):
    """``F(x) = M x + q``."""

    fun: Callable | None = field(default=None, repr=False)
    M: np.ndarray = None
    q: np.ndarray = None

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        n = self.q.size
        if self.M.shape != (n, n):
            raise ValueError(f"M has shape {self.M.shape}, q has length {n}")

    def __call__(self, x) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=float) + self.q

    def jacobian(self, x=None) -> np.ndarray:
        return self.M

    @property
    def is_affine(self) -> bool:
        return True


def affine(M, q) -> AffineMap:
    return AffineMap(M=M, q=q)


@dataclass
class FeasibleSet:
    """Box ``[lower, upper]``; infinite bounds allowed, ``R^n_+`` is the default use."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be vectors of equal length")
        if np.any(self.lower > self.upper) or np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("empty box: lower > upper")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("empty box")

    @classmethod
    def orthant(cls, n: int) -> "FeasibleSet":
        return cls(np.zeros(n), np.full(n, np.inf))

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        return cls(lower, upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_orthant(self) -> bool:
        return bool(np.all(self.lower == 0) and np.all(self.upper == np.inf))

    def project(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass
class TwoStageSlcp:
    """Two-stage stochastic LCP: ``F(x, xi) = M(xi) x + q(xi)`` on ``R^n_+``.

    ``M`` has shape ``(J, n, n)``, ``q`` shape ``(J, n)``; the first ``n1``
    coordinates are the first-stage decision.
    """

    n1: int
    n2: int
    M: np.ndarray
    q: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        n = self.n1 + self.n2
        J = self.probabilities.size
        if self.n1 < 0 or self.n2 < 0 or n < 1:
            raise ValueError("block dimensions must be nonnegative with n1 + n2 >= 1")
        if self.M.shape != (J, n, n):
            raise ValueError(f"M must have shape ({J}, {n}, {n}), got {self.M.shape}")
        if self.q.shape != (J, n):
            raise ValueError(f"q must have shape ({J}, {n}), got {self.q.shape}")

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def n_scenarios(self) -> int:
        return self.probabilities.size

    def blocks(self, i: int):
        """``(M11, M12, M21, M22, q1, q2)`` of scenario ``i``."""
        a = self.n1
        M, q = self.M[i], self.q[i]
        return M[:a, :a], M[:a, a:], M[a:, :a], M[a:, a:], q[:a], q[a:]

    def space(self) -> ScenarioSpace:
        return ScenarioSpace.two_stage(self.probabilities, self.n1, self.n2)

    def to_problem(self) -> "SviProblem":
        J = self.n_scenarios
        maps = [AffineMap(M=self.M[i], q=self.q[i]) for i in range(J)]
        sets = [FeasibleSet.orthant(self.n) for _ in range(J)]
        return SviProblem(self.space(), maps, sets, slcp=self)

    # -- JSON instance format -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n1": int(self.n1),
            "n2": int(self.n2),
            "scenarios": [
                {"p": float(p), "M": self.M[i].tolist(), "q": self.q[i].tolist()}
                for i, p in enumerate(self.probabilities)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TwoStageSlcp":
        try:
            n1 = int(data["n1"])
            n2 = int(data["n2"])
            scen = data["scenarios"]
            p = [float(s["p"]) for s in scen]
            M = [s["M"] for s in scen]
            q = [s["q"] for s in scen]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance: {exc}") from exc
        if not scen:
            raise ValueError("instance has no scenarios")
        return cls(n1, n2, np.array(M, dtype=float), np.array(q, dtype=float), np.array(p))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "TwoStageSlcp":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SviProblem:
    """The triple (scenario space, per-scenario maps, per-scenario sets)."""

    space: ScenarioSpace
    maps: Sequence[ScenarioMap]
    sets: Sequence[FeasibleSet]
    slcp: TwoStageSlcp | None = None

    def __post_init__(self):
        J, n = self.space.n_scenarios, self.space.n
        if len(self.maps) != J or len(self.sets) != J:
            raise ValueError("need exactly one map and one set per scenario")
        for i, s in enumerate(self.sets):
            if s.dim != n:
                raise ValueError(f"scenario {i}: set dimension {s.dim} != {n}")
        for i, m in enumerate(self.maps):
            if isinstance(m, AffineMap) and m.q.size != n:
                raise ValueError(f"scenario {i}: map dimension {m.q.size} != {n}")

    @property
    def is_affine(self) -> bool:
        return all(m.is_affine for m in self.maps)


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, Policy) else np.asarray(x, dtype=float)


def eval_values(problem: SviProblem, values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values, dtype=float)
    for i, F in enumerate(problem.maps):
        fi = F(values[i])
        if fi.shape != (problem.space.n,) or not np.all(np.isfinite(fi)):
            raise EvaluationError(i, "map produced non-finite or mis-shaped output")
        out[i] = fi
    return out


def eval_F(problem: SviProblem, x: Policy) -> Policy:
    """Apply ``F(., xi)`` scenario by scenario."""
    return Policy(problem.space, eval_values(problem, problem.space.check_values(_values(x))))


def natural_residuals(problem: SviProblem, values: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Per-scenario ``||x - Pi_C(x - G)||_inf``."""
    res = np.empty(values.shape[0])
    for i, C in enumerate(problem.sets):
        res[i] = np.max(np.abs(values[i] - C.project(values[i] - G[i])), initial=0.0)
    return res


def extensive_residual(problem: SviProblem, x: Policy, w: Policy) -> float:
    """Natural-map residual of the extensive form plus N/M membership defects."""
    sp = problem.space
    xv = sp.check_values(_values(x))
    wv = sp.check_values(_values(w))
    G = eval_values(problem, xv) + wv
    nat = float(np.max(natural_residuals(problem, xv, G)))
    n_defect = nonanticipativity_defect(xv, sp)
    m_defect = float(np.max(np.abs(sp.project_n_values(wv)), initial=0.0))
    return nat + n_defect + m_defect


def multiplier_from_solution(problem: SviProblem, x: Policy) -> Policy:
    """``w = -P_M F(x)``: the multiplier making ``F + w`` nonanticipative."""
    sp = problem.space
    F = eval_values(problem, sp.check_values(_values(x)))
    return Policy(sp, -sp.project_m_values(F))


def slcp_stopping_error(slcp: TwoStageSlcp, x) -> float:
    """Normalized first- and second-stage projected residuals, ``max(err1, err2)``.

    ``x`` is projected onto the nonanticipative subspace first, so the
    first-stage decision is the probability-weighted mean of the rows.
    """
    v = _values(x)
    J, n1 = slcp.n_scenarios, slcp.n1
    if v.shape != (J, slcp.n):
        raise ValueError(f"policy shape {v.shape} does not match ({J}, {slcp.n})")
    p = slcp.probabilities
    x1 = p @ v[:, :n1]
    x2 = v[:, n1:]
    # E[M11] x1 + E[M12 x2] + E[q1]
    g1 = np.einsum("i,ijk,k->j", p, slcp.M[:, :n1, :n1], x1)
    g1 += np.einsum("i,ijk,ik->j", p, slcp.M[:, :n1, n1:], x2)
    g1 += p @ slcp.q[:, :n1]
    err1 = np.linalg.norm(x1 - np.maximum(x1 - g1, 0.0)) / (1.0 + np.linalg.norm(x1))
    if slcp.n2 == 0:
        return float(err1)
    g2 = np.einsum("ijk,k->ij", slcp.M[:, n1:, :n1], x1)
    g2 += np.einsum("ijk,ik->ij", slcp.M[:, n1:, n1:], x2)
    g2 += slcp.q[:, n1:]
    r2 = np.linalg.norm(x2 - np.maximum(x2 - g2, 0.0), axis=1)
    err2 = np.max(r2 / (1.0 + np.linalg.norm(x2, axis=1)))
    return float(max(err1, err2))


def aggregated_stopping_error(problem: SviProblem, x) -> float:
    """Stagewise normalized natural residual of ``P_N F`` at ``P_N x``.

    For two-stage SLCPs this coincides with :func:`slcp_stopping_error`.
    """
    sp = problem.space
    xv = sp.project_n_values(sp.check_values(_values(x)))
    G = sp.project_n_values(eval_values(problem, xv))
    worst = 0.0
    for i, C in enumerate(problem.sets):
        for k in range(sp.n_stages):
            sl = sp.stage_slice(k)
            if sl.start == sl.stop:
                continue
            xk = xv[i, sl]
            proj = np.clip(xk - G[i, sl], C.lower[sl], C.upper[sl])
            worst = max(worst, np.linalg.norm(xk - proj) / (1.0 + np.linalg.norm(xk)))
    return float(worst)
