"""Certificates that the monotonicity of ``F + N_C`` is elicited at a level ``s``.

Every checker works on the isomorphic Euclidean picture: the Jacobian
``DF^`` of the scaled map on ``R^{n_bar}`` and the orthogonal projector
``P = P_phi(M)``.  Being elicited at level ``s`` means, for differentiable
maps, that ``sym(DF^(x)) + s P`` is positive semidefinite on the domain.

For affine maps ``DF^`` is constant and the certificates are exact.  For
nonlinear maps the suprema are taken over a finite :class:`EvalGrid` and the
report is flagged ``grid_certified``.

Criteria
--------
T5    ``alpha, beta, gamma`` split over ``N`` and ``M``; strict bound.
T6    symmetric ``DF^`` commuting with ``P``; bound ``max(0, -min eig)``.
C6-1  trace form of commutation; bound is the spectral radius.
T7    minimum eigenvalue of ``DF^ + e2 P`` is repeated.
C7-1  ``DF^ + e2 P`` splits into pairs of identical blocks.
T8    ``DF^ + e3 P`` strictly diagonally dominant with positive diagonal.
C8-1  closed-form ``e3_hat`` from the rows where ``P`` is supported; strict.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .instances import make_rng
from .model import SviProblem
from .scenario_space import from_iso, iso_projection_matrix

SYM_TOL = 1e-8
COMM_TOL = 1e-8
NEG_TOL = 1e-10
BLOCK_TOL = 1e-10
ZERO_TOL = 1e-12

STRICT = {"T5": True, "T6": False, "C6-1": False, "T7": False, "C7-1": False, "T8": False, "C8-1": True}


@dataclass
class ElicitationReport:
    """Outcome of one criterion.

    Attributes
    ----------
    criterion : str
        One of ``T5, T6, C6-1, T7, C7-1, T8, C8-1``.
    applicable : bool
        Whether the hypotheses held on every evaluation point.
    level_bound : float or None
        Certified bound ``b`` (``None`` when not applicable).
    strict : bool
        ``True`` when the criterion certifies ``s > b``, ``False`` for ``s >= b``.
    certificate : dict
        Criterion-specific numbers (eigenvalues, defects, margins).
    grid_certified : bool
        ``True`` when suprema were only evaluated on a sample grid.
    reason : str
        Why the criterion did not apply.
    """

    criterion: str
    applicable: bool
    level_bound: float | None
    strict: bool
    certificate: dict = field(default_factory=dict)
    grid_certified: bool = False
    reason: str = ""

    def usable_level(self, eps: float = 1e-2) -> float | None:
        """A level ``s`` that is safely inside the certified range."""
        if not self.applicable:
            return None
        return self.level_bound + eps

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "applicable": self.applicable,
            "level_bound": self.level_bound if self.applicable else "not applicable",
            "strictness": "s > bound" if self.strict else "s >= bound",
            "grid_certified": self.grid_certified,
            "reason": self.reason,
            "certificate": _jsonable(self.certificate),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _fail(criterion: str, reason: str, grid_certified: bool, **cert) -> ElicitationReport:
    return ElicitationReport(criterion, False, None, STRICT[criterion], cert, grid_certified, reason)


def _ok(criterion: str, bound: float, grid_certified: bool, **cert) -> ElicitationReport:
    if not np.isfinite(bound):
        return _fail(criterion, "bound is not finite", grid_certified, **cert)
    return ElicitationReport(criterion, True, float(bound), STRICT[criterion], cert, grid_certified)


# ---------------------------------------------------------------------------
# evaluation data


@dataclass
class EvalGrid:
    """Feasible policies (``K x J x n``) at which Jacobians are evaluated."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 3 or self.points.shape[0] == 0:
            raise ValueError("grid needs shape (K, J, n) with K >= 1")

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def single(cls, problem: SviProblem, x=None) -> "EvalGrid":
        sp = problem.space
        if x is None:
            lo = np.stack([c.lower for c in problem.sets])
            hi = np.stack([c.upper for c in problem.sets])
            x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        return cls(np.asarray(x, dtype=float).reshape(1, sp.n_scenarios, sp.n))

    @classmethod
    def latin_hypercube(
        cls,
        problem: SviProblem,
        k: int = 16,
        seed: int = 0,
        radius: float = 10.0,
        nonanticipative: bool = False,
    ) -> "EvalGrid":
        """Latin-hypercube sample of ``C``; unbounded sides are cut at ``radius``.

        With ``nonanticipative=True`` the samples are projected onto ``N`` and
        infeasible ones are dropped.
        """
        sp = problem.space
        lo = np.stack([c.lower for c in problem.sets]).reshape(-1)
        hi = np.stack([c.upper for c in problem.sets]).reshape(-1)
        lo_f = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi - radius, -radius))
        hi_f = np.where(np.isfinite(hi), hi, lo_f + radius)
        sampler = qmc.LatinHypercube(d=lo.size, seed=make_rng(seed))
        pts = qmc.scale(sampler.random(k), lo_f, np.maximum(hi_f, lo_f + 1e-300)) if k else np.zeros((0, lo.size))
        pts = pts.reshape(k, sp.n_scenarios, sp.n)
        if nonanticipative:
            pts = np.stack([sp.project_n_values(p) for p in pts])
            keep = [all(problem.sets[i].contains(p[i], 1e-12) for i in range(sp.n_scenarios)) for p in pts]
            pts = pts[np.array(keep, dtype=bool)]
        return cls(pts)


def iso_jacobian(problem: SviProblem, x_iso) -> np.ndarray:
    """Jacobian of ``F^(v) = phi(F(phi^{-1} v))``: block-diagonal, block ``i`` is ``DF_i`` at the de-scaled point."""
    sp = problem.space
    x = from_iso(sp, x_iso).values
    n = sp.n
    out = np.zeros((sp.n_bar, sp.n_bar))
    for i, m in enumerate(problem.maps):
        out[i * n:(i + 1) * n, i * n:(i + 1) * n] = m.jacobian(x[i])
    return out


@dataclass
class ElicitationData:
    """Jacobians ``DF^`` at the evaluation points together with ``P_phi(M)``."""

    P_M: np.ndarray
    jacobians: list
    grid_certified: bool = False

    def __post_init__(self):
        self.P_M = np.asarray(self.P_M, dtype=float)
        m = self.P_M.shape[0]
        if self.P_M.shape != (m, m):
            raise ValueError("P_M must be square")
        if np.max(np.abs(self.P_M - self.P_M.T), initial=0.0) > 1e-10:
            raise ValueError("P_M must be symmetric")
        if np.max(np.abs(self.P_M @ self.P_M - self.P_M), initial=0.0) > 1e-8:
            raise ValueError("P_M must be idempotent")
        self.jacobians = [np.asarray(D, dtype=float) for D in self.jacobians]
        if not self.jacobians:
            raise ValueError("need at least one evaluation point")
        for D in self.jacobians:
            if D.shape != (m, m) or not np.all(np.isfinite(D)):
                raise ValueError("Jacobian shape mismatch or non-finite entries")

    @property
    def dim(self) -> int:
        return self.P_M.shape[0]

    @property
    def P_N(self) -> np.ndarray:
        return np.eye(self.dim) - self.P_M

    @classmethod
    def from_matrices(cls, DF, P_M, grid_certified: bool = False) -> "ElicitationData":
        DF = np.asarray(DF, dtype=float)
        jac = [DF] if DF.ndim == 2 else list(DF)
        return cls(P_M, jac, grid_certified)

    @classmethod
    def from_problem(cls, problem: SviProblem, grid: EvalGrid | None = None) -> "ElicitationData":
        P = iso_projection_matrix(problem.space, "M")
        sp = np.sqrt(problem.space.probabilities)
        if problem.is_affine and grid is None:
            grid = EvalGrid.single(problem)
        elif grid is None:
            grid = EvalGrid.latin_hypercube(problem)
        jac = [iso_jacobian(problem, (pt * sp[:, None]).reshape(-1)) for pt in grid.points]
        return cls(P, jac, grid_certified=not problem.is_affine)

    @classmethod
    def from_dict(cls, data: dict) -> "ElicitationData":
        """``{"DF": matrix or list of matrices, "P_M": matrix}``."""
        try:
            return cls.from_matrices(data["DF"], data["P_M"], bool(data.get("grid_certified", False)))
        except KeyError as exc:
            raise ValueError(f"missing key {exc}") from None


def _data(target, grid=None) -> ElicitationData:
    if isinstance(target, ElicitationData):
        return target
    if isinstance(target, SviProblem):
        return ElicitationData.from_problem(target, grid)
    raise TypeError("expected an SviProblem or ElicitationData")


def _sym(A):
    return 0.5 * (A + A.T)


def _spectral_norm(A) -> float:
    """Largest singular value via the Gram matrix."""
    ev = np.linalg.eigvalsh(A.T @ A)
    return float(np.sqrt(max(ev[-1], 0.0)))


def _range_basis(P, tol=1e-8):
    lam, U = np.linalg.eigh(_sym(P))
    return U[:, lam > 0.5], U[:, lam <= 0.5], lam


def _asym(D) -> float:
    return float(np.max(np.abs(D - D.T), initial=0.0))


def _neg_count(D) -> int:
    lam = np.linalg.eigvalsh(_sym(D))
    scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    return int(np.sum(lam < -NEG_TOL * scale))


def _pseudomonotone_gate(d: ElicitationData, name: str):
    """Symmetric Jacobians of a pseudomonotone map have at most one negative eigenvalue."""
    for k, D in enumerate(d.jacobians):
        a = _asym(D)
        if a > SYM_TOL:
            return _fail(name, f"Jacobian not symmetric at point {k}", d.grid_certified, symmetry_defect=a)
        c = _neg_count(D)
        if c > 1:
            return _fail(
                name, f"{c} negative eigenvalues at point {k}; map cannot be pseudomonotone",
                d.grid_certified, negative_eigenvalues=c,
            )
    return None


# ---------------------------------------------------------------------------
# criteria


def check_theorem5(target, grid: EvalGrid | None = None) -> ElicitationReport:
    """``e0 = sup beta^2 / alpha + gamma``; elicited for ``s > e0``."""
    d = _data(target, grid)
    P, PN = d.P_M, d.P_N
    BN, _, _ = _range_basis(PN)
    alphas, betas, gammas = [], [], []
    for k, D in enumerate(d.jacobians):
        H = _sym(D)
        if BN.shape[1]:
            alpha = float(np.linalg.eigvalsh(BN.T @ H @ BN)[0])
        else:
            alpha = np.inf
        beta = _spectral_norm(PN @ H @ P)
        gamma = _spectral_norm(P @ D @ P)
        alphas.append(alpha)
        betas.append(beta)
        gammas.append(gamma)
        if not alpha > 0:
            return _fail("T5", f"alpha <= 0 at point {k}", d.grid_certified,
                         alpha=alpha, beta=beta, gamma=gamma)
    e0 = max((b * b / a if np.isfinite(a) else 0.0) + g for a, b, g in zip(alphas, betas, gammas))
    return _ok("T5", e0, d.grid_certified, alpha=alphas, beta=betas, gamma=gammas, e0=e0)


def commutation_defect(D, P) -> float:
    return float(np.max(np.abs(D @ P - P @ D), initial=0.0))


def check_theorem6(target, grid: EvalGrid | None = None) -> ElicitationReport:
    """Symmetric, commuting ``DF^``; negative directions must lie in ``range(P)``.

    Condition (iii) is checked through the eigenspaces of ``P``: commuting
    means ``DF^`` has no cross terms between ``range(P)`` and ``null(P)``,
    and then no negative eigenvalue of ``DF^`` may live on ``null(P)``.
    """
    d = _data(target, grid)
    P = d.P_M
    B1, B0, _ = _range_basis(P)
    mins, sym_def, comm_def, null_min = [], [], [], []
    for k, D in enumerate(d.jacobians):
        a, c = _asym(D), commutation_defect(D, P)
        sym_def.append(a)
        comm_def.append(c)
        if a > SYM_TOL:
            return _fail("T6", f"Jacobian not symmetric at point {k}", d.grid_certified,
                         symmetry_defect=sym_def, commutation_defect=comm_def)
        if c > COMM_TOL:
            return _fail("T6", f"Jacobian does not commute with P_M at point {k}", d.grid_certified,
                         symmetry_defect=sym_def, commutation_defect=comm_def)
        lam = np.linalg.eigvalsh(_sym(D))
        mins.append(float(lam[0]))
        if B0.shape[1]:
            nm = float(np.linalg.eigvalsh(B0.T @ _sym(D) @ B0)[0])
            null_min.append(nm)
            if nm < -NEG_TOL * max(1.0, abs(lam).max()):
                return _fail("T6", f"negative eigenvalue outside range(P_M) at point {k}", d.grid_certified,
                             symmetry_defect=sym_def, commutation_defect=comm_def, null_space_min=null_min)
    e1 = min(mins)
    return _ok("T6", max(0.0, -e1), d.grid_certified, e1=e1, min_eigenvalues=mins,
               eigenvalues=[np.linalg.eigvalsh(_sym(D)).tolist() for D in d.jacobians],
               symmetry_defect=sym_def, commutation_defect=comm_def)


def check_cor6_1(target, grid: EvalGrid | None = None) -> ElicitationReport:
    """Trace identity plus a non-PSD ``DF^ P``; bound is the spectral radius."""
    d = _data(target, grid)
    gate = _pseudomonotone_gate(d, "C6-1")
    if gate is not None:
        return gate
    P = d.P_M
    radii, trace_def = [], []
    for k, D in enumerate(d.jacobians):
        DP = D @ P
        lhs = float(np.trace(DP @ DP))
        rhs = float(np.trace(D @ D @ P))
        t = abs(lhs - rhs)
        trace_def.append(t)
        if t > 1e-8 * max(1.0, abs(lhs), abs(rhs)):
            return _fail("C6-1", f"trace identity fails at point {k}", d.grid_certified, trace_defect=trace_def)
        ev = np.linalg.eigvals(DP)
        lam_min = float(np.min(ev.real))
        if not lam_min < -NEG_TOL:
            return _fail("C6-1", f"DF P is positive semidefinite at point {k}", d.grid_certified,
                         trace_defect=trace_def, min_eig_DFP=lam_min)
        radii.append(float(np.max(np.abs(np.linalg.eigvals(D)))))
    return _ok("C6-1", max(radii), d.grid_certified, spectral_radius=radii, trace_defect=trace_def)


def _min_multiplicity(A) -> tuple[float, int, np.ndarray]:
    lam = np.linalg.eigvalsh(_sym(A))
    lo = lam[0]
    mult = int(np.sum(lam <= lo + 1e-8 * (1.0 + abs(lo))))
    return float(lo), mult, lam


def check_theorem7(target, e2: float, grid: EvalGrid | None = None) -> ElicitationReport:
    """Repeated minimum eigenvalue of ``DF^ + e2 P`` at every point certifies ``s >= e2``."""
    if not e2 > 0:
        raise ValueError("e2 must be positive")
    d = _data(target, grid)
    gate = _pseudomonotone_gate(d, "T7")
    if gate is not None:
        return gate
    mults, mins, spectra = [], [], []
    for k, D in enumerate(d.jacobians):
        lo, m, lam = _min_multiplicity(D + e2 * d.P_M)
        mults.append(m)
        mins.append(lo)
        spectra.append(lam.tolist())
        if m < 2:
            return _fail("T7", f"minimum eigenvalue is simple at point {k}", d.grid_certified,
                         multiplicity=mults, min_eigenvalue=mins, spectrum=spectra)
    return _ok("T7", e2, d.grid_certified, multiplicity=mults, min_eigenvalue=mins, spectrum=spectra)


def block_components(A, tol: float = BLOCK_TOL) -> list[np.ndarray]:
    """Index sets of the irreducible diagonal blocks of ``A`` (up to permutation)."""
    m = A.shape[0]
    adj = (np.abs(A) > tol) | (np.abs(A.T) > tol)
    seen = np.zeros(m, dtype=bool)
    comps = []
    for s in range(m):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.flatnonzero(adj[i] & ~seen):
                seen[j] = True
                stack.append(j)
        comps.append(np.array(sorted(comp)))
    return comps


def pair_identical_blocks(A, comps, tol: float = BLOCK_TOL):
    """Pair blocks with identical submatrices; ``None`` if some block stays unmatched."""
    classes: dict[int, list[int]] = defaultdict(list)
    reps: list[np.ndarray] = []
    rep_of: list[int] = []
    for b, idx in enumerate(comps):
        sub = A[np.ix_(idx, idx)]
        for r, rsub in enumerate(reps):
            if rsub.shape == sub.shape and np.max(np.abs(rsub - sub)) <= tol:
                classes[r].append(b)
                break
        else:
            reps.append(sub)
            rep_of.append(b)
            classes[len(reps) - 1].append(b)
    pairs = []
    for members in classes.values():
        if len(members) % 2:
            return None
        pairs.extend(zip(members[0::2], members[1::2]))
    return sorted(pairs)


def check_cor7_1(target, e2_hat: float, grid: EvalGrid | None = None) -> ElicitationReport:
    """``DF^ + e2_hat P`` is a direct sum of pairs of identical blocks at every point."""
    if not e2_hat > 0:
        raise ValueError("e2_hat must be positive")
    d = _data(target, grid)
    gate = _pseudomonotone_gate(d, "C7-1")
    if gate is not None:
        return gate
    counts, pairings = [], []
    for k, D in enumerate(d.jacobians):
        A = D + e2_hat * d.P_M
        comps = block_components(A)
        counts.append(len(comps))
        if len(comps) % 2:
            return _fail("C7-1", f"odd number of blocks ({len(comps)}) at point {k}", d.grid_certified,
                         block_counts=counts)
        pairs = pair_identical_blocks(A, comps)
        if pairs is None:
            return _fail("C7-1", f"blocks cannot be paired at point {k}", d.grid_certified, block_counts=counts)
        pairings.append([[int(a), int(b)] for a, b in pairs])
    blocks = [c.tolist() for c in block_components(d.jacobians[0] + e2_hat * d.P_M)]
    return _ok("C7-1", e2_hat, d.grid_certified, block_counts=counts, pairing=pairings, blocks=blocks)


def dominance_margins(A) -> np.ndarray:
    off = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    return np.diag(A) - off


def check_theorem8(target, e3: float, grid: EvalGrid | None = None) -> ElicitationReport:
    """``DF^ + e3 P`` with positive diagonal and strict row dominance certifies ``s >= e3``."""
    if not e3 > 0:
        raise ValueError("e3 must be positive")
    d = _data(target, grid)
    margins = []
    for k, D in enumerate(d.jacobians):
        a = _asym(D)
        if a > SYM_TOL:
            return _fail("T8", f"Jacobian not symmetric at point {k}", d.grid_certified, symmetry_defect=a)
        A = D + e3 * d.P_M
        mg = dominance_margins(A)
        margins.append(mg.tolist())
        bad = np.flatnonzero((np.diag(A) <= 0) | (mg <= 0))
        if bad.size:
            return _fail("T8", f"row {int(bad[0])} not strictly dominant at point {k}", d.grid_certified,
                         margins=margins, failing_row=int(bad[0]))
    return _ok("T8", e3, d.grid_certified, margins=margins, min_margin=min(min(m) for m in margins))


def compute_e3_hat(target, grid: EvalGrid | None = None) -> ElicitationReport:
    """Closed-form dominance level restricted to ``I = {i : P_ii > 0}``; elicited for ``s > e3_hat``.

    The reported bound is clamped at zero (levels are positive); the raw
    value is kept in the certificate.
    """
    d = _data(target, grid)
    P = d.P_M
    I = np.flatnonzero(np.diag(P) > ZERO_TOL)
    out = np.setdiff1d(np.arange(d.dim), I)
    if out.size and np.max(np.abs(P[out]), initial=0.0) > ZERO_TOL:
        r = int(out[np.argmax(np.max(np.abs(P[out]), axis=1))])
        return _fail("C8-1", f"row {r} of P_M is nonzero outside I", d.grid_certified, failing_row=r)
    PI = P[np.ix_(I, I)]
    p_margin = dominance_margins(PI)
    if np.any(p_margin <= 0):
        r = int(I[np.flatnonzero(p_margin <= 0)[0]])
        return _fail("C8-1", f"P_M^I not strictly dominant at row {r}", d.grid_certified,
                     failing_row=r, P_margins=p_margin.tolist())
    terms1, terms2 = [], []
    for k, D in enumerate(d.jacobians):
        a = _asym(D)
        if a > SYM_TOL:
            return _fail("C8-1", f"Jacobian not symmetric at point {k}", d.grid_certified, symmetry_defect=a)
        if out.size and np.max(np.abs(D[out]), initial=0.0) > ZERO_TOL:
            r = int(out[np.argmax(np.max(np.abs(D[out]), axis=1))])
            return _fail("C8-1", f"row {r} of DF is nonzero outside I at point {k}", d.grid_certified,
                         failing_row=r)
        DI = D[np.ix_(I, I)]
        off = np.sum(np.abs(DI), axis=1) - np.abs(np.diag(DI))
        terms1.append(((off - np.diag(DI)) / p_margin).tolist())
        terms2.append((-np.diag(DI)).tolist())
    if I.size == 0:
        raw = 0.0
    else:
        raw = float(max(np.max(terms1), np.max(terms2)))
    return _ok("C8-1", max(0.0, raw), d.grid_certified, index_set=I.tolist(), e3_hat_raw=raw,
               dominance_terms=terms1, diagonal_terms=terms2, P_margins=p_margin.tolist())


def elicit_all(target, grid: EvalGrid | None = None, e2: float | None = None,
               e3: float | None = None) -> list[ElicitationReport]:
    """Run every criterion; parameterized ones reuse the best bound found so far when no level is given."""
    d = _data(target, grid)
    reports = [check_theorem5(d), check_theorem6(d), check_cor6_1(d), compute_e3_hat(d)]
    found = [r.level_bound for r in reports if r.applicable and r.level_bound > 0]
    guess = min(found) if found else 1.0
    reports.insert(3, check_theorem7(d, e2 if e2 is not None else guess))
    reports.insert(4, check_cor7_1(d, e2 if e2 is not None else guess))
    reports.insert(5, check_theorem8(d, e3 if e3 is not None else guess + 1.0))
    return reports


def certified_min_eigenvalue(target, level: float, grid: EvalGrid | None = None) -> float:
    """``min_x lambda_min(sym(DF^(x)) + level P)``; nonnegative means monotone at ``level``."""
    d = _data(target, grid)
    return float(min(np.linalg.eigvalsh(_sym(D) + level * d.P_M)[0] for D in d.jacobians))


# ---------------------------------------------------------------------------
# pseudomonotonicity falsifiers


@dataclass
class Violation:
    kind: str  # "pair", "jacobian" or "eigen"
    scenario: int
    x: np.ndarray
    y: np.ndarray | None
    value: float


def check_pair(F, x, y, tol: float = NEG_TOL) -> float | None:
    """Return ``<F(y), y - x>`` if the pair violates pseudomonotonicity, else ``None``."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if F(x) @ d >= 0:
        v = float(F(y) @ d)
        if v < -tol:
            return v
    return None


def check_direction(F, DF, x, u, tol: float = NEG_TOL) -> float | None:
    """Project ``u`` orthogonally to ``F(x)`` and return ``<u, DF u>`` if it is negative."""
    f = np.asarray(F(x), dtype=float)
    nf = f @ f
    if nf == 0:
        return None
    u = np.asarray(u, dtype=float)
    u = u - (u @ f) / nf * f
    v = float(u @ DF(x) @ u)
    return v if v < -tol else None


def _sample_box(rng, lower, upper, scale, size):
    lo = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper - scale, -scale))
    hi = np.where(np.isfinite(upper), upper, lo + scale)
    return lo + (hi - lo) * rng.random((size, lower.size))


def falsify_pseudomonotone(
    problem: SviProblem,
    sample_count: int = 10_000,
    seed: int = 0,
    scale: float = 10.0,
    max_witnesses: int = 10,
) -> list[Violation]:
    """Sampling search for evidence that some scenario map is not pseudomonotone on its set.

    Finding nothing proves nothing.  Unbounded sides of ``C`` are sampled up
    to ``scale``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = make_rng(seed)
    found: list[Violation] = []
    for i, (m, C) in enumerate(zip(problem.maps, problem.sets)):
        X = _sample_box(rng, C.lower, C.upper, scale, sample_count)
        Y = _sample_box(rng, C.lower, C.upper, scale, sample_count)
        U = rng.standard_normal((sample_count, C.dim))
        if m.is_affine:
            M, q = m.M, m.q
            FX, FY = X @ M.T + q, Y @ M.T + q
            D = Y - X
            a = np.einsum("ij,ij->i", FX, D)
            b = np.einsum("ij,ij->i", FY, D)
            for j in np.flatnonzero((a >= 0) & (b < -NEG_TOL))[:max_witnesses]:
                found.append(Violation("pair", i, X[j], Y[j], float(b[j])))
            nf = np.einsum("ij,ij->i", FX, FX)
            ok = nf > 0
            coef = np.where(ok, np.einsum("ij,ij->i", U, FX) / np.where(ok, nf, 1.0), 0.0)
            Up = U - coef[:, None] * FX
            quad = np.einsum("ij,jk,ik->i", Up, M, Up)
            for j in np.flatnonzero(ok & (quad < -NEG_TOL))[:max_witnesses]:
                found.append(Violation("jacobian", i, X[j], Up[j], float(quad[j])))
            Ds = [(X[0], M)]
        else:
            Ds = []
            for j in range(sample_count):
                v = check_pair(m, X[j], Y[j])
                if v is not None and len(found) < max_witnesses * (i + 1):
                    found.append(Violation("pair", i, X[j], Y[j], v))
                v = check_direction(m, m.jacobian, X[j], U[j])
                if v is not None and len(found) < max_witnesses * (i + 1):
                    found.append(Violation("jacobian", i, X[j], U[j], v))
            Ds = [(X[j], m.jacobian(X[j])) for j in range(min(sample_count, 64))]
        for x, D in Ds:
            if _asym(D) <= SYM_TOL:
                c = _neg_count(D)
                if c >= 2:
                    found.append(Violation("eigen", i, x, None, float(c)))
                    break
    return found
