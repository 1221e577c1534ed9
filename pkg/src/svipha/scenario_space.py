"""Finite scenario trees, the policy space and its nonanticipativity split.

A policy is stored scenario-major as a ``J x n`` array: row ``i`` holds
``x(xi^i)``, with the stage blocks laid out left to right.  The weighted
inner product, the projections onto the nonanticipative subspace ``N`` and
its complement ``M``, and the sqrt-probability embedding into flat
Euclidean coordinates all live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import null_space

PROB_TOL = 1e-12

__all__ = [
    "ScenarioSpace",
    "Policy",
    "SubspaceBasis",
    "inner_product",
    "norm",
    "project_nonanticipative",
    "project_multiplier",
    "to_iso",
    "from_iso",
    "iso_projection_matrix",
    "subspace_basis",
    "nonanticipativity_defect",
    "multiplier_defect",
]


@dataclass(frozen=True)
class ScenarioSpace:
    """Finite probability space with stagewise information structure.

    Parameters
    ----------
    stage_dims : sequence of int
        Decision dimension of each stage; ``n = sum(stage_dims)``.
    probabilities : sequence of float
        One strictly positive probability per scenario, summing to one.
    history : sequence of sequence of tuple
        ``history[i][k]`` is the key of the information available to the
        stage-``k`` decision of scenario ``i``.  Keys must be prefix
        consistent: ``history[i][k]`` starts with ``history[i][k-1]``.
    """

    stage_dims: tuple[int, ...]
    probabilities: np.ndarray
    history: tuple[tuple[tuple, ...], ...]
    _slices: tuple[slice, ...] = field(init=False, repr=False, compare=False)
    _groups: tuple[tuple[tuple[np.ndarray, np.ndarray], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        dims = tuple(int(d) for d in self.stage_dims)
        if len(dims) < 1:
            raise ValueError("need at least one stage")
        if any(d < 0 for d in dims):
            raise ValueError("stage dimensions must be nonnegative")
        p = np.asarray(self.probabilities, dtype=float).copy()
        if p.ndim != 1 or p.size < 1:
            raise ValueError("need at least one scenario")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValueError("scenario probabilities must be positive")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.flags.writeable = False
        hist = tuple(tuple(tuple(key) for key in h) for h in self.history)
        if len(hist) != p.size:
            raise ValueError("one history entry per scenario required")
        for i, h in enumerate(hist):
            if len(h) != len(dims):
                raise ValueError(f"scenario {i}: need one key per stage")
            for k in range(1, len(h)):
                prev, cur = h[k - 1], h[k]
                if len(cur) < len(prev) or cur[: len(prev)] != prev:
                    raise ValueError(
                        f"scenario {i}: key at stage {k + 1} does not extend "
                        f"key at stage {k}"
                    )
        object.__setattr__(self, "stage_dims", dims)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "history", hist)

        offsets = np.concatenate([[0], np.cumsum(dims)])
        slices = tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))
        object.__setattr__(self, "_slices", slices)

        groups = []
        for k in range(len(dims)):
            members: dict[tuple, list[int]] = {}
            for i, h in enumerate(hist):
                members.setdefault(h[k], []).append(i)
            stage_groups = []
            for idx in members.values():
                idx = np.array(idx, dtype=int)
                pg = p[idx]
                stage_groups.append((idx, pg / pg.sum()))
            groups.append(tuple(stage_groups))
        object.__setattr__(self, "_groups", tuple(groups))

    # -- constructors -----------------------------------------------------

    @classmethod
    def two_stage(cls, probabilities: Sequence[float], n1: int, n2: int) -> "ScenarioSpace":
        """First stage shared by all scenarios, second stage scenario specific."""
        J = len(probabilities)
        history = [((), (i,)) for i in range(J)]
        return cls((n1, n2), np.asarray(probabilities, dtype=float), history)

    @classmethod
    def single_stage(cls, probabilities: Sequence[float], n: int) -> "ScenarioSpace":
        J = len(probabilities)
        return cls((n,), np.asarray(probabilities, dtype=float), [((),)] * J)

    @classmethod
    def from_branching(cls, stage_dims, branching, probabilities) -> "ScenarioSpace":
        """Build a uniform tree.

        ``branching[k]`` is the number of children revealed after stage
        ``k + 1``; the leaves are enumerated in lexicographic order and
        ``probabilities`` gives one value per leaf.
        """
        stage_dims = tuple(stage_dims)
        if len(branching) != len(stage_dims) - 1:
            raise ValueError("need one branching factor between consecutive stages")
        leaves = [()]
        for b in branching:
            leaves = [leaf + (c,) for leaf in leaves for c in range(b)]
        history = [tuple(leaf[:k] for k in range(len(stage_dims))) for leaf in leaves]
        return cls(stage_dims, np.asarray(probabilities, dtype=float), history)

    # -- shape ---------------------------------------------------------------

    @property
    def n_scenarios(self) -> int:
        return self.probabilities.size

    @property
    def n(self) -> int:
        return sum(self.stage_dims)

    @property
    def n_stages(self) -> int:
        return len(self.stage_dims)

    @property
    def n_bar(self) -> int:
        return self.n * self.n_scenarios

    def stage_slice(self, k: int) -> slice:
        """Columns of stage ``k`` (0-based)."""
        return self._slices[k]

    def groups(self, k: int):
        """``(indices, conditional weights)`` for each information group at stage ``k``."""
        return self._groups[k]

    def is_trivial_group(self, k: int, g: int) -> bool:
        return self._groups[k][g][0].size == 1

    # -- array-level algebra (used by the solvers) ------------------------------

    def check_values(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n_scenarios, self.n):
            raise ValueError(
                f"policy shape {v.shape} does not match ({self.n_scenarios}, {self.n})"
            )
        return v

    def project_n_values(self, values) -> np.ndarray:
        """Conditional expectation of each stage block within its group."""
        v = self.check_values(values)
        out = v.copy()
        for k, sl in enumerate(self._slices):
            if sl.start == sl.stop:
                continue
            for idx, wts in self._groups[k]:
                if idx.size == 1:
                    continue
                block = v[idx, sl]
                mean = wts @ block
                out[idx, sl] = mean
        return out

    def project_m_values(self, values) -> np.ndarray:
        v = self.check_values(values)
        return v - self.project_n_values(v)

    def inner_values(self, a, b) -> float:
        a = self.check_values(a)
        b = self.check_values(b)
        return float(self.probabilities @ np.einsum("ij,ij->i", a, b))

    def norm_values(self, a) -> float:
        return float(np.sqrt(max(self.inner_values(a, a), 0.0)))


@dataclass
class Policy:
    """A map ``xi -> x(xi)`` on a :class:`ScenarioSpace`."""

    space: ScenarioSpace
    values: np.ndarray

    def __post_init__(self):
        v = self.space.check_values(self.values)
        if not np.all(np.isfinite(v)):
            raise ValueError("policy entries must be finite")
        self.values = np.array(v, dtype=float)

    @classmethod
    def zeros(cls, space: ScenarioSpace) -> "Policy":
        return cls(space, np.zeros((space.n_scenarios, space.n)))

    def stage(self, k: int) -> np.ndarray:
        return self.values[:, self.space.stage_slice(k)]

    def copy(self) -> "Policy":
        return Policy(self.space, self.values.copy())


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (columns) of phi(N) or phi(M) in R^{n_bar}."""

    which: str
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def _same_space(x: Policy, y: Policy):
    if x.space is not y.space and x.space != y.space:
        raise ValueError("policies live on different scenario spaces")
    if x.values.shape != y.values.shape:
        raise ValueError("dimension mismatch")


def inner_product(x: Policy, y: Policy) -> float:
    """Probability-weighted sum of per-scenario Euclidean inner products."""
    _same_space(x, y)
    return x.space.inner_values(x.values, y.values)


def norm(x: Policy) -> float:
    return x.space.norm_values(x.values)


def project_nonanticipative(x: Policy) -> Policy:
    return Policy(x.space, x.space.project_n_values(x.values))


def project_multiplier(x: Policy) -> Policy:
    return Policy(x.space, x.space.project_m_values(x.values))


def nonanticipativity_defect(x: Policy | np.ndarray, space: ScenarioSpace | None = None) -> float:
    """Largest within-group spread of ``x``; exactly zero iff every group block is constant."""
    if isinstance(x, Policy):
        space, v = x.space, x.values
    else:
        v = np.asarray(x, dtype=float)
    worst = 0.0
    for k in range(space.n_stages):
        sl = space.stage_slice(k)
        if sl.start == sl.stop:
            continue
        for idx, _ in space.groups(k):
            block = v[idx, sl]
            worst = max(worst, float(np.max(block.max(axis=0) - block.min(axis=0))))
    return worst


def multiplier_defect(w: Policy | np.ndarray, space: ScenarioSpace | None = None) -> float:
    """Max-abs group-conditional expectation of ``w``; zero iff ``w`` is in M."""
    if isinstance(w, Policy):
        space, v = w.space, w.values
    else:
        v = np.asarray(w, dtype=float)
    return float(np.max(np.abs(space.project_n_values(v)), initial=0.0))


def to_iso(x: Policy) -> np.ndarray:
    """Scale row ``i`` by sqrt(p_i) and concatenate rows."""
    sp = np.sqrt(x.space.probabilities)
    return (x.values * sp[:, None]).reshape(-1)


def from_iso(space: ScenarioSpace, v) -> Policy:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != space.n_bar:
        raise ValueError(f"expected a flat vector of length {space.n_bar}, got {v.shape}")
    sp = np.sqrt(space.probabilities)
    return Policy(space, v.reshape(space.n_scenarios, space.n) / sp[:, None])


def _n_basis(space: ScenarioSpace) -> np.ndarray:
    J, n = space.n_scenarios, space.n
    sp = np.sqrt(space.probabilities)
    cols = []
    for k in range(space.n_stages):
        sl = space.stage_slice(k)
        for idx, _ in space.groups(k):
            scale = sp[idx] / np.sqrt(np.sum(space.probabilities[idx]))
            for c in range(sl.start, sl.stop):
                v = np.zeros(J * n)
                v[idx * n + c] = scale
                cols.append(v)
    if not cols:
        return np.zeros((J * n, 0))
    return np.column_stack(cols)


def subspace_basis(space: ScenarioSpace, which: Literal["N", "M"]) -> SubspaceBasis:
    """Orthonormal basis of phi(N) (explicit group vectors) or phi(M) (complement)."""
    B = _n_basis(space)
    if which == "N":
        return SubspaceBasis("N", B)
    if which == "M":
        if B.shape[1] == 0:
            return SubspaceBasis("M", np.eye(space.n_bar))
        return SubspaceBasis("M", null_space(B.T))
    raise ValueError(f"which must be 'N' or 'M', got {which!r}")


def iso_projection_matrix(space: ScenarioSpace, which: Literal["N", "M"]) -> np.ndarray:
    """Orthogonal projector onto phi(N) or phi(M) as a dense matrix."""
    B = _n_basis(space)
    PN = B @ B.T
    if which == "N":
        return PN
    if which == "M":
        return np.eye(space.n_bar) - PN
    raise ValueError(f"which must be 'N' or 'M', got {which!r}")
