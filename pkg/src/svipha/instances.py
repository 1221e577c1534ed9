"""Concrete problem instances: orange market, random pseudomonotone SLCPs, textbook examples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import TwoStageSlcp

# Per-scenario inverse demand data: [P_J, P_F] = D [Q_J, Q_F] + d
ORANGE_PROBABILITIES = np.array([0.5, 0.3, 0.2])
ORANGE_DEMAND_SLOPE = np.array([
    [[-0.005, -0.0002], [-0.0002, -0.001]],
    [[-0.004, -0.0001], [-0.0001, -0.0005]],
    [[-0.006, -0.0003], [-0.0003, -0.0015]],
])
ORANGE_DEMAND_INTERCEPT = np.array([[7.5, 4.0], [7.0, 3.5], [8.0, 4.5]])
# published (rounded) quantities and prices
ORANGE_SUPPLY = 393.0
ORANGE_QUANTITIES = np.array([[56.0, 281.0], [64.0, 265.0], [52.0, 288.0]])
ORANGE_PRICES = np.array([[7.16, 3.71], [6.72, 3.36], [7.60, 4.05]])


def orange_market() -> TwoStageSlcp:
    """KKT system of the two-stage orange market as an SLCP.

    Per scenario ``x = (Q_S, Q_J, Q_F, eta)`` with ``eta`` the multiplier of
    the juice/fresh capacity constraint ``2 Q_J + Q_F <= Q_S``.  Rows two and
    three are the stationarity conditions of the second-stage revenue
    maximization, i.e. ``-2 D Q - d + eta (2, 1)``.
    """
    J = 3
    M = np.zeros((J, 4, 4))
    q = np.zeros((J, 4))
    for i in range(J):
        D, d = ORANGE_DEMAND_SLOPE[i], ORANGE_DEMAND_INTERCEPT[i]
        M[i, 0] = [0.001, 0.0, 0.0, -1.0]
        M[i, 1] = [0.0, -2 * D[0, 0], -2 * D[0, 1], 2.0]
        M[i, 2] = [0.0, -2 * D[1, 0], -2 * D[1, 1], 1.0]
        M[i, 3] = [1.0, -2.0, -1.0, 0.0]
        q[i] = [3.0, -d[0], -d[1], 0.0]
    return TwoStageSlcp(1, 3, M, q, ORANGE_PROBABILITIES.copy())


def orange_prices(quantities: np.ndarray) -> np.ndarray:
    """``(P_J, P_F)`` per scenario for ``quantities[i] = (Q_J, Q_F)``."""
    quantities = np.asarray(quantities, dtype=float)
    return np.einsum("ijk,ik->ij", ORANGE_DEMAND_SLOPE, quantities) + ORANGE_DEMAND_INTERCEPT


def orange_reference_multipliers() -> np.ndarray:
    """``eta`` per scenario solving second-stage stationarity at the published quantities (least squares)."""
    a = np.array([2.0, 1.0])
    out = np.empty(3)
    for i in range(3):
        rhs = 2 * ORANGE_DEMAND_SLOPE[i] @ ORANGE_QUANTITIES[i] + ORANGE_DEMAND_INTERCEPT[i]
        out[i] = a @ rhs / (a @ a)
    return out


@dataclass
class GeneratorParams:
    n1: int
    n2: int
    J: int
    seed: int = 0
    monotone_only: bool = False
    max_attempts: int = 100
    max_cos: float = 0.99

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.J < 1:
            raise ValueError("need n1, n2, J >= 1")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; identical across platforms for a given seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _pseudomonotone_block(rng, n, max_cos, max_attempts):
    for _ in range(max_attempts):
        a = 1.0 - rng.random(n)          # (0, 1]
        b = -(1.0 - rng.random(n))       # [-1, 0)
        cos = (a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
        if abs(cos) <= max_cos:
            break
    else:
        raise RuntimeError(f"no sufficiently independent (a, b) in {max_attempts} draws")
    a0, b0 = rng.random(2)
    u, u2 = rng.uniform(0.1, 1.0, size=2)
    alpha = -b0 - u
    beta = -a0 + u2
    M = np.outer(a, b) + np.outer(b, a)
    q = b0 * a + a0 * b + alpha * a + beta * b
    return M, q, dict(a=a, b=b, a0=a0, b0=b0, alpha=alpha, beta=beta)


def _psd_block(rng, n):
    s = math.ceil(3 * n / 4)
    weights = rng.uniform(0.1, 1.0, size=s)
    V = rng.standard_normal((s, n))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    M = np.einsum("i,ij,ik->jk", weights, V, V)
    q = rng.uniform(-1.0, 1.0, size=n)
    return M, q


def gen_pseudo_slcp(params: GeneratorParams, return_meta: bool = False):
    """Random two-stage SLCP whose scenario maps are pseudomonotone on ``R^n_+``.

    Scenario 1 is the rank-two map ``M = a b^T + b a^T`` with ``a > 0``,
    ``b < 0``; the remaining scenarios have PSD matrices built from
    ``ceil(3n/4)`` random rank-one terms.  Draw order: scenario 1, scenarios
    2..J, then probabilities.
    """
    rng = make_rng(params.seed)
    n = params.n1 + params.n2
    J = params.J
    M = np.empty((J, n, n))
    q = np.empty((J, n))
    meta = None
    start = 0
    if not params.monotone_only:
        M[0], q[0], meta = _pseudomonotone_block(rng, n, params.max_cos, params.max_attempts)
        start = 1
    for k in range(start, J):
        M[k], q[k] = _psd_block(rng, n)
    p = 1.0 - rng.random(J)
    p = p / p.sum()
    slcp = TwoStageSlcp(params.n1, params.n2, M, q, p)
    return (slcp, meta) if return_meta else slcp


@dataclass
class TextbookExample:
    """Single-scenario fixture given directly in matrix form.

    ``N`` is an arbitrary subspace here (not induced by a scenario tree), so
    the example carries its own multiplier projector ``P_M``.
    """

    name: str
    M: np.ndarray
    q: np.ndarray
    P_M: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    e2: float | None = None

    def F(self, x) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=float) + self.q

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "DF": self.M.tolist(),
            "P_M": self.P_M.tolist(),
        }


def textbook_examples() -> dict[str, TextbookExample]:
    """Small hand-checkable instances for the elicitation criteria."""
    inf = np.inf
    indef = TextbookExample(
        "indefinite_diag",
        M=np.diag([1.0, -1.0]), q=np.zeros(2),
        P_M=np.diag([0.0, 1.0]),
        lower=np.array([2.0, 2.0]), upper=np.array([inf, inf]),
    )
    singular = TextbookExample(
        "singular_diag",
        M=np.diag([0.0, -1.0]), q=np.zeros(2),
        P_M=np.diag([0.0, 1.0]),
        lower=np.array([1.0, 1.0]), upper=np.array([inf, inf]),
    )
    triple = TextbookExample(
        "triple_min_eig",
        M=np.diag([-1.0, 0.0, 0.0]), q=np.zeros(3),
        P_M=np.diag([1.0, 0.0, 0.0]),
        lower=np.ones(3), upper=np.full(3, inf), e2=1.0,
    )
    commuting = TextbookExample(
        "commuting_4x4",
        M=np.array([
            [10.0, 0.0, 0.0, 1.0],
            [0.0, 4.0, 1.0, 0.0],
            [0.0, 1.0, 4.0, 0.0],
            [1.0, 0.0, 0.0, 5.0],
        ]),
        q=np.zeros(4),
        P_M=np.array([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]),
        lower=np.zeros(4), upper=np.full(4, inf),
    )
    return {e.name: e for e in (indef, singular, triple, commuting)}
