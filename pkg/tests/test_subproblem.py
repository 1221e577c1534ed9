import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svipha.model import FeasibleSet, ScenarioMap, affine
from svipha.oracle import lcp_enumerate
from svipha.subproblem import (
    NewtonConfig,
    SubproblemSpec,
    solve_scenario_subproblem,
    solve_subproblems,
)


def spec1d(c, anchor, r=1.0, w=0.0):
    return SubproblemSpec(affine([[1.0]], [c]), FeasibleSet.orthant(1), np.array([w]), np.array([anchor]), r)


def test_closed_form_interior_solution():
    res = solve_scenario_subproblem(spec1d(1.0, 3.0), np.array([0.0]))
    assert res.converged
    assert res.x[0] == pytest.approx(1.0, abs=1e-10)


def test_corner_solution_takes_no_iterations():
    res = solve_scenario_subproblem(spec1d(5.0, 0.0), np.array([0.0]))
    assert res.converged and res.iterations == 0
    assert res.x[0] == 0.0


def random_strongly_monotone(rng, n):
    A = rng.standard_normal((n, n))
    S = rng.standard_normal((n, n))
    M = A @ A.T / n + 0.1 * np.eye(n) + (S - S.T)
    return M, rng.standard_normal(n)


def test_matches_enumeration_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        M, q = random_strongly_monotone(rng, n)
        w, anchor, r = rng.standard_normal(n), rng.standard_normal(n), float(rng.uniform(0.1, 3))
        sols = lcp_enumerate(M + r * np.eye(n), q + w - r * anchor)
        assert len(sols) == 1
        spec = SubproblemSpec(affine(M, q), FeasibleSet.orthant(n), w, anchor, r)
        res = solve_scenario_subproblem(spec, rng.standard_normal(n))
        assert res.converged
        np.testing.assert_allclose(res.x, sols[0], atol=1e-8)


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_warm_start_independence_at_large_r(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    r = np.linalg.norm(0.5 * (M + M.T), 2) + 0.5
    spec = SubproblemSpec(affine(M, rng.standard_normal(n)), FeasibleSet.orthant(n),
                          rng.standard_normal(n), rng.standard_normal(n), r)
    a = solve_scenario_subproblem(spec, np.zeros(n))
    b = solve_scenario_subproblem(spec, 10 * rng.random(n))
    assert a.converged and b.converged
    np.testing.assert_allclose(a.x, b.x, atol=1e-8)


def test_merit_is_nonincreasing():
    rng = np.random.default_rng(3)
    n = 6
    M, q = random_strongly_monotone(rng, n)
    spec = SubproblemSpec(affine(M, q), FeasibleSet.orthant(n), np.zeros(n), np.zeros(n), 0.5)
    x0 = 5 * rng.random(n)

    def merit(x):
        G = M @ x + q + 0.5 * x
        phi = np.sqrt(x**2 + G**2) - x - G
        return 0.5 * phi @ phi

    values = [merit(x0)]
    for k in range(1, 12):
        res = solve_scenario_subproblem(spec, x0, NewtonConfig(max_newton_iters=k))
        values.append(merit(res.x))
        if res.converged:
            break
    assert all(b <= a + 1e-14 for a, b in zip(values, values[1:]))


def test_box_constraints():
    # separable: x = clip(anchor - c/(1+r), lo, hi) per coordinate
    lo, hi = np.array([0.0, -1.0, 2.0]), np.array([1.0, 1.0, 5.0])
    c = np.array([-5.0, 0.3, 0.0])
    spec = SubproblemSpec(affine(np.eye(3), c), FeasibleSet.box(lo, hi), np.zeros(3), np.zeros(3), 1.0)
    res = solve_scenario_subproblem(spec, np.zeros(3))
    assert res.converged
    np.testing.assert_allclose(res.x, np.clip(-c / 2.0, lo, hi), atol=1e-10)


def test_nonlinear_map():
    # F(x) = x^3 - 8 on R_+, r small: solution near 2
    m = ScenarioMap(lambda x: x**3 - 8.0, lambda x: np.diag(3 * x**2))
    spec = SubproblemSpec(m, FeasibleSet.orthant(1), np.zeros(1), np.array([2.0]), 1e-3)
    res = solve_scenario_subproblem(spec, np.array([1.0]))
    assert res.converged
    assert res.x[0] == pytest.approx(2.0, abs=1e-9)


def test_batch_matches_single():
    rng = np.random.default_rng(11)
    n, B = 4, 5
    maps, W, A = [], rng.standard_normal((B, n)), rng.standard_normal((B, n))
    for _ in range(B):
        M, q = random_strongly_monotone(rng, n)
        maps.append(affine(M, q))
    sets = [FeasibleSet.orthant(n)] * B
    out = solve_subproblems(maps, sets, W, A, 1.0, np.zeros((B, n)))
    for i in range(B):
        one = solve_scenario_subproblem(SubproblemSpec(maps[i], sets[i], W[i], A[i], 1.0), np.zeros(n))
        np.testing.assert_allclose(out.x[i], one.x, atol=1e-10)


def test_rejects_bad_warm_start():
    with pytest.raises(ValueError):
        solve_scenario_subproblem(spec1d(1.0, 0.0), np.array([np.nan]))
