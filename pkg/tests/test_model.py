import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svipha.instances import orange_market
from svipha.model import (
    EvaluationError,
    FeasibleSet,
    ScenarioMap,
    SviProblem,
    TwoStageSlcp,
    affine,
    central_jacobian,
    eval_F,
    extensive_residual,
    multiplier_from_solution,
    slcp_stopping_error,
)
from svipha.oracle import extensive_slcp_oracle, oracle_policy
from svipha.pha import stopping_error
from svipha.scenario_space import Policy, ScenarioSpace


def one_scenario(M, q):
    sp = ScenarioSpace.single_stage([1.0], len(q))
    return SviProblem(sp, [affine(M, q)], [FeasibleSet.orthant(len(q))])


def test_zero_map_gives_zero_policy():
    sp = ScenarioSpace.two_stage([0.4, 0.6], 1, 1)
    pb = SviProblem(sp, [affine(np.zeros((2, 2)), np.zeros(2))] * 2, [FeasibleSet.orthant(2)] * 2)
    x = Policy(sp, np.ones((2, 2)))
    np.testing.assert_array_equal(eval_F(pb, x).values, 0.0)


def test_extensive_residual_examples():
    pb = one_scenario(np.array([[2.0]]), np.array([-2.0]))
    sp = pb.space
    assert extensive_residual(pb, Policy(sp, [[1.0]]), Policy.zeros(sp)) == 0.0
    pb = one_scenario(np.eye(2), np.array([1.0, 0.5]))
    assert extensive_residual(pb, Policy.zeros(pb.space), Policy.zeros(pb.space)) == 0.0


def test_extensive_residual_orange_oracle_solution():
    slcp = orange_market()
    (x1, x2), = extensive_slcp_oracle(slcp)
    pb = slcp.to_problem()
    x = Policy(pb.space, oracle_policy(slcp, x1, x2))
    w = multiplier_from_solution(pb, x)
    assert extensive_residual(pb, x, w) <= 0.05


def test_stopping_error_examples():
    slcp = orange_market()
    (x1, x2), = extensive_slcp_oracle(slcp)
    assert slcp_stopping_error(slcp, oracle_policy(slcp, x1, x2)) <= 1e-10
    pos = TwoStageSlcp(1, 1, np.tile(np.eye(2), (2, 1, 1)), np.ones((2, 2)), np.array([0.5, 0.5]))
    assert slcp_stopping_error(pos, np.zeros((2, 2))) == 0.0
    pb = pos.to_problem()
    assert stopping_error(pb, np.zeros((2, 2))) == 0.0


def test_generic_residual_matches_slcp_error(rng):
    slcp = orange_market()
    pb = slcp.to_problem()
    generic = SviProblem(pb.space, pb.maps, pb.sets)
    for _ in range(5):
        x = pb.space.project_n_values(np.abs(rng.normal(100, 50, size=(3, 4))))
        assert stopping_error(generic, x) == pytest.approx(slcp_stopping_error(slcp, x), rel=1e-12)


def test_exact_extensive_solution_has_zero_stopping_error():
    slcp = orange_market()
    (x1, x2), = extensive_slcp_oracle(slcp)
    pb = slcp.to_problem()
    x = Policy(pb.space, oracle_policy(slcp, x1, x2))
    w = multiplier_from_solution(pb, x)
    assert extensive_residual(pb, x, w) <= 1e-9
    assert slcp_stopping_error(slcp, x) <= 1e-9


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_affine_jacobian_matches_finite_differences(n, seed):
    rng = np.random.default_rng(seed)
    M, q = rng.standard_normal((n, n)), rng.standard_normal(n)
    m = affine(M, q)
    x = rng.standard_normal(n) * 3
    fd = central_jacobian(m, x)
    np.testing.assert_allclose(fd, m.jacobian(x), rtol=1e-6, atol=1e-6 * np.abs(M).max())


def test_nonlinear_map_uses_fd_fallback():
    m = ScenarioMap(lambda x: x**2)
    np.testing.assert_allclose(m.jacobian(np.array([3.0])), [[6.0]], atol=1e-6)
    assert not m.is_affine


def test_evaluation_error_carries_scenario():
    sp = ScenarioSpace.single_stage([0.5, 0.5], 1)
    bad = ScenarioMap(lambda x: np.array([np.nan]))
    pb = SviProblem(sp, [affine([[1.0]], [0.0]), bad], [FeasibleSet.orthant(1)] * 2)
    with pytest.raises(EvaluationError) as exc:
        eval_F(pb, Policy.zeros(sp))
    assert exc.value.scenario == 1


def test_feasible_set():
    C = FeasibleSet.box([0, -1], [1, np.inf])
    np.testing.assert_array_equal(C.project([2.0, -5.0]), [1.0, -1.0])
    assert C.contains([0.5, 10.0]) and not C.contains([-0.1, 0])
    assert FeasibleSet.orthant(3).is_orthant
    with pytest.raises(ValueError):
        FeasibleSet.box([1.0], [0.0])


def test_instance_json_round_trip(tmp_path):
    slcp = orange_market()
    path = tmp_path / "orange.json"
    slcp.save(path)
    back = TwoStageSlcp.load(path)
    np.testing.assert_array_equal(back.M, slcp.M)
    np.testing.assert_array_equal(back.q, slcp.q)
    np.testing.assert_array_equal(back.probabilities, slcp.probabilities)
    data = json.loads(path.read_text())
    assert set(data) == {"n1", "n2", "scenarios"}
    assert set(data["scenarios"][0]) == {"p", "M", "q"}


@pytest.mark.parametrize("bad", [
    {},
    {"n1": 1, "n2": 1, "scenarios": []},
    {"n1": 1, "n2": 1, "scenarios": [{"p": 1.0, "M": [[1]], "q": [0, 0]}]},
    {"n1": 1, "n2": 1, "scenarios": [{"M": [[1, 0], [0, 1]], "q": [0, 0]}]},
])
def test_instance_json_rejects_malformed(bad):
    with pytest.raises(ValueError):
        TwoStageSlcp.from_dict(bad)
