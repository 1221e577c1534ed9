import json
import math

import numpy as np
import pytest

from svipha.instances import (
    ORANGE_PRICES,
    ORANGE_QUANTITIES,
    GeneratorParams,
    gen_pseudo_slcp,
    orange_market,
    orange_prices,
)
from svipha.model import TwoStageSlcp, slcp_stopping_error
from svipha.oracle import extensive_slcp_oracle, oracle_policy
from svipha.pha import INNER_FAILURE, MAX_ITERS, PhaConfig, pha_solve, rs_norm
from svipha.scenario_space import Policy, ScenarioSpace, multiplier_defect, nonanticipativity_defect


def replicated(J=2, n1=1, n2=2):
    n = n1 + n2
    return TwoStageSlcp(n1, n2, np.tile(np.eye(n), (J, 1, 1)), -np.ones((J, n)), np.full(J, 1.0 / J))


def test_replicated_deterministic_problem():
    rep = pha_solve(replicated().to_problem())
    assert rep.converged
    np.testing.assert_allclose(rep.x_final.values, 1.0, atol=1e-4)
    np.testing.assert_allclose(rep.w_final.values, 0.0, atol=1e-4)


def test_rs_norm_examples():
    sp = ScenarioSpace.single_stage([0.5, 0.5], 1)
    x = Policy(sp, np.array([[1.0], [1.0]]))
    z = Policy.zeros(sp)
    w = Policy(sp, np.array([[math.sqrt(2)], [-math.sqrt(2)]]))
    assert rs_norm(x, z, 2.0, 1.0) == pytest.approx(1.0)
    assert rs_norm(z, w, 2.0, 1.0) == pytest.approx(1.0)
    assert rs_norm(x, w, 2.0, 1.0) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        rs_norm(x, w, 1.0, 1.0)


def test_config_validation():
    assert PhaConfig(r=3.0).s == 1.5
    for bad in (dict(r=1.0, s=1.0), dict(rho=2.0), dict(tol=0.0), dict(max_iter=0)):
        with pytest.raises(ValueError):
            PhaConfig(**bad)


def test_orange_market_small_r_hits_published_solution():
    # r = 1 needs ~4000 iterations (first-stage curvature is only 1e-3); r = 0.1 follows the same path faster
    slcp = orange_market()
    rep = pha_solve(slcp.to_problem(), PhaConfig(r=0.1))
    assert rep.converged and rep.final_error <= 1e-5
    x = rep.x_final.values
    assert 392 <= x[0, 0] <= 394
    np.testing.assert_allclose(x[:, 1:3], ORANGE_QUANTITIES, atol=1.0)
    np.testing.assert_allclose(orange_prices(x[:, 1:3]), ORANGE_PRICES, atol=0.01)


def test_orange_market_tight_tolerance_satisfies_err():
    slcp = orange_market()
    rep = pha_solve(slcp.to_problem(), PhaConfig(r=0.01, tol=1e-6))
    assert rep.converged
    assert slcp_stopping_error(slcp, rep.x_final.values) <= 1e-5


def test_iterate_invariants_and_classical_reduction():
    slcp = gen_pseudo_slcp(GeneratorParams(2, 2, 4, seed=3, monotone_only=True))
    pb = slcp.to_problem()
    sp = pb.space
    r = 1.5
    state = {"w": np.zeros((sp.n_scenarios, sp.n))}

    def check(k, x, w, xhat):
        assert nonanticipativity_defect(x, sp) == 0.0
        assert multiplier_defect(w, sp) <= 1e-10
        assert multiplier_defect(xhat - x, sp) <= 1e-12 * max(1.0, np.abs(xhat).max())
        np.testing.assert_allclose(w - state["w"], r * (xhat - x), atol=1e-10)
        state["w"] = w.copy()

    rep = pha_solve(pb, PhaConfig(r=r, s=0.0, rho=1.0, max_iter=200), callback=check)
    assert rep.iterations >= 2


def test_matches_oracle_on_tiny_instance():
    slcp = gen_pseudo_slcp(GeneratorParams(1, 1, 2, seed=2, monotone_only=True))
    (x1, x2), = extensive_slcp_oracle(slcp)
    rep = pha_solve(slcp.to_problem(), PhaConfig(r=2.0, tol=1e-10, max_iter=20000))
    assert rep.converged
    np.testing.assert_allclose(rep.x_final.values, oracle_policy(slcp, x1, x2), atol=1e-5)


def test_max_iters_status():
    rep = pha_solve(orange_market().to_problem(), PhaConfig(max_iter=1))
    assert rep.status == MAX_ITERS and rep.iterations == 1
    assert len(rep.error_history) == 1


def test_infeasible_generated_instance_reports_inner_failure():
    slcp = gen_pseudo_slcp(GeneratorParams(2, 2, 3, seed=0))
    rep = pha_solve(slcp.to_problem())
    assert rep.status == INNER_FAILURE
    assert rep.failed_scenario == 0


def test_threads_give_identical_iterates():
    slcp = gen_pseudo_slcp(GeneratorParams(3, 2, 7, seed=5, monotone_only=True))
    a = pha_solve(slcp.to_problem(), PhaConfig(r=2.0, threads=1))
    b = pha_solve(slcp.to_problem(), PhaConfig(r=2.0, threads=3))
    c = pha_solve(slcp.to_problem(), PhaConfig(r=2.0, threads=1))
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.x_final.values, b.x_final.values)
    assert a.x_final.values.tobytes() == c.x_final.values.tobytes()
    assert a.error_history == c.error_history


def test_rejects_bad_starting_points():
    pb = replicated().to_problem()
    sp = pb.space
    with pytest.raises(ValueError):
        pha_solve(pb, x0=Policy(sp, np.array([[1.0, 0, 0], [0.0, 0, 0]])))
    with pytest.raises(ValueError):
        pha_solve(pb, w0=Policy(sp, np.ones((2, 3))))


def test_report_serialization():
    rep = pha_solve(orange_market().to_problem(), PhaConfig(r=0.01))
    d = json.loads(rep.to_json(n1=1))
    assert {"status", "iterations", "final_error", "wall_time_s", "x1", "x2", "w"} <= set(d)
    assert len(d["x1"]) == 1 and set(d["x2"]) == {"0", "1", "2"} and len(d["x2"]["0"]) == 3
    lines = rep.history_csv().strip().splitlines()
    assert lines[0] == "iteration,err,rs_norm"
    assert len(lines) == rep.iterations + 1


def test_error_history_decreases_eventually_when_elicited():
    # monotone instance: level 0 certified, s = r/2 > 0
    slcp = gen_pseudo_slcp(GeneratorParams(2, 3, 5, seed=9, monotone_only=True))
    rep = pha_solve(slcp.to_problem(), PhaConfig(r=math.sqrt(5)))
    assert rep.converged
    tail = rep.error_history[len(rep.error_history) // 2:]
    assert tail[-1] < tail[0]
