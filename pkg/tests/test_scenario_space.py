import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import scenario_spaces
from svipha.scenario_space import (
    Policy,
    ScenarioSpace,
    from_iso,
    inner_product,
    iso_projection_matrix,
    multiplier_defect,
    nonanticipativity_defect,
    norm,
    project_multiplier,
    project_nonanticipative,
    subspace_basis,
    to_iso,
)


def pol(space, values):
    return Policy(space, np.asarray(values, dtype=float).reshape(space.n_scenarios, space.n))


def test_inner_product_weighted_mean():
    sp = ScenarioSpace.single_stage([0.5, 0.5], 1)
    assert inner_product(pol(sp, [2, 4]), pol(sp, [1, 1])) == pytest.approx(3.0)
    z = Policy.zeros(sp)
    assert inner_product(z, z) == 0.0


def test_inner_product_expectation():
    sp = ScenarioSpace.single_stage([0.5, 0.3, 0.2], 1)
    assert inner_product(pol(sp, [1, 2, 3]), pol(sp, [1, 1, 1])) == pytest.approx(1.7)


def test_projection_first_stage_mean():
    sp = ScenarioSpace.two_stage([0.5, 0.3, 0.2], 1, 1)
    x = pol(sp, [[1, 7], [2, 8], [3, 9]])
    y = project_nonanticipative(x)
    np.testing.assert_allclose(y.values[:, 0], 1.7)
    np.testing.assert_array_equal(y.values[:, 1], [7, 8, 9])
    np.testing.assert_array_equal(project_nonanticipative(y).values, y.values)


def test_projection_uneven_probabilities():
    sp = ScenarioSpace.two_stage([0.25, 0.75], 1, 0)
    y = project_nonanticipative(pol(sp, [4, 0]))
    np.testing.assert_allclose(y.values[:, 0], [1, 1])


def test_multiplier_projection():
    sp = ScenarioSpace.two_stage([0.5, 0.5], 1, 0)
    np.testing.assert_allclose(project_multiplier(pol(sp, [4, 0])).values[:, 0], [2, -2])
    x = project_nonanticipative(pol(sp, [3, 1]))
    np.testing.assert_allclose(project_multiplier(x).values, 0.0)


def test_iso_scaling():
    sp = ScenarioSpace.single_stage([1.0], 1)
    np.testing.assert_allclose(to_iso(pol(sp, [3])), [3])
    sp = ScenarioSpace.single_stage([0.25, 0.75], 1)
    np.testing.assert_allclose(to_iso(pol(sp, [2, 2]))[0], 1.0)


def test_iso_projector_examples():
    sp = ScenarioSpace.two_stage([0.5, 0.5], 1, 0)
    np.testing.assert_allclose(iso_projection_matrix(sp, "N"), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    sp = ScenarioSpace.single_stage([1.0], 3)
    np.testing.assert_allclose(iso_projection_matrix(sp, "N"), np.eye(3))
    np.testing.assert_allclose(iso_projection_matrix(sp, "M"), 0.0)


def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        ScenarioSpace.single_stage([0.5, 0.4], 1)
    with pytest.raises(ValueError):
        ScenarioSpace.single_stage([1.0, 0.0], 1)
    with pytest.raises(ValueError):
        ScenarioSpace((1, 1), np.array([1.0]), [((0,), (1,))])
    sp = ScenarioSpace.single_stage([1.0], 2)
    with pytest.raises(ValueError):
        Policy(sp, np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        from_iso(sp, np.zeros(3))


def test_from_branching_three_stage():
    sp = ScenarioSpace.from_branching((1, 1, 1), (2, 2), np.full(4, 0.25))
    assert sp.n_scenarios == 4 and sp.n_stages == 3 and sp.n_bar == 12
    x = pol(sp, np.arange(12.0))
    y = project_nonanticipative(x).values
    np.testing.assert_allclose(y[:, 0], np.mean(x.values[:, 0]))
    np.testing.assert_allclose(y[:2, 1], np.mean(x.values[:2, 1]))
    np.testing.assert_allclose(y[2:, 1], np.mean(x.values[2:, 1]))
    np.testing.assert_array_equal(y[:, 2], x.values[:, 2])


def _random_policy(space, seed):
    return Policy(space, np.random.default_rng(seed).standard_normal((space.n_scenarios, space.n)))


@given(scenario_spaces(), st.integers(0, 2**31))
def test_projection_algebra(sp, seed):
    x, y = _random_policy(sp, seed), _random_policy(sp, seed + 1)
    scale = max(1.0, norm(x) * norm(y))
    PNx, PMx = project_nonanticipative(x), project_multiplier(x)
    np.testing.assert_allclose(project_nonanticipative(PNx).values, PNx.values, atol=1e-12)
    np.testing.assert_allclose(project_multiplier(PMx).values, PMx.values, atol=1e-12)
    np.testing.assert_allclose(PNx.values + PMx.values, x.values, atol=1e-12)
    assert abs(inner_product(PNx, y) - inner_product(x, project_nonanticipative(y))) <= 1e-12 * scale
    assert abs(inner_product(PNx, project_multiplier(y))) <= 1e-12 * scale
    assert nonanticipativity_defect(PNx) == 0.0
    assert multiplier_defect(PMx) <= 1e-12 * max(1.0, norm(x))


@given(scenario_spaces(), st.integers(0, 2**31))
def test_isometry_and_commutation(sp, seed):
    x, y = _random_policy(sp, seed), _random_policy(sp, seed + 7)
    scale = max(1.0, norm(x) * norm(y))
    assert abs(to_iso(x) @ to_iso(y) - inner_product(x, y)) <= 1e-12 * scale
    PM = iso_projection_matrix(sp, "M")
    np.testing.assert_allclose(to_iso(project_multiplier(x)), PM @ to_iso(x), atol=1e-12 * max(1, norm(x)))
    np.testing.assert_allclose(from_iso(sp, to_iso(x)).values, x.values, atol=1e-12 * max(1, norm(x)))


@given(scenario_spaces(max_scenarios=12))
def test_bases_are_orthonormal_complements(sp):
    BN = subspace_basis(sp, "N").matrix
    BM = subspace_basis(sp, "M").matrix
    assert BN.shape[1] + BM.shape[1] == sp.n_bar
    np.testing.assert_allclose(BN.T @ BN, np.eye(BN.shape[1]), atol=1e-12)
    np.testing.assert_allclose(BN.T @ BM, 0.0, atol=1e-12)
    PN, PM = iso_projection_matrix(sp, "N"), iso_projection_matrix(sp, "M")
    np.testing.assert_allclose(PN @ PN, PN, atol=1e-12)
    np.testing.assert_allclose(PN + PM, np.eye(sp.n_bar), atol=1e-12)
