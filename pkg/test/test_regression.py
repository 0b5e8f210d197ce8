import numpy as np
import pytest

from pybsvie.exceptions import (
    CapacityError,
    ConfigurationError,
    ContractError,
    NumericalRankError,
    PreconditionError,
)
from pybsvie.model import TimeGrid, build_free_term
from pybsvie.paths import generate_paths
from pybsvie.regression import (
    ConditionalExpectation,
    RegressionConfig,
    martingale_integrand,
    nested_mc_oracle,
    project,
)


@pytest.fixture
def grid():
    return TimeGrid.uniform(1.0, 4)


@pytest.fixture
def ens(grid):
    return generate_paths(grid, 4000, seed=0)


@pytest.fixture(params=[1, 2, 3])
def degree(request):
    return request.param


@pytest.fixture
def ce(ens, degree):
    return ConditionalExpectation(ens, RegressionConfig(degree))


def test_project_constant(ce, grid):
    X = np.full((ce.ens.M, 3), 2.5)
    for j in range(grid.N + 1):
        np.testing.assert_allclose(ce.project(X, j), 2.5, atol=1e-10)


def test_project_measurable(ce, grid):
    for j in range(grid.N + 1):
        W = ce.ens.states[:, j]
        np.testing.assert_allclose(ce.project(W, j), W, atol=1e-6)


def test_project_terminal(ce, grid):
    WT = ce.ens.states[:, -1]
    for j in range(grid.N):
        err = ce.project(WT, j) - ce.ens.states[:, j]
        assert np.mean(err**2) < 1e-2


def test_project_identity_at_T(ce, grid):
    X = np.random.default_rng(0).normal(size=(ce.ens.M, 2, 2))

    np.testing.assert_array_equal(ce.project(X, grid.N), X)


def test_project_shape(ce):
    X = np.random.default_rng(0).normal(size=(ce.ens.M, 3, 2, 1))

    assert ce.project(X, 1).shape == X.shape


def test_project_at_zero_is_mean(ce):
    X = np.random.default_rng(1).normal(size=(ce.ens.M, 2))

    np.testing.assert_allclose(ce.project(X, 0), np.broadcast_to(X.mean(0), X.shape))


@pytest.mark.parametrize("j", [-1, 5])
def test_bad_slice(ce, j):
    with pytest.raises(PreconditionError):
        ce.project(np.zeros(ce.ens.M), j)


def test_bad_samples(ce):
    with pytest.raises(PreconditionError):
        ce.project(np.zeros(ce.ens.M + 1), 1)


def test_module_project(ens):
    W = ens.states[:, 2]

    np.testing.assert_allclose(project(W, 2, ens), W, atol=1e-6)


def test_overfit_guard(grid):
    ens = generate_paths(grid, 30, seed=0)

    with pytest.raises(ConfigurationError):
        ConditionalExpectation(ens, RegressionConfig(3))


@pytest.mark.parametrize(
    "kwargs", [{"degree": -1}, {"features": ("X",)}, {"features": ()}, {"ridge": -1.0}]
)
def test_bad_config(kwargs):
    with pytest.raises(ConfigurationError):
        RegressionConfig(**kwargs)


def test_basis_size():
    assert RegressionConfig(3).basis_size(1) == 4
    assert RegressionConfig(2, ("W", "int_W")).basis_size(2) == 15


def test_collinear_features(grid):
    ens = generate_paths(grid, 1000, seed=0)
    ce = ConditionalExpectation(ens, RegressionConfig(3, ("W", "int_W"), ridge=0.0))

    with pytest.raises(NumericalRankError):
        ce.project(ens.states[:, 1], 1)


def test_martingale_integrand(ens, grid):
    Z = martingale_integrand(ens.states, ens)

    assert Z.shape == (ens.M, grid.N + 1, 1, 1)
    np.testing.assert_allclose(Z[:, :, 0, 0].mean(0), 1.0, atol=0.1)
    np.testing.assert_array_equal(Z[:, -1], Z[:, -2])


def test_martingale_integrand_scaled(ens):
    ce = ConditionalExpectation(ens)
    Z = ce.martingale_integrand(3 * ens.states)

    np.testing.assert_allclose(Z.mean(0), 3.0, atol=0.3)


def test_oracle_terminal(ens, grid):
    psi = build_free_term("terminal")
    for j in (1, 3):
        est = nested_mc_oracle(psi, j, ens, branches=2000, seed=j)
        assert np.mean((est - ens.states[:, j]) ** 2) < 2e-3


def test_oracle_matches_regression(ens):
    psi = build_free_term("terminal", {"payoff": "square"})
    small = generate_paths(ens.grid, 500, seed=1)
    ce = ConditionalExpectation(small)
    est = nested_mc_oracle(psi, 2, small, branches=4000)
    fit = ce.project(psi.values(small)[:, 2], 2)

    assert np.mean((est - fit) ** 2) < 5e-2


def test_oracle_undeclared_feature(ens):
    with pytest.raises(ContractError):
        nested_mc_oracle(build_free_term("path_average"), 1, ens)


def test_oracle_capacity(ens):
    with pytest.raises(CapacityError):
        nested_mc_oracle(build_free_term("terminal"), 1, ens, branches=1000, max_draws=1000)
