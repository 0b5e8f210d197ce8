from dataclasses import replace

import numpy as np
import pytest

from pybsvie.diagnostics import data_mass
from pybsvie.exceptions import ConfigurationError, ContractError, PreconditionError
from pybsvie.model import TimeGrid, build_driver, build_free_term, get_modulus, standard_moduli
from pybsvie.paths import generate_paths
from pybsvie.regression import ConditionalExpectation, RegressionConfig
from pybsvie.solvers import (
    SolverConfig,
    bihari_monitor,
    concavity_lemma_check,
    gronwall_bound,
    gronwall_bound_check,
    mean_square_integral,
    picard_solve,
    solve_simple,
)
from pybsvie.solvers.picard import UNPROVEN
from pybsvie.utils import Verdict
from pybsvie.warnings import UnprovenRegimeWarning


@pytest.fixture
def grid():
    return TimeGrid.uniform(1.0, 8)


@pytest.fixture
def ens(grid):
    return generate_paths(grid, 1000, seed=5)


@pytest.fixture
def ce(ens):
    return ConditionalExpectation(ens, RegressionConfig(3))


@pytest.fixture
def log1p():
    return get_modulus("log1p")


def test_eq33(ens, grid, ce):
    g = build_driver("eq33", {"delta": 0.1})
    psi = build_free_term("scaled_terminal", {"scale": 1.0})
    cfg = SolverConfig(kind="picard", outer_tol=1e-4)

    Y, Z, report = picard_solve(g, psi, cfg, ens, ce=ce)

    assert report.converged
    assert report.kind == "picard"
    assert len(report.norms) == len(report.distances) == len(report.inner_iterations)
    assert Z.has_lower
    assert bihari_monitor(report.distances, g.modulus) == Verdict.CONSISTENT

    a, b = g.modulus.linear_bound
    K = g.kernel.sup**2 * g.r1**2
    assert gronwall_bound_check(report.norms, a, b, data_mass(psi, g, ens), grid.T, K)


def test_no_modulus(ens):
    g = build_driver("linear", {"y": 1.0})

    with pytest.raises(ConfigurationError):
        picard_solve(g, np.zeros((ens.M, ens.N + 1)), SolverConfig(kind="picard"), ens)


def test_unproven_regime(ens, ce, log1p):
    g = replace(build_driver("stochastic_linear", {"y": 0.5}), modulus=log1p)
    psi = build_free_term("constant", {"c": 1.0})
    cfg = SolverConfig(kind="picard", mode="adapted")

    with pytest.warns(UnprovenRegimeWarning):
        _, _, report = picard_solve(g, psi, cfg, ens, ce=ce)

    assert UNPROVEN in report.tags
    assert report.converged


def test_f_y_zero(ens, ce):
    g = build_driver("f_y")
    psi = np.zeros((ens.M, ens.N + 1))

    Y, _, report = picard_solve(g, psi, SolverConfig(kind="picard"), ens, ce=ce)

    np.testing.assert_array_equal(Y.values, 0.0)
    assert report.converged
    assert report.iterations == 1


def test_mean_square_integral(ens, grid):
    Y = np.full((ens.M, grid.N + 1, 1), 2.0)

    assert mean_square_integral(Y, grid) == pytest.approx(4.0)


def test_concavity_lemma(grid):
    lhs, rhs = concavity_lemma_check(np.sqrt, lambda s: 1 + s, 0.0, grid)

    assert lhs <= rhs


def test_concavity_lemma_samples(grid):
    samples = np.linspace(0.0, 4.0, grid.N + 1) ** 2
    lhs, rhs = concavity_lemma_check(np.log1p, samples, 0.5, grid)

    assert lhs <= rhs


def test_concavity_lemma_at_T(grid):
    with pytest.raises(PreconditionError):
        concavity_lemma_check(np.sqrt, lambda s: 1 + s, 1.0, grid)


def test_concavity_lemma_negative(grid):
    with pytest.raises(PreconditionError):
        concavity_lemma_check(np.sqrt, lambda s: s - 0.5, 0.0, grid)


def test_concavity_lemma_convex(grid):
    with pytest.raises(ContractError):
        concavity_lemma_check(np.square, lambda s: 1 + s, 0.0, grid)


def random_concave(rng: np.random.Generator, hi: float):
    """a piecewise-linear concave function on [0, hi] with random knots and decreasing slopes"""
    n_knots = rng.integers(2, 8)
    knots = np.concatenate([[0.0], np.sort(rng.uniform(0, hi, n_knots - 2)), [hi]])
    slopes = np.sort(rng.normal(0, 2, n_knots - 1))[::-1]
    values = np.concatenate([[rng.normal()], np.cumsum(slopes * np.diff(knots))])
    values[1:] += values[0]

    return lambda x: np.interp(x, knots, values)


def test_concavity_lemma_random(grid):
    rng = np.random.default_rng(42)
    for _ in range(1000):
        f = rng.exponential(rng.uniform(0.1, 5), grid.N + 1)
        c = random_concave(rng, f.max() + 1.0)
        t = grid.nodes[rng.integers(0, grid.N)]

        lhs, rhs = concavity_lemma_check(c, f, t, grid)
        assert lhs <= rhs + 1e-10


@pytest.mark.parametrize(
    "distances,verdict",
    [
        ([], Verdict.CONSISTENT),
        ([0.0, 0.0, 0.0], Verdict.CONSISTENT),
        ([1.0, 0.1, 0.01, 1e-3, 5e-5], Verdict.CONSISTENT),
        ([1.0, 0.1, 0.01, 0.02, 1e-5], Verdict.VIOLATED),
        ([1.0, 0.5, 0.25], Verdict.VIOLATED),
        ([1.0, -0.1, 1e-5], Verdict.VIOLATED),
        ([1.0, np.nan, 1e-5], Verdict.VIOLATED),
        ([1.0, 1e-8, 0.5, 1e-5], Verdict.VIOLATED),
        ([1.0, 0.1, 0.01, 0.01, 1e-5], Verdict.VIOLATED),
        ([1.0, 0.1, 0.01, 0.01 + 1e-9, 1e-5], Verdict.VIOLATED),
        ([1.0, 0.1, 5e-5, 5e-5], Verdict.CONSISTENT),
        ([1.0, 0.1, 5e-5, 2e-4, 1e-5], Verdict.VIOLATED),
    ],
)
def test_bihari_monitor(distances, verdict, log1p):
    assert bihari_monitor(distances, log1p) == verdict


def test_gronwall_bound():
    assert gronwall_bound(0.0, 0.0, 2.0, 1.0, C=3.0) == pytest.approx(6.0)
    assert gronwall_bound(1.0, 1.0, 1.0, 1.0, C=1.0) == pytest.approx(2 * np.e)


def test_gronwall_bound_constants():
    # C1 = C a K T^2 and C3 = C b K
    assert gronwall_bound(1.0, 0.0, 0.0, 2.0, lipschitz_mass=1.0, C=1.0) == pytest.approx(4.0)
    assert gronwall_bound(0.5, 2.0, 0.0, 1.0, lipschitz_mass=3.0, C=1.0) == pytest.approx(
        1.5 * np.exp(6.0)
    )


@pytest.mark.parametrize(
    "norms,expected", [([], True), ([0.1, 0.2], True), ([10.0], False), ([0.1, np.inf], False)]
)
def test_gronwall_bound_check(norms, expected):
    assert gronwall_bound_check(norms, 1.0, 1.0, 1.0, 1.0, 1.0, C=1.0) == expected


def test_concavity_lemma_sqrt(grid):
    lhs, rhs = concavity_lemma_check(np.sqrt, lambda s: s, 0.0, grid)

    assert rhs == pytest.approx(np.sqrt(0.5))
    assert lhs == pytest.approx(2 / 3, abs=0.03)
    assert lhs <= rhs


def test_concavity_lemma_affine(grid):
    lhs, rhs = concavity_lemma_check(lambda x: 2 * x + 1, lambda s: s**2, 0.25, grid)

    assert lhs == pytest.approx(rhs)


@pytest.mark.parametrize("modulus", standard_moduli(), ids=lambda m: m.name)
def test_concavity_lemma_moduli(modulus, grid):
    rng = np.random.default_rng(0)
    for _ in range(100):
        f = rng.uniform(0, 2, grid.N + 1)
        lhs, rhs = concavity_lemma_check(modulus.rho, f, 0.0, grid)
        assert lhs <= rhs + 1e-12


def test_picard_unique(ens, ce):
    g = build_driver("eq33", {"delta": 0.1})
    psi = build_free_term("scaled_terminal", {"scale": 1.0})
    cfg = SolverConfig(kind="picard", outer_tol=1e-4)
    Y_simple, _ = solve_simple(psi, None, ens, ce)

    Y1, _, _ = picard_solve(g, psi, cfg, ens, ce=ce)
    Y2, _, _ = picard_solve(g, psi, cfg, ens, y_init=Y_simple, ce=ce)

    assert mean_square_integral(Y1.values - Y2.values, ens.grid) < 4 * cfg.outer_tol
