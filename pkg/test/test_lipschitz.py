from dataclasses import replace

import numpy as np
import pytest

from pybsvie.exceptions import ContractError, DivergenceError, ModeError, PreconditionError
from pybsvie.model import (
    Process1P,
    Process2P,
    TimeGrid,
    build_driver,
    build_free_term,
    build_weight_profile,
)
from pybsvie.paths import generate_paths
from pybsvie.regression import ConditionalExpectation, RegressionConfig
from pybsvie.scenarios import BUILTIN_DIR, load_scenario
from pybsvie.solvers import (
    SolverConfig,
    build_config,
    get_solver,
    solve_lipschitz,
    stability_gap,
    theta_map,
    weighted_norm,
    zero_iterate,
)
from pybsvie.solvers.lipschitz import default_alpha2, default_beta
from pybsvie.utils import SolverKind, SolverMode


@pytest.fixture
def grid():
    return TimeGrid.uniform(1.0, 8)


@pytest.fixture
def ens(grid):
    return generate_paths(grid, 2000, seed=3)


@pytest.fixture
def ce(ens):
    return ConditionalExpectation(ens, RegressionConfig(3))


@pytest.fixture
def w(grid):
    return build_weight_profile(1.0, grid, beta=2.0)


def test_exp_volterra():
    grid = TimeGrid.uniform(1.0, 32)
    ens = generate_paths(grid, 100, seed=0)
    g = build_driver("linear", {"y": 1.0})
    psi = build_free_term("constant", {"c": 1.0})

    Y, Z, report = solve_lipschitz(g, psi, SolverConfig(), ens)

    np.testing.assert_allclose(Y.values[0, :, 0], np.exp(1.0 - grid.nodes), rtol=0.02)
    assert report.converged
    assert report.contraction_factors
    assert report.sup_factor < 1
    assert Z.has_lower
    assert report.beta == 8.0


def test_weighted_norm_zero(ens, w):
    y, z = zero_iterate(ens, build_driver("zero"), SolverMode.M_SOLUTION)

    assert weighted_norm(y, z, w) == 0.0


def test_weighted_norm_constant(ens, grid, w):
    y = Process1P(np.ones((ens.M, grid.N + 1, 1)))

    assert weighted_norm(y, None, w) == pytest.approx(np.sqrt(grid.integrate(w.weights)))


def test_weighted_norm_no_lower(ens, w):
    z = Process2P.zeros(ens.M, ens.N, 1, 1)

    with pytest.raises(ContractError):
        weighted_norm(None, z, w, "square")


def test_zeta_adapted(ens):
    g = build_driver("eq33")

    with pytest.raises(ModeError):
        solve_lipschitz(g, np.zeros((ens.M, ens.N + 1)), SolverConfig(mode="adapted"), ens)


def test_stochastic_m_solution(ens):
    g = build_driver("stochastic_linear", {"y": 1.0})

    with pytest.raises(ModeError):
        solve_lipschitz(g, np.zeros((ens.M, ens.N + 1)), SolverConfig(), ens)


def test_star_weights_precondition(ens):
    g = build_driver("linear", {"y": 0.5})
    cfg = SolverConfig(weight_mode="A_star", alpha2=0.5, alpha_floor=0.5)

    with pytest.raises(PreconditionError):
        solve_lipschitz(g, np.zeros((ens.M, ens.N + 1)), cfg, ens)


def test_divergence(ens):
    g = build_driver("linear", {"y": 50.0})
    psi = build_free_term("constant", {"c": 1.0})
    cfg = SolverConfig(beta=1.0, alpha2=1.0, max_doublings=0)

    with pytest.raises(DivergenceError) as exc_info:
        solve_lipschitz(g, psi, cfg, ens)

    report = exc_info.value.report
    assert report is not None
    assert not report.converged
    assert report.consecutive_expansions() >= 3


def test_theta_map_needs_lower(ens, ce):
    g = build_driver("linear", {"zeta": [0.5]})
    y = Process1P.zeros(ens.M, ens.N, 1)
    z = Process2P.zeros(ens.M, ens.N, 1, 1)

    with pytest.raises(ContractError):
        theta_map(y, z, g, np.zeros((ens.M, ens.N + 1)), SolverConfig(), ens, ce)


def test_theta_map_adapted(ens, ce):
    g = build_driver("linear", {"const": 1.0})
    cfg = SolverConfig(mode="adapted")
    y, z = zero_iterate(ens, g, cfg.mode)

    Y, Z = theta_map(y, z, g, np.zeros((ens.M, ens.N + 1)), cfg, ens, ce)

    np.testing.assert_allclose(Y.values[0, :, 0], 1.0 - ens.grid.nodes, atol=1e-10)
    assert not Z.has_lower


def test_stability_gap_identical(ens, ce):
    g = build_driver("linear", {"y": 0.5, "z": [0.3]})
    psi = build_free_term("scaled_terminal", {"scale": 1.0})
    Y, Z, _ = solve_lipschitz(g, psi, SolverConfig(), ens, ce=ce)

    lhs, rhs = stability_gap((Y, Z), (Y, Z), psi, psi, g, g, 0.0, ens)

    assert lhs == 0.0
    assert rhs == 0.0


def test_stability_gap_shift(ens, ce):
    g = build_driver("linear", {"y": 0.5, "z": [0.3]})
    psi = build_free_term("scaled_terminal", {"scale": 1.0}).values(ens)
    cfg = SolverConfig()
    sol1 = solve_lipschitz(g, psi, cfg, ens, ce=ce)[:2]
    sol2 = solve_lipschitz(g, psi + 0.1, cfg, ens, ce=ce)[:2]

    lhs, rhs = stability_gap(sol1, sol2, psi, psi + 0.1, g, g, 0.0, ens)

    assert 0 < lhs <= rhs
    assert rhs == pytest.approx(64 * 0.01 * 1.0)


def test_contraction(ens, ce):
    g = build_driver("linear", {"y": 0.3, "z": [0.2], "zeta": [0.2]})
    psi = build_free_term("scaled_terminal", {"scale": 1.0})

    Y, Z, report = solve_lipschitz(g, psi, SolverConfig(), ens, ce=ce)

    assert report.converged
    assert report.sup_factor < 1
    assert report.distances[-1] < 1e-6
    assert report.iterates_frame().shape == (report.iterations, 3)


def test_adapted_matches_m_solution(ens, ce):
    g = build_driver("linear", {"y": 0.5, "z": [0.3]})
    psi = build_free_term("terminal", {"payoff": "linear"})

    Y1, Z1, _ = solve_lipschitz(g, psi, SolverConfig(mode="adapted"), ens, ce=ce)
    Y2, Z2, _ = solve_lipschitz(g, psi, SolverConfig(), ens, ce=ce)

    np.testing.assert_allclose(Y1.values, Y2.values, atol=1e-4)
    np.testing.assert_allclose(Z1.values, Z2.upper().values, atol=1e-3)


def test_get_solver():
    assert get_solver("lipschitz") is solve_lipschitz
    assert get_solver(SolverKind.LIPSCHITZ) is solve_lipschitz


def test_simple_solver_kind(ens, ce):
    cfg = build_config({"type": "simple"})
    solver = get_solver(cfg.kind)

    Y, Z, report = solver(
        build_driver("zero"), build_free_term("constant", {"c": 2.0}), cfg, ens, ce=ce
    )

    np.testing.assert_allclose(Y.values, 2.0, atol=1e-10)
    assert Z.has_lower
    assert report.kind == "simple"
    assert report.converged


def theta_factor(g, psi, cfg, ens, ce, w) -> float:
    """||Theta(x2) - Theta(x1)|| / ||x2 - x1|| for x1 = 0 and x2 = Theta(0)"""
    y1, z1 = zero_iterate(ens, g, cfg.mode)
    y2, z2 = theta_map(y1, z1, g, psi, cfg, ens, ce)
    y3, z3 = theta_map(y2, z2, g, psi, cfg, ens, ce)

    return weighted_norm(y3 - y2, z3 - z2, w) / weighted_norm(y2 - y1, z2 - z1, w)


def test_contraction_factor_decreases_in_beta():
    scenario = load_scenario(BUILTIN_DIR / "contraction.json")
    scenario = replace(scenario, ensemble={"M": 4000, "d": 1, "seed": 0})
    grid = scenario.build_grid()
    ens = generate_paths(grid, scenario.M, seed=scenario.seed)
    g = scenario.build_driver(grid)
    psi = scenario.build_free_term()
    cfg = scenario.build_config()
    ce = ConditionalExpectation(ens, cfg.regression)

    beta = default_beta(g, grid.T)
    factors = []
    for b in (beta, 2 * beta):
        w = build_weight_profile(
            default_alpha2(g, cfg), grid, cfg.p, b, cfg.alpha_floor, cfg.weight_mode
        )
        factors.append(theta_factor(g, psi, cfg, ens, ce, w))

    assert factors[1] <= factors[0] + 1e-9
    assert factors[1] < 1


def exp_volterra_y0(N: int) -> float:
    scenario = load_scenario(BUILTIN_DIR / "exp_volterra.json")
    scenario = replace(
        scenario,
        grid={"T": 1.0, "N": N},
        ensemble={"M": 100, "d": 1, "seed": 0},
        solver={**scenario.solver, "tol": 1e-9, "max_iter": 200},
    )
    grid = scenario.build_grid()
    ens = generate_paths(grid, scenario.M, seed=scenario.seed)

    Y, _, report = solve_lipschitz(
        scenario.build_driver(grid), scenario.build_free_term(), scenario.build_config(), ens
    )
    assert report.converged

    return float(Y.values[:, 0].mean())


@pytest.mark.parametrize("N", [8, 16, 32])
def test_exp_volterra_resolution(N):
    coarse, fine = (abs(exp_volterra_y0(n) - np.e) for n in (N, 2 * N))

    assert fine <= coarse
