"""The fixed-point map Theta and its iteration for Lipschitz drivers"""
from typing import Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from pybsvie.exceptions import ContractError, DivergenceError, ModeError, PreconditionError
from pybsvie.model import (
    Driver,
    FreeTerm,
    PathEnsemble,
    Process1P,
    Process2P,
    WeightProfile,
    build_weight_profile,
    kernel_condition,
)
from pybsvie.regression import ConditionalExpectation
from pybsvie.solvers.config import SolverConfig
from pybsvie.solvers.report import SolverReport
from pybsvie.solvers.simple import free_term_values, m_extend, solve_simple
from pybsvie.utils import Domain, SolverMode, WeightMode

DEFAULT_C = 64.0
MAX_EXPANSIONS = 3


def weighted_norm(
    y: Optional[Process1P],
    z: Optional[Process2P],
    w: WeightProfile,
    domain: Union[Domain, str] = Domain.FULL,
) -> float:
    """[E int e^{beta A(t)} |y(t)|^2 dt + E int int e^{beta A(s)} |z(t,s)|^2 ds dt]^(1/2)

    The outer t-integrals are trapezoid sums. The s-integral runs over [t, T] (trapezoid) on the
    UPPER domain and additionally over [0, t) (left endpoint) on the FULL square.

    Raises
    ------
    ContractError
        if the FULL domain is requested for a z without a lower triangle
    """
    domain = Domain.coerce(domain)
    grid = w.grid
    e = w.weights
    total = 0.0

    if y is not None:
        total += grid.integrate(np.mean(np.sum(y.values**2, axis=-1), axis=0) * e)

    if z is not None:
        if domain == Domain.FULL and not z.has_lower:
            raise ContractError("the square-domain norm needs z with a lower triangle!")
        S = grid.square_weights if domain == Domain.FULL else grid.upper_weights
        z2 = np.mean(np.sum(z.values**2, axis=(-2, -1)), axis=0)
        total += grid.integrate(np.sum(S * z2 * e[None, :], axis=1))

    return float(np.sqrt(total))


def default_alpha2(g: Driver, cfg: SolverConfig, frozen_y: bool = False) -> float:
    """max(r1^2 + r2^2 + r3^2, alpha_floor), without r1 when y is frozen"""
    if cfg.alpha2 is not None:
        return float(cfg.alpha2)

    r2 = g.coeff_sq_sum - (g.r1**2 if frozen_y else 0.0)
    return max(r2, cfg.alpha_floor)


def default_beta(g: Driver, T: float, frozen_y: bool = False) -> float:
    """max(8, 4 sup L^2 sum r_i^2 T)"""
    r2 = g.coeff_sq_sum - (g.r1**2 if frozen_y else 0.0)
    return max(8.0, 4 * g.kernel.sup**2 * r2 * T)


def theta_map(
    y: Process1P,
    z: Process2P,
    g: Driver,
    psi: Union[FreeTerm, np.ndarray],
    cfg: SolverConfig,
    ens: PathEnsemble,
    ce: Optional[ConditionalExpectation] = None,
    y_data: Optional[Process1P] = None,
) -> Tuple[Process1P, Process2P]:
    """Theta(y, z): freeze f(t,s) = g(t, s, y(s), z(t,s), z(s,t)) and solve the simple BSVIE

    In M_SOLUTION mode the output is extended to an M-solution. In ADAPTED mode only Z on
    t <= s is computed and the driver may not read zeta.

    Parameters
    ----------
    y : Process1P
    z : Process2P
    g : Driver
    psi : Union[FreeTerm, np.ndarray]
    cfg : SolverConfig
    ens : PathEnsemble
    ce : Optional[ConditionalExpectation], default=None
        a cached projector on `ens`
    y_data : Optional[Process1P], default=None
        if given, freeze y at this process instead of `y`

    Raises
    ------
    ModeError
        if the driver reads zeta in ADAPTED mode
    """
    if cfg.mode == SolverMode.ADAPTED and g.uses_zeta:
        raise ModeError(f'driver "{g.name}" reads Z(s,t), which adapted solutions do not define!')

    ce = ce or ConditionalExpectation(ens, cfg.regression)
    use_zeta = g.uses_zeta and cfg.mode == SolverMode.M_SOLUTION
    if use_zeta and not z.has_lower:
        raise ContractError("the driver reads Z(s,t) but z has no lower triangle!")

    f = g.freeze(y if y_data is None else y_data, z, ens, use_zeta)
    Y, Z = solve_simple(psi, f, ens, ce)

    if cfg.mode == SolverMode.M_SOLUTION:
        Z = Z.with_lower(m_extend(Y, ens, ce, check=False))

    return Y, Z


def zero_iterate(ens: PathEnsemble, g: Driver, mode: SolverMode) -> Tuple[Process1P, Process2P]:
    domain = Domain.FULL if mode == SolverMode.M_SOLUTION else Domain.UPPER
    return Process1P.zeros(ens.M, ens.N, g.m), Process2P.zeros(ens.M, ens.N, g.m, ens.d, domain)


def _iterate(
    g: Driver,
    psi: np.ndarray,
    cfg: SolverConfig,
    ens: PathEnsemble,
    ce: ConditionalExpectation,
    w: WeightProfile,
    report: SolverReport,
    y0: Process1P,
    z0: Process2P,
    y_data: Optional[Process1P],
) -> Tuple[Process1P, Process2P]:
    domain = Domain.FULL if cfg.mode == SolverMode.M_SOLUTION else Domain.UPPER
    Y, Z = y0, z0

    for _ in tqdm(range(cfg.max_iter), desc="Iterating", unit="iter", disable=cfg.verbose < 2):
        Y_new, Z_new = theta_map(Y, Z, g, psi, cfg, ens, ce, y_data)
        distance = weighted_norm(Y_new - Y, Z_new - Z, w, domain)
        report.record(distance)
        Y, Z = Y_new, Z_new

        if distance < cfg.tol:
            report.converged = True
            break

        if report.consecutive_expansions() >= MAX_EXPANSIONS:
            raise DivergenceError(
                f"Theta failed to contract for {MAX_EXPANSIONS} iterations at beta={w.beta}! "
                "Try a larger beta",
                report,
            )

    return Y, Z


def solve_lipschitz(
    g: Driver,
    psi: Union[FreeTerm, np.ndarray],
    cfg: SolverConfig,
    ens: PathEnsemble,
    y0: Optional[Process1P] = None,
    z0: Optional[Process2P] = None,
    y_data: Optional[Process1P] = None,
    ce: Optional[ConditionalExpectation] = None,
) -> Tuple[Process1P, Process2P, SolverReport]:
    """Iterate Theta from (y0, z0) until the weighted distance of successive iterates is below
    cfg.tol

    The distance is the weighted norm on the square in M_SOLUTION mode and on t <= s in ADAPTED
    mode. When Theta fails to contract for three consecutive iterations, beta is doubled and the
    iteration restarted, at most cfg.max_doublings times.

    Parameters
    ----------
    g : Driver
    psi : Union[FreeTerm, np.ndarray]
    cfg : SolverConfig
    ens : PathEnsemble
    y0 : Optional[Process1P], default=None
    z0 : Optional[Process2P], default=None
        the initial iterate. If None, start from (0, 0)
    y_data : Optional[Process1P], default=None
        if given, the y-argument of g is frozen at this process
    ce : Optional[ConditionalExpectation], default=None

    Returns
    -------
    Y : Process1P
    Z : Process2P
    report : SolverReport

    Raises
    ------
    ModeError
        if g has stochastic coefficients in M_SOLUTION mode or reads zeta in ADAPTED mode
    PreconditionError
        if the star weights are requested with alpha^2 < 1
    DivergenceError
        if Theta fails to contract even after cfg.max_doublings doublings of beta
    """
    if cfg.mode == SolverMode.M_SOLUTION and g.stochastic_coeffs:
        raise ModeError(
            f'driver "{g.name}" has stochastic coefficients, which M-solutions do not admit!'
        )
    if cfg.mode == SolverMode.ADAPTED and g.uses_zeta:
        raise ModeError(f'driver "{g.name}" reads Z(s,t), which adapted solutions do not define!')

    grid = ens.grid
    frozen_y = y_data is not None
    alpha2 = default_alpha2(g, cfg, frozen_y)
    if cfg.weight_mode == WeightMode.A_STAR and alpha2 < 1:
        raise PreconditionError(f"star weights need alpha^2 >= 1! got: {alpha2}")

    beta = cfg.beta or default_beta(g, grid.T, frozen_y)
    w = build_weight_profile(alpha2, grid, cfg.p, beta, cfg.alpha_floor, cfg.weight_mode)

    ce = ce or ConditionalExpectation(ens, cfg.regression)
    psi = free_term_values(psi, ens)
    if y0 is None or z0 is None:
        y0, z0 = zero_iterate(ens, g, cfg.mode)

    kcond = kernel_condition(g.kernel, grid, g.q)

    for doublings in range(cfg.max_doublings + 1):
        report = SolverReport(
            "lipschitz",
            cfg.mode.name.lower(),
            beta=w.beta,
            beta_doublings=doublings,
            contraction_scale=w.contraction_scale(),
            kernel_condition=kcond,
        )
        try:
            Y, Z = _iterate(g, psi, cfg, ens, ce, w, report, y0, z0, y_data)
            break
        except DivergenceError as e:
            if doublings == cfg.max_doublings:
                raise DivergenceError(
                    f"{e} (gave up after {cfg.max_doublings} doublings of beta)", e.report
                )
            if cfg.verbose > 0:
                print(f"Doubling beta to {2 * w.beta:0.3g}", flush=True)
            w = w.with_beta(2 * w.beta)

    return Y, Z, report


def stability_gap(
    sol1: Tuple[Process1P, Process2P],
    sol2: Tuple[Process1P, Process2P],
    psi1: Union[FreeTerm, np.ndarray],
    psi2: Union[FreeTerm, np.ndarray],
    g1: Driver,
    g2: Driver,
    S: float,
    ens: PathEnsemble,
    C: float = DEFAULT_C,
) -> Tuple[float, float]:
    """Both sides of the stability estimate on [S, T]

        E int_S^T |Y - Y'|^2 dt + E int_S^T int_S^T |Z - Z'|^2 ds dt
            <= C E int_S^T |psi - psi'|^2 dt + C E int_S^T (int_t^T |g - g'| ds)^2 dt

    with g and g' both evaluated at the first solution. Z is integrated over the square when both
    solutions carry a lower triangle and over t <= s otherwise.

    Returns
    -------
    Tuple[float, float]
        (lhs, rhs)
    """
    grid = ens.grid
    k = grid.index(S)
    w_S = grid.trapezoid_weights(k)
    (Y1, Z1), (Y2, Z2) = sol1, sol2

    dY = np.mean(np.sum((Y1.values - Y2.values) ** 2, axis=-1), axis=0)
    dZ = Z1 - Z2
    dZ2 = np.mean(np.sum(dZ.values**2, axis=(-2, -1)), axis=0)
    if not dZ.has_lower:
        dZ2 = dZ2 * np.triu(np.ones_like(dZ2))
    lhs = w_S @ dY + w_S @ dZ2 @ w_S

    dpsi = free_term_values(psi1, ens) - free_term_values(psi2, ens)
    dpsi2 = np.mean(np.sum(dpsi**2, axis=-1), axis=0)

    use_zeta = Z1.has_lower
    dg = np.linalg.norm(
        g1.freeze(Y1, Z1, ens, use_zeta and g1.uses_zeta)
        - g2.freeze(Y1, Z1, ens, use_zeta and g2.uses_zeta),
        axis=-1,
    )
    inner = np.einsum("ik,pik->pi", grid.upper_weights, dg)
    rhs = w_S @ dpsi2 + w_S @ np.mean(inner**2, axis=0)

    return float(lhs), float(C * rhs)
