"""The Picard recursion for drivers that are only rho-continuous in y"""
from typing import Callable, Optional, Sequence, Tuple, Union
import warnings

import numpy as np
from tqdm import tqdm

from pybsvie.exceptions import (
    ConfigurationError,
    ContractError,
    DivergenceError,
    PreconditionError,
)
from pybsvie.model import Driver, FreeTerm, Modulus, PathEnsemble, Process1P, Process2P, TimeGrid
from pybsvie.model.modulus import midpoint_concave
from pybsvie.regression import ConditionalExpectation
from pybsvie.solvers.config import SolverConfig
from pybsvie.solvers.lipschitz import DEFAULT_C, MAX_EXPANSIONS, solve_lipschitz
from pybsvie.solvers.report import SolverReport
from pybsvie.solvers.simple import free_term_values
from pybsvie.utils import SolverMode, Verdict
from pybsvie.warnings import UnprovenRegimeWarning

UNPROVEN = "unproven regime"
BURN_IN = 2
BIHARI_TOL = 1e-4


def mean_square_integral(Y: Union[Process1P, np.ndarray], grid: TimeGrid) -> float:
    """E int_0^T |Y(t)|^2 dt by the trapezoid rule"""
    values = Y.values if isinstance(Y, Process1P) else np.asarray(Y)
    return float(grid.integrate(np.mean(np.sum(values**2, axis=-1), axis=0)))


def picard_solve(
    g: Driver,
    psi: Union[FreeTerm, np.ndarray],
    cfg: SolverConfig,
    ens: PathEnsemble,
    y_init: Optional[Process1P] = None,
    ce: Optional[ConditionalExpectation] = None,
) -> Tuple[Process1P, Process2P, SolverReport]:
    """Solve a BSVIE whose driver is rho-continuous in y by the recursion

        Y_n(t) = psi(t) + int_t^T g(t, s, Y_{n-1}(s), Z_n(t,s), Z_n(s,t)) ds
                 - int_t^T Z_n(t,s) dW(s)

    Each step freezes y at the previous iterate and solves the resulting z-Lipschitz BSVIE with
    `solve_lipschitz`, warm-started at the previous step's solution. The recursion stops once
    E int |Y_n - Y_{n-1}|^2 dt < cfg.outer_tol.

    Parameters
    ----------
    g : Driver
        a driver with a modulus
    psi : Union[FreeTerm, np.ndarray]
    cfg : SolverConfig
    ens : PathEnsemble
    y_init : Optional[Process1P], default=None
        Y_0. If None, Y_0 = 0
    ce : Optional[ConditionalExpectation], default=None

    Returns
    -------
    Y : Process1P
    Z : Process2P
    report : SolverReport
        the distances are the outer distances E int |Y_n - Y_{n-1}|^2 dt

    Raises
    ------
    ConfigurationError
        if g has no modulus
    DivergenceError
        if the outer distance fails to decrease for three consecutive steps
    """
    if g.modulus is None:
        raise ConfigurationError(f'driver "{g.name}" has no modulus for the Picard recursion!')

    grid = ens.grid
    ce = ce or ConditionalExpectation(ens, cfg.regression)
    psi = free_term_values(psi, ens)

    report = SolverReport("picard", cfg.mode.name.lower())
    if g.stochastic_coeffs and cfg.mode == SolverMode.ADAPTED:
        warnings.warn(
            f'driver "{g.name}" has stochastic coefficients: adapted non-Lipschitz solutions are '
            "not covered by a proof",
            UnprovenRegimeWarning,
        )
        report.tags.append(UNPROVEN)

    Y_prev = Process1P.zeros(ens.M, ens.N, g.m) if y_init is None else y_init
    Y, Z = None, None
    steps = tqdm(
        range(cfg.outer_max_iter), desc="Picard steps", unit="step", disable=cfg.verbose < 1
    )
    for _ in steps:
        Y, Z, inner = solve_lipschitz(g, psi, cfg, ens, Y, Z, y_data=Y_prev, ce=ce)

        distance = mean_square_integral(Y.values - Y_prev.values, grid)
        report.record(distance)
        report.norms.append(mean_square_integral(Y, grid))
        report.inner_iterations.append(inner.iterations)
        report.beta = inner.beta
        report.beta_doublings = max(report.beta_doublings, inner.beta_doublings)
        report.contraction_scale = inner.contraction_scale
        report.kernel_condition = inner.kernel_condition
        Y_prev = Y

        if distance < cfg.outer_tol:
            report.converged = True
            break

        if report.consecutive_expansions() >= MAX_EXPANSIONS:
            raise DivergenceError(
                f"Picard distances failed to decrease for {MAX_EXPANSIONS} steps!", report
            )

    return Y, Z, report


def concavity_lemma_check(
    c: Callable[[np.ndarray], np.ndarray],
    samples: Union[Callable[[np.ndarray], np.ndarray], Sequence[float]],
    t: float,
    grid: TimeGrid,
) -> Tuple[float, float]:
    """Both sides of Jensen's inequality for the normalized integral over [t, T]

        1/(T-t) int_t^T c(f(s)) ds <= c(1/(T-t) int_t^T f(s) ds)

    with trapezoid quadrature on the grid nodes, whose weights are nonnegative and sum to T - t.

    Parameters
    ----------
    c : Callable
        a concave function
    samples : Union[Callable, Sequence[float]]
        f as a function of s or its values at the grid nodes
    t : float
        a grid node before T
    grid : TimeGrid

    Returns
    -------
    Tuple[float, float]
        (lhs, rhs)

    Raises
    ------
    PreconditionError
        if t is not a grid node before T or f is negative
    ContractError
        if c fails the midpoint concavity test on [0, max f]
    """
    i = grid.index(t)
    if i == grid.N:
        raise PreconditionError("t must lie before T!")

    f = samples(grid.nodes) if callable(samples) else samples
    f = np.asarray(f, dtype=float)
    if f.shape != grid.nodes.shape:
        raise PreconditionError(f"expected {len(grid)} samples of f, got {f.shape}")
    if np.any(f < 0):
        raise PreconditionError("f must be nonnegative!")

    hi = max(float(f.max()), 1e-12)
    if not midpoint_concave(c, 0.0, hi):
        raise ContractError("c fails the midpoint concavity test!")

    w = grid.trapezoid_weights(i) / (grid.T - grid.nodes[i])
    lhs = float(w @ np.asarray(c(f), dtype=float))
    rhs = float(c(np.array(w @ f)))

    return lhs, rhs


def bihari_monitor(
    distances: Sequence[float],
    modulus: Modulus,
    C: float = DEFAULT_C,
    tol: float = BIHARI_TOL,
    burn_in: int = BURN_IN,
    slack: float = 0.0,
) -> Verdict:
    """Check a sequence of Picard distances against the conclusion of Bihari's inequality

    The sequence is CONSISTENT if, after `burn_in` steps, it decreases strictly while above `tol`
    and stays below `tol` once it gets there, it obeys phi_n <= C rho(phi_{n-1}) + slack, and its
    last value is below `tol`. A sequence of zeros is CONSISTENT.
    """
    phi = np.asarray(distances, dtype=float)
    if phi.size == 0 or np.all(phi == 0):
        return Verdict.CONSISTENT
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        return Verdict.VIOLATED

    tail = phi[burn_in:] if phi.size > burn_in else phi[-1:]
    before, after = tail[:-1], tail[1:]
    floor = before < tol
    if np.any(~floor & (after >= before)) or np.any(floor & (after >= tol)):
        return Verdict.VIOLATED
    if phi[-1] >= tol:
        return Verdict.VIOLATED

    prev, nxt = phi[max(burn_in, 1) - 1 : -1], phi[max(burn_in, 1) :]
    if np.any(nxt > C * modulus(prev) + slack):
        return Verdict.VIOLATED

    return Verdict.CONSISTENT


def gronwall_bound(
    a: float,
    b: float,
    data_mass: float,
    T: float,
    lipschitz_mass: float = 1.0,
    C: float = DEFAULT_C,
) -> float:
    """(C1 + C2 data_mass) e^{C3 T} with C1 = C a K T^2, C2 = C and C3 = C b K, where K is the
    sup of L^2 r1^2

    Growth |g(t,s,y,...)| <= |g(t,s,0,0,0)| + L r1 rho(|y|^2)^{1/2} together with
    rho(u) <= a + b u gives, for every Picard step,
        E|Y_n(t)|^2 <= C1 + C2 data_mass + C3 int_t^T E|Y_{n-1}(s)|^2 ds
    and Gronwall's inequality turns this into a bound uniform in n."""
    C1 = C * a * lipschitz_mass * T**2
    C3 = C * b * lipschitz_mass
    with np.errstate(over="ignore"):
        return float((C1 + C * data_mass) * np.exp(C3 * T))


def gronwall_bound_check(
    norm_seq: Sequence[float],
    a: float,
    b: float,
    data_mass: float,
    T: float = 1.0,
    lipschitz_mass: float = 1.0,
    C: float = DEFAULT_C,
) -> bool:
    """whether sup_n E int |Y_n|^2 is finite and below `gronwall_bound`

    Parameters
    ----------
    norm_seq : Sequence[float]
        E int |Y_n|^2 dt for each Picard step
    a, b : float
        the linear bound rho(u) <= a + b u of the modulus
    data_mass : float
        E int |psi|^2 dt + E int (int_t^T |g(t,s,0,0,0)| ds)^2 dt
    T : float, default=1.0
    lipschitz_mass : float, default=1.0
        sup L^2 r1^2
    C : float, default=64
    """
    norms = np.asarray(norm_seq, dtype=float)
    if norms.size == 0:
        return True
    if not np.all(np.isfinite(norms)):
        return False

    return bool(norms.max() <= gronwall_bound(a, b, data_mass, T, lipschitz_mass, C))
