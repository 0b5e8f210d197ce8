"""Residuals of the solved equations and the a priori estimates, evaluated as grid sums.

The estimate checks compare path means of two nonnegative samples. Each `*_terms` function
returns those samples path by path so that `ratio_se` can attach a Monte Carlo standard error to
the ratio of their means."""
from typing import Optional, Tuple, Union
import warnings

import numpy as np

from pybsvie.model import Driver, FreeTerm, PathEnsemble, Process1P, Process2P, WeightProfile
from pybsvie.solvers.simple import driver_values, free_term_values
from pybsvie.utils import safe_ratio
from pybsvie.warnings import StatisticalSlackWarning

PSI_CONSTANT = 20.0
F_CONSTANT = 47.0
GENERIC_C = 64.0
SE_MULTIPLE = 3.0
ROUNDING = 1e-12

Samples = Tuple[np.ndarray, np.ndarray]


def _sq(x: np.ndarray, axes=-1) -> np.ndarray:
    return np.sum(x**2, axis=axes)


def _psi_values(psi: Union[FreeTerm, np.ndarray], ens: Optional[PathEnsemble]) -> np.ndarray:
    psi = free_term_values(psi, ens) if isinstance(psi, FreeTerm) else np.asarray(psi)

    return psi[..., None] if psi.ndim == 2 else psi


def bsvie_residual(
    Y: Process1P,
    Z: Process2P,
    g: Driver,
    psi: Union[FreeTerm, np.ndarray],
    ens: PathEnsemble,
) -> np.ndarray:
    """E|Y(t_i) - psi(t_i) - int_{t_i}^T g ds + sum_{j >= i} Z(t_i, t_j) dW_j|^2 for every i

    The ds-integral is a trapezoid sum of g(t_i, t_j, Y(t_j), Z(t_i, t_j), Z(t_j, t_i)), where the
    reflected argument is used only if Z carries a lower triangle.

    Returns
    -------
    np.ndarray
        the residuals of shape `N+1`
    """
    grid = ens.grid
    psi = free_term_values(psi, ens)
    f = g.freeze(Y, Z, ens, g.uses_zeta and Z.has_lower)

    drift = np.einsum("ik,pikm->pim", grid.upper_weights, f)
    U = Z.upper().values[:, :, :-1]
    noise = np.einsum("pijmd,pjd->pim", U, ens.increments)

    return np.mean(_sq(Y.values - psi - drift + noise), axis=0)


def m_identity_residual(Y: Process1P, Z: Process2P, ens: PathEnsemble) -> np.ndarray:
    """E|Y(t_i) - E Y(t_i) - sum_{j<i} Z(t_i, t_j) dW_j|^2 for every i

    Raises
    ------
    ContractError
        if Z has no lower triangle
    """
    lower = Z.lower()[:, :, :-1]
    noise = np.einsum("pijmd,pjd->pim", lower, ens.increments)
    centered = Y.values - Y.values.mean(axis=0)

    return np.mean(_sq(centered - noise), axis=0)

def _weighted_upper(values2: np.ndarray, e: np.ndarray, W_up: np.ndarray) -> np.ndarray:
    """sum_k W_up[i, k] e_k values2[..., i, k] for every i"""
    return np.sum(W_up * values2 * e, axis=-1)


def ratio_se(lhs: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """The ratio of the path means of two samples and its delta-method standard error

        se = sd(lhs - ratio * rhs) / (sqrt(M) * mean(rhs))

    Parameters
    ----------
    lhs : np.ndarray
    rhs : np.ndarray
        samples with the paths on the first axis

    Returns
    -------
    ratio : np.ndarray
        mean(lhs) / mean(rhs), with 0/0 = 0
    se : np.ndarray
        the standard error of the ratio, 0 for a single path
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    M = len(lhs)

    ratio = safe_ratio(lhs.mean(axis=0), rhs.mean(axis=0))
    finite = np.where(np.isfinite(ratio), ratio, 0.0)
    if M > 1:
        sd = np.std(lhs - finite * rhs, axis=0, ddof=1)
    else:
        sd = np.zeros_like(finite)
    se = safe_ratio(sd / np.sqrt(M), rhs.mean(axis=0))

    return ratio, se


def estimate_6_terms(
    Y: Process1P,
    Z: Process2P,
    psi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
) -> Samples:
    """the per-path samples of both sides of `verify_estimate_6`, each of shape `M`"""
    grid = w.grid
    e = w.weights
    psi = _psi_values(psi, ens)

    Z2 = _sq(Z.upper().values, (-2, -1))
    lhs = grid.integrate(e * _sq(Y.values))
    lhs = lhs + grid.integrate(_weighted_upper(Z2, e, grid.upper_weights))

    f2 = _sq(np.asarray(f)) / w.alpha2
    rhs = PSI_CONSTANT * w.terminal_weight * grid.integrate(_sq(psi))
    rhs = rhs + F_CONSTANT / w.beta * grid.integrate(_weighted_upper(f2, e, grid.upper_weights))

    return lhs, rhs


def verify_estimate_6(
    Y: Process1P,
    Z: Process2P,
    psi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
) -> float:
    """The ratio of
        E int e^{beta A(t)} |Y|^2 dt + E int int_{t <= s} e^{beta A(s)} |Z(t,s)|^2 ds dt
    to
        20 e^{beta A(T)} E int |psi|^2 dt
            + (47/beta) E int int_{t <= s} e^{beta A(s)} |f(t,s)|^2 / alpha^2(s) ds dt

    Parameters
    ----------
    Y : Process1P
    Z : Process2P
    psi : Union[FreeTerm, np.ndarray]
        the free term or its values of shape `M x (N+1) x m`
    f : np.ndarray
        the driver values f(t_i, t_k) of shape `M x (N+1) x (N+1) x m`
    w : WeightProfile
    ens : Optional[PathEnsemble], default=None
        required if psi is a FreeTerm

    Returns
    -------
    float
        lhs / rhs, with 0/0 = 0
    """
    ratio, _ = ratio_se(*estimate_6_terms(Y, Z, psi, f, w, ens))

    return float(ratio)


def estimate_30_terms(
    Y: Process1P,
    Z: Process2P,
    psi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
    C: float = GENERIC_C,
) -> Samples:
    """the per-path samples of both sides of `verify_estimate_30`, each of shape `M x (N+1)`"""
    grid = w.grid
    beta = w.beta
    e = np.exp(beta * grid.nodes)
    psi = _psi_values(psi, ens)

    Z2 = _sq(Z.upper().values, (-2, -1))
    lhs = e * _sq(Y.values) + _weighted_upper(Z2, e, grid.upper_weights)

    f2 = _sq(np.asarray(f))
    rhs = C * e[-1] * _sq(psi) + C / beta * _weighted_upper(f2, e, grid.upper_weights)

    return lhs, rhs


def verify_estimate_30(
    Y: Process1P,
    Z: Process2P,
    psi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
    C: float = GENERIC_C,
) -> np.ndarray:
    """The per-t ratio of
        E e^{beta t} |Y(t)|^2 + E int_t^T e^{beta s} |Z(t,s)|^2 ds
    to
        C E e^{beta T} |psi(t)|^2 + (C/beta) E int_t^T e^{beta s} |f(t,s)|^2 ds

    The weights are e^{beta t}, i.e. those of constant coefficients. The terminal-form estimate of
    `verify_estimate_31` is the stronger of the two.

    Returns
    -------
    np.ndarray
        the ratios of shape `N+1`, with 0/0 = 0
    """
    ratio, _ = ratio_se(*estimate_30_terms(Y, Z, psi, f, w, ens, C))

    return ratio


def estimate_31_terms(
    Y: Process1P,
    Z: Process2P,
    xi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
) -> Samples:
    """the per-path samples of both sides of `verify_estimate_31`, each of shape `M x (N+1)`"""
    grid = w.grid
    beta = w.beta
    e = np.exp(beta * grid.nodes)
    if isinstance(xi, FreeTerm):
        xi = free_term_values(xi, ens)[:, -1]
    xi = np.asarray(xi, dtype=float).reshape(len(Y.values), -1)

    Z2 = _sq(Z.upper().values, (-2, -1))
    lhs = e * _sq(Y.values) + _weighted_upper(Z2, e, grid.upper_weights)

    f2 = _sq(np.asarray(f))
    rhs = e[-1] * _sq(xi)[:, None] + _weighted_upper(f2, e, grid.upper_weights) / beta

    return lhs, rhs


def verify_estimate_31(
    Y: Process1P,
    Z: Process2P,
    xi: Union[FreeTerm, np.ndarray],
    f: np.ndarray,
    w: WeightProfile,
    ens: Optional[PathEnsemble] = None,
) -> np.ndarray:
    """The per-t ratio of
        E e^{beta t} |Y(t)|^2 + E int_t^T e^{beta s} |Z(t,s)|^2 ds
    to
        e^{beta T} E |xi|^2 + (1/beta) E int_t^T e^{beta s} |f(t,s)|^2 ds

    for a free term psi(t) = xi that does not depend on t. `xi` may be the terminal samples of
    shape `M x m` or a FreeTerm, which is evaluated at T.
    """
    ratio, _ = ratio_se(*estimate_31_terms(Y, Z, xi, f, w, ens))

    return ratio


def lower_triangle_energy_terms(Y: Process1P, Z: Process2P, w: WeightProfile) -> Samples:
    """the per-path samples of both sides of `lower_triangle_energy`, each of shape `M`"""
    grid = w.grid
    e = w.weights
    Z2 = _sq(Z.lower(), (-2, -1))
    lhs = grid.integrate(_weighted_upper(Z2, e, grid.lower_weights))
    rhs = grid.integrate(e * _sq(Y.values))

    return lhs, rhs


def lower_triangle_energy(Y: Process1P, Z: Process2P, w: WeightProfile) -> Tuple[float, float]:
    """(E int int_{s < t} e^{beta A(s)} |Z(t,s)|^2 ds dt, E int e^{beta A(t)} |Y(t)|^2 dt)

    Raises
    ------
    ContractError
        if Z has no lower triangle
    """
    lhs, rhs = lower_triangle_energy_terms(Y, Z, w)

    return float(lhs.mean()), float(rhs.mean())


def smallest_passing_constant(lhs, rhs_unit) -> float:
    """the smallest C with lhs <= C rhs_unit everywhere"""
    return float(np.max(safe_ratio(lhs, rhs_unit)))


def passes(ratio, se=0.0, k: float = SE_MULTIPLE) -> bool:
    """whether every ratio is finite and at most 1 + k * se, elementwise. Passing ratios above 1
    warn"""
    ratio = np.asarray(ratio, dtype=float)
    slack = k * np.asarray(se, dtype=float) + ROUNDING
    ok = np.isfinite(ratio) & (ratio <= 1 + slack)
    if np.any(ok & (ratio > 1 + ROUNDING)):
        worst = float(np.max(np.where(ok, ratio, -np.inf)))
        warnings.warn(
            f"ratio {worst:0.4f} exceeds 1 within {k:g} standard errors", StatisticalSlackWarning
        )

    return bool(np.all(ok))


def data_mass(psi: Union[FreeTerm, np.ndarray], g: Driver, ens: PathEnsemble) -> float:
    """E int |psi|^2 dt + E int (int_t^T |g(t, s, 0, 0, 0)| ds)^2 dt"""
    grid = ens.grid
    psi = free_term_values(psi, ens)
    M, n, m = psi.shape

    y0 = np.zeros((M, n, g.m))
    z0 = np.zeros((M, n, g.m, ens.d))
    g0 = driver_values(lambda t, s, W: g(t, s, y0, z0, z0, W), ens, g.m)
    inner = np.einsum("ik,pik->pi", grid.upper_weights, np.linalg.norm(g0, axis=-1))

    return float(grid.integrate(np.mean(_sq(psi), axis=0) + np.mean(inner**2, axis=0)))
