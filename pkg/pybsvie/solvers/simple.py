"""The BSVIE with a driver that does not depend on the unknowns, solved through the family of
parameterized BSDEs lambda(t, .) and extended to an M-solution"""
from typing import Callable, Optional, Tuple, Union

import numpy as np

from pybsvie.exceptions import ContractError, InputError, PreconditionError
from pybsvie.model import FreeTerm, PathEnsemble, Process1P, Process2P
from pybsvie.paths import adapted_threshold, check_adapted
from pybsvie.regression import ConditionalExpectation, RegressionConfig
from pybsvie.utils import Domain

FreeTermLike = Union[FreeTerm, np.ndarray]
DriverLike = Union[np.ndarray, Callable[[float, np.ndarray, np.ndarray], np.ndarray]]


def _expectation(ens: PathEnsemble, cfg) -> ConditionalExpectation:
    if isinstance(cfg, ConditionalExpectation):
        return cfg

    return ConditionalExpectation(ens, cfg)


def free_term_values(psi: FreeTermLike, ens: PathEnsemble) -> np.ndarray:
    """psi(t_i) of shape `M x (N+1) x m`"""
    if isinstance(psi, FreeTerm):
        return psi.values(ens)

    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 2:
        psi = psi[..., None]
    if psi.shape[:2] != (ens.M, ens.N + 1):
        raise PreconditionError(f"free term values of shape {psi.shape} do not fit the ensemble!")
    if not np.all(np.isfinite(psi)):
        raise InputError("free term is not finite on the ensemble!")

    return psi


def driver_values(f: DriverLike, ens: PathEnsemble, m: int) -> np.ndarray:
    """f(t_i, t_k) of shape `M x (N+1) x (N+1) x m`. A callable f takes t, the nodes and the
    Brownian states and returns an array of shape `M x (N+1) x m`"""
    n = ens.N + 1
    if callable(f):
        s = ens.grid.nodes
        values = np.stack(
            [np.broadcast_to(f(t, s, ens.states), (ens.M, n, m)) for t in s], axis=1
        )
    else:
        values = np.asarray(f, dtype=float)
        if values.ndim == 3:
            values = values[..., None]
        values = np.broadcast_to(values, (ens.M, n, n, values.shape[-1]))

    if not np.all(np.isfinite(values)):
        raise InputError("driver is not finite on the ensemble!")

    return values


def solve_simple(
    psi: FreeTermLike,
    f: Optional[DriverLike],
    ens: PathEnsemble,
    cfg: Union[RegressionConfig, ConditionalExpectation, None] = None,
) -> Tuple[Process1P, Process2P]:
    """Solve Y(t) = psi(t) + int_t^T f(t,s) ds - int_t^T Z(t,s) dW(s)

    For every t_i the parameterized BSDE
        lambda(t_i, t_j) = E[psi(t_i) + int_{t_j}^T f(t_i, s) ds | F_{t_j}],  j >= i
    is computed by regression, Y(t_i) = lambda(t_i, t_i), and Z(t_i, .) is the integrand of the
    martingale mu(t_i, t_j) = lambda(t_i, t_j) + int_{t_i}^{t_j} f(t_i, s) ds. Each slice j is
    projected once for all parameters t_i <= t_j.

    Parameters
    ----------
    psi : Union[FreeTerm, np.ndarray]
        the free term or its values of shape `M x (N+1) x m`
    f : Optional[Union[np.ndarray, Callable]]
        the driver values f(t_i, t_k) of shape `M x (N+1) x (N+1) x m`, a callable of
        (t, s, W) or None for f = 0
    ens : PathEnsemble
    cfg : Union[RegressionConfig, ConditionalExpectation, None], default=None

    Returns
    -------
    Y : Process1P
    Z : Process2P
        Z on the upper triangle t_i <= t_j. Z(t_i, t_N) repeats Z(t_i, t_{N-1}) and Z(t_N, t_N) = 0

    Raises
    ------
    InputError
        if psi or f is not finite on the ensemble
    """
    ce = _expectation(ens, cfg)
    psi = free_term_values(psi, ens)
    M, n, m = psi.shape
    N, d = n - 1, ens.d
    f = np.zeros((M, n, n, m)) if f is None else driver_values(f, ens, m)

    W_up = ens.grid.upper_weights
    dW = ens.increments
    h = ens.grid.steps
    # int_{t_i}^T f(t_i, s) ds
    diag_tail = np.einsum("ik,pikm->pim", W_up, f)

    Y = np.empty((M, n, m))
    Z = np.zeros((M, n, n, m, d))
    mu_prev = None
    for j in range(n):
        tail = np.einsum("k,pikm->pim", W_up[j], f[:, : j + 1])
        lam = ce.project(psi[:, : j + 1] + tail, j)
        Y[:, j] = lam[:, j]

        mu = lam + diag_tail[:, : j + 1] - tail
        if mu_prev is not None:
            dmu = mu[:, :j] - mu_prev
            Z[:, :j, j - 1] = ce.project(dmu[..., None] * dW[:, j - 1][:, None, None, :], j - 1)
            Z[:, :j, j - 1] /= h[j - 1]
        mu_prev = mu

    Z[:, :N, N] = Z[:, :N, N - 1]

    return Process1P(Y), Process2P(Z, Domain.UPPER)


def m_extend(
    Y: Process1P,
    ens: PathEnsemble,
    cfg: Union[RegressionConfig, ConditionalExpectation, None] = None,
    check: bool = True,
) -> np.ndarray:
    """The martingale representation Y(t_i) = E[Y(t_i)] + sum_{j<i} Z(t_i, t_j) dW_j

    Z(t_i, .) on j < i is the integrand of the martingale nu(t_i, t_j) = E[Y(t_i) | F_{t_j}],
    with nu(t_i, t_i) = Y(t_i). Each slice j is projected once for all t_i >= t_j.

    Parameters
    ----------
    Y : Process1P
    ens : PathEnsemble
    cfg : Union[RegressionConfig, ConditionalExpectation, None], default=None
    check : bool, default=True
        whether to test that Y is adapted first

    Returns
    -------
    np.ndarray
        Z_lower of shape `M x (N+1) x (N+1) x m x d`, zero outside of j < i

    Raises
    ------
    ContractError
        if `check` and Y fails the adaptedness test at some node
    """
    ce = _expectation(ens, cfg)
    values = Y.values
    M, n, m = values.shape
    d = ens.d

    if check:
        threshold = adapted_threshold(M)
        for j in range(n):
            r2 = check_adapted(values, ens, j)
            if r2 > threshold:
                raise ContractError(
                    f"Y is not adapted at t_{j}: R^2 = {r2:0.4f} > {threshold:0.4f}"
                )

    dW = ens.increments
    h = ens.grid.steps
    Z = np.zeros((M, n, n, m, d))
    nu_prev = None
    for j in range(n):
        nu = ce.project(values[:, j:], j)
        nu[:, 0] = values[:, j]

        if nu_prev is not None:
            dnu = nu - nu_prev[:, 1:]
            Z[:, j:, j - 1] = ce.project(dnu[..., None] * dW[:, j - 1][:, None, None, :], j - 1)
            Z[:, j:, j - 1] /= h[j - 1]
        nu_prev = nu

    return Z
