"""A backward-Euler regression scheme for the classical BSDE

    Y(t) = xi + int_t^T g(s, Y(s), Z(s)) ds - int_t^T Z(s) dW(s)

used as an independent oracle for BSVIEs whose data do not depend on t.
"""
from typing import Optional, Tuple, Union

import numpy as np

from pybsvie.exceptions import InputError
from pybsvie.model import Driver, FreeTerm, PathEnsemble
from pybsvie.regression import ConditionalExpectation, RegressionConfig


def solve_bsde(
    xi: Union[FreeTerm, np.ndarray],
    g: Driver,
    ens: PathEnsemble,
    cfg: Union[RegressionConfig, ConditionalExpectation, None] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Run the explicit backward recursion

        Z_j = E[Y_{j+1} dW_j | F_j] / h_j
        Y_j = E[Y_{j+1} | F_j] + g(t_j, E[Y_{j+1} | F_j], Z_j) h_j

    The driver is evaluated at t = s = t_j with zeta = 0, so only drivers that ignore t and zeta
    are meaningful here.

    Parameters
    ----------
    xi : Union[FreeTerm, np.ndarray]
        the terminal value, as a free term evaluated at T or samples of shape `M x m`
    g : Driver
    ens : PathEnsemble
    cfg : Union[RegressionConfig, ConditionalExpectation, None], default=None

    Returns
    -------
    Y : np.ndarray
        shape `M x (N+1) x m`
    Z : np.ndarray
        shape `M x (N+1) x m x d`, with Z_N = Z_{N-1}
    """
    ce = cfg if isinstance(cfg, ConditionalExpectation) else ConditionalExpectation(ens, cfg)
    N, d = ens.N, ens.d
    grid = ens.grid

    if isinstance(xi, FreeTerm):
        xi = xi.values(ens)[:, -1]
    xi = np.asarray(xi, dtype=float).reshape(ens.M, -1)
    if not np.all(np.isfinite(xi)):
        raise InputError("terminal value is not finite on the ensemble!")

    m = xi.shape[1]
    Y = np.empty((ens.M, N + 1, m))
    Z = np.empty((ens.M, N + 1, m, d))
    Y[:, N] = xi

    for j in reversed(range(N)):
        h = grid.steps[j]
        dW = ens.increments[:, j]
        Z[:, j] = ce.project(Y[:, j + 1, :, None] * dW[:, None, :], j) / h
        EY = ce.project(Y[:, j + 1], j)

        t = grid.nodes[j]
        s = grid.nodes[j : j + 1]
        zeta = np.zeros_like(Z[:, j : j + 1])
        g_j = g(t, s, EY[:, None], Z[:, j : j + 1], zeta, ens.states[:, j : j + 1])
        Y[:, j] = EY + g_j[:, 0] * h

    Z[:, N] = Z[:, N - 1]

    return Y, Z
