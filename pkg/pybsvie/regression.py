"""Least-squares conditional expectations E[X | F_{t_j}] on path features"""
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import comb

from pybsvie.exceptions import (
    CapacityError,
    ConfigurationError,
    ContractError,
    NumericalRankError,
    PreconditionError,
)
from pybsvie.model import FEATURES, FreeTerm, PathEnsemble

DEFAULT_RIDGE_SCALE = 1e-8
RANK_RTOL = 1e-7
ORACLE_FEATURES = {"W_t", "W_T"}
ORACLE_CHUNK = 2_000_000


@dataclass
class RegressionConfig:
    """
    Attributes
    ----------
    degree : int
        the maximal total degree of the monomial basis
    features : Tuple[str, ...]
        the path features the basis is built from, a subset of ("W", "int_W")
    ridge : Optional[float]
        the ridge added to the non-constant diagonal of the normal matrix. If None, use
        1e-8 * trace / (number of basis functions)
    """

    degree: int = 3
    features: Tuple[str, ...] = ("W",)
    ridge: Optional[float] = None

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigurationError(f"basis degree must be nonnegative! got: {self.degree}")

        self.features = tuple([self.features] if isinstance(self.features, str) else self.features)
        unknown = set(self.features) - set(FEATURES)
        if unknown or not self.features:
            raise ConfigurationError(
                f"regression features must be a nonempty subset of {FEATURES}! got: {self.features}"
            )
        if self.ridge is not None and self.ridge < 0:
            raise ConfigurationError(f"ridge must be nonnegative! got: {self.ridge}")

    def basis_size(self, d: int) -> int:
        """the number of basis functions for d-dimensional features"""
        return int(comb(len(self.features) * d + self.degree, self.degree, exact=True))


@dataclass
class _Slice:
    center: np.ndarray
    scale: np.ndarray
    keep: np.ndarray
    basis: np.ndarray
    factor: Optional[Tuple]


class ConditionalExpectation:
    """Per-slice least-squares projections on a fixed ensemble

    The basis at slice j is the constant plus all monomials of total degree <= `cfg.degree` in the
    standardized features observable at t_j. Features with zero sample variance are dropped, so at
    t_0 the projection is the sample mean. Each slice is assembled and factored once and then
    reused by every projection onto it.

    Parameters
    ----------
    ens : PathEnsemble
    cfg : Optional[RegressionConfig], default=None

    Raises
    ------
    ConfigurationError
        if the basis has at least M/10 functions
    """

    def __init__(self, ens: PathEnsemble, cfg: Optional[RegressionConfig] = None):
        self.ens = ens
        self.cfg = cfg or RegressionConfig()

        K = self.cfg.basis_size(ens.d)
        if not K < ens.M / 10:
            raise ConfigurationError(
                f"{K} basis functions over-fit {ens.M} paths! Need fewer than M/10 = {ens.M / 10}"
            )

        self._slices: Dict[int, _Slice] = {}

    @property
    def N(self) -> int:
        return self.ens.N

    def features(self, j: int) -> np.ndarray:
        feats = self.ens.features(j)
        return np.column_stack([feats[f] for f in self.cfg.features])

    def _slice(self, j: int) -> _Slice:
        if j in self._slices:
            return self._slices[j]

        X = self.features(j)
        center = X.mean(axis=0)
        scale = X.std(axis=0)
        keep = scale > 1e-12 * np.maximum(1.0, np.abs(center))
        U = (X[:, keep] - center[keep]) / scale[keep]

        columns = [np.ones(len(U))]
        for k in range(1, self.cfg.degree + 1):
            for idxs in combinations_with_replacement(range(U.shape[1]), k):
                columns.append(np.prod(U[:, idxs], axis=1))
        basis = np.column_stack(columns)

        G = basis.T @ basis
        K = G.shape[0]
        ridge = DEFAULT_RIDGE_SCALE * np.trace(G) / K if self.cfg.ridge is None else self.cfg.ridge
        G[np.arange(1, K), np.arange(1, K)] += ridge

        try:
            factor = cho_factor(G, check_finite=False)
            pivots = np.abs(np.diag(factor[0]))
            if not np.all(np.isfinite(pivots)) or pivots.min() <= RANK_RTOL * pivots.max():
                raise LinAlgError("rank-deficient normal matrix")
        except LinAlgError:
            raise NumericalRankError(
                f"normal equations at slice j={j} are singular! Use a ridge > 0 "
                f"(got ridge={self.cfg.ridge})"
            )

        self._slices[j] = _Slice(center, scale, keep, basis, factor)
        return self._slices[j]

    def project(self, X: np.ndarray, j: int) -> np.ndarray:
        """the fitted values of the regression of X on the basis at t_j

        Parameters
        ----------
        X : np.ndarray
            samples of shape `M x ...`. Every trailing entry is regressed separately
        j : int

        Returns
        -------
        np.ndarray
            an array of the same shape as X. At j = N this is X itself
        """
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.ens.M:
            raise PreconditionError(f"expected {self.ens.M} samples, got {X.shape[0]}!")
        if not 0 <= j <= self.N:
            raise PreconditionError(f"slice index must lie in [0, {self.N}]! got: {j}")
        if j == self.N:
            return X.copy()

        s = self._slice(j)
        Y = X.reshape(len(X), -1)
        coef = cho_solve(s.factor, s.basis.T @ Y, check_finite=False)

        return (s.basis @ coef).reshape(X.shape)

    def martingale_integrand(self, mart: np.ndarray) -> np.ndarray:
        """Z_j = E[(mart_{j+1} - mart_j) dW_j | F_{t_j}] / h_j for j < N, Z_N = Z_{N-1}

        Parameters
        ----------
        mart : np.ndarray
            martingale samples of shape `M x (N+1) x ...`

        Returns
        -------
        np.ndarray
            the integrand of shape `M x (N+1) x ... x d`
        """
        mart = np.asarray(mart, dtype=float)
        dW = self.ens.increments
        h = self.ens.grid.steps
        tail = mart.shape[2:]
        expand = (slice(None),) + (None,) * len(tail) + (slice(None),)

        Z = np.empty((*mart.shape, self.ens.d))
        for j in range(self.N):
            dmart = (mart[:, j + 1] - mart[:, j])[..., None]
            Z[:, j] = self.project(dmart * dW[:, j][expand], j) / h[j]
        Z[:, self.N] = Z[:, self.N - 1]

        return Z


def project(
    samples: np.ndarray, j: int, ens: PathEnsemble, cfg: Optional[RegressionConfig] = None
) -> np.ndarray:
    """a one-off projection. Reuse a ConditionalExpectation to project onto a slice repeatedly"""
    return ConditionalExpectation(ens, cfg).project(samples, j)


def martingale_integrand(
    mart: np.ndarray, ens: PathEnsemble, cfg: Optional[RegressionConfig] = None
) -> np.ndarray:
    return ConditionalExpectation(ens, cfg).martingale_integrand(mart)


def nested_mc_oracle(
    functional: FreeTerm,
    j: int,
    ens: PathEnsemble,
    branches: int = 1000,
    i: Optional[int] = None,
    seed: int = 0,
    max_draws: int = 1_000_000_000,
) -> np.ndarray:
    """Estimate E[psi(t_i) | F_{t_j}] on every path by brute-force re-simulation

    From the state W(t_j) of each path, `branches` futures of W(t_i) and W(T) are drawn from
    their exact Gaussian laws and psi is averaged over them.

    Parameters
    ----------
    functional : FreeTerm
        psi. It may only read the features "W_t" and "W_T"
    j : int
        the conditioning slice
    ens : PathEnsemble
    branches : int, default=1000
    i : Optional[int], default=None
        the parameter index of psi. If None, use j
    seed : int, default=0
    max_draws : int
        the budget for M*branches

    Returns
    -------
    np.ndarray
        the estimates of shape `M x m`

    Raises
    ------
    ContractError
        if psi declares a feature that is not a function of (W(t_i), W(T))
    CapacityError
        if M*branches exceeds `max_draws`
    """
    undeclared = set(functional.feature_tags) - ORACLE_FEATURES
    if undeclared:
        raise ContractError(
            f'free term "{functional.name}" depends on {sorted(undeclared)}, '
            "which the oracle cannot re-simulate!"
        )
    if ens.M * branches > max_draws:
        raise CapacityError(f"{ens.M} x {branches} branches exceed the budget of {max_draws}!")

    grid = ens.grid
    i = j if i is None else i
    t_i, t_j, T = grid.nodes[i], grid.nodes[j], grid.T
    rng = np.random.default_rng(np.random.SeedSequence([seed, j]))

    W = ens.states
    d, m = ens.d, functional.dim
    out = np.empty((ens.M, m))
    chunk = max(1, ORACLE_CHUNK // (branches * d))
    for start in range(0, ens.M, chunk):
        stop = min(start + chunk, ens.M)
        n = stop - start
        Wj = W[start:stop, j][:, None, :]

        if i > j:
            Wi = Wj + np.sqrt(t_i - t_j) * rng.standard_normal((n, branches, d))
            WT = Wi + np.sqrt(T - t_i) * rng.standard_normal((n, branches, d))
        else:
            Wi = np.broadcast_to(W[start:stop, i][:, None, :], (n, branches, d))
            WT = Wj + np.sqrt(T - t_j) * rng.standard_normal((n, branches, d))

        feats = {"W_t": Wi.reshape(-1, d), "W_T": WT.reshape(-1, d)}
        values = np.broadcast_to(functional(t_i, feats), (n * branches, m))
        out[start:stop] = values.reshape(n, branches, m).mean(axis=1)

    return out
