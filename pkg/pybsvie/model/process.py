from dataclasses import dataclass
from typing import Union

import numpy as np

from pybsvie.exceptions import ContractError, PreconditionError
from pybsvie.utils import Domain


def _readonly(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class Process1P:
    """A sampled one-parameter process Y(t_j) of shape `M x (N+1) x m`"""

    values: np.ndarray
    adapted_flag: bool = True

    def __post_init__(self):
        if np.ndim(self.values) != 3:
            raise PreconditionError(
                f"Process1P values must be M x (N+1) x m! got shape: {np.shape(self.values)}"
            )
        object.__setattr__(self, "values", _readonly(self.values))

    @classmethod
    def zeros(cls, M: int, N: int, m: int) -> "Process1P":
        return cls(np.zeros((M, N + 1, m)))

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def m(self) -> int:
        return self.dim

    @property
    def shape(self):
        return self.values.shape

    def __sub__(self, other: "Process1P") -> "Process1P":
        return Process1P(self.values - other.values, self.adapted_flag and other.adapted_flag)


@dataclass(frozen=True, eq=False)
class Process2P:
    """A sampled two-parameter process Z(t_i, t_j) of shape `M x (N+1) x (N+1) x m x d`

    In UPPER mode only the entries j >= i carry information and the entries j < i are zero by
    contract. In FULL mode the lower triangle holds the martingale-representation part.
    """

    values: np.ndarray
    domain: Union[Domain, str] = Domain.UPPER

    def __post_init__(self):
        domain = Domain.coerce(self.domain)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 5 or values.shape[1] != values.shape[2]:
            raise PreconditionError(
                f"Process2P values must be M x (N+1) x (N+1) x m x d! got shape: {values.shape}"
            )
        if domain == Domain.UPPER:
            values = values * upper_mask(values.shape[1])[None, :, :, None, None]

        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def zeros(cls, M: int, N: int, m: int, d: int, domain=Domain.UPPER) -> "Process2P":
        return cls(np.zeros((M, N + 1, N + 1, m, d)), domain)

    @property
    def m(self) -> int:
        return self.values.shape[3]

    @property
    def d(self) -> int:
        return self.values.shape[4]

    @property
    def has_lower(self) -> bool:
        return self.domain == Domain.FULL

    def upper(self) -> "Process2P":
        return Process2P(self.values, Domain.UPPER)

    def lower(self) -> np.ndarray:
        """the strictly lower triangle j < i. Raises a ContractError if it is absent"""
        if not self.has_lower:
            raise ContractError("Z has no lower triangle: solve in m_solution mode or m_extend!")

        return self.values * lower_mask(self.values.shape[1])[None, :, :, None, None]

    def with_lower(self, Z_lower: np.ndarray) -> "Process2P":
        """the FULL process from the upper triangle of `self` and the strictly lower triangle of
        `Z_lower`"""
        n = self.values.shape[1]
        mask = lower_mask(n)[None, :, :, None, None]
        values = np.where(mask, Z_lower, self.upper().values)

        return Process2P(values, Domain.FULL)

    def __sub__(self, other: "Process2P") -> "Process2P":
        domain = Domain.FULL if self.has_lower and other.has_lower else Domain.UPPER
        return Process2P(self.values - other.values, domain)


def upper_mask(n: int) -> np.ndarray:
    """boolean mask of the entries (i, j) with j >= i"""
    return np.triu(np.ones((n, n), dtype=bool))


def lower_mask(n: int) -> np.ndarray:
    """boolean mask of the entries (i, j) with j < i"""
    return np.tril(np.ones((n, n), dtype=bool), k=-1)
