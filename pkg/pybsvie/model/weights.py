from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from pybsvie.exceptions import ConfigurationError, PreconditionError
from pybsvie.model.grid import TimeGrid
from pybsvie.utils import WeightMode


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """The exponential weights e^{beta A(t)} of the weighted norms

    Attributes
    ----------
    grid : TimeGrid
    alpha2 : np.ndarray
        alpha^2 at the grid nodes
    floor : float
        the lower bound delta of alpha^2
    A : np.ndarray
        A(t) = int_0^t alpha^2(s) ds at the grid nodes
    A_star : np.ndarray
        A*(t) = int_0^t alpha^(2p/(2-p))(s) ds at the grid nodes
    p : float
        the Hoelder exponent in (1, 2) defining A*
    beta : float
    mode : WeightMode
        which of A and A* drives the weights
    """

    grid: TimeGrid
    alpha2: np.ndarray
    floor: float
    A: np.ndarray
    A_star: np.ndarray
    p: float
    beta: float
    mode: WeightMode = WeightMode.A

    @property
    def exponent(self) -> np.ndarray:
        return self.A if self.mode == WeightMode.A else self.A_star

    @property
    def weights(self) -> np.ndarray:
        """e^{beta A(t_i)} (or e^{beta A*(t_i)}) at the grid nodes"""
        return np.exp(self.beta * self.exponent)

    @property
    def terminal_weight(self) -> float:
        return float(self.weights[-1])

    def with_beta(self, beta: float) -> "WeightProfile":
        return build_weight_profile(self.alpha2, self.grid, self.p, beta, self.floor, self.mode)

    def contraction_scale(self) -> float:
        """the factor by which the fixed-point map contracts, up to a constant: 1/beta for the A
        weights and (1/beta)^((2-p)/p) for the star weights"""
        if self.mode == WeightMode.A:
            return 1 / self.beta

        return (1 / self.beta) ** ((2 - self.p) / self.p)


def build_weight_profile(
    alpha2: Union[Callable[[np.ndarray], np.ndarray], np.ndarray, float],
    grid: TimeGrid,
    p: float = 1.5,
    beta: float = 8.0,
    floor: Optional[float] = None,
    mode: Union[WeightMode, str] = WeightMode.A,
) -> WeightProfile:
    """Tabulate A and A* on the grid by the trapezoid rule

    Parameters
    ----------
    alpha2 : Union[Callable, np.ndarray, float]
        alpha^2 as a vectorized function of t, its values at the grid nodes, or a constant
    grid : TimeGrid
    p : float, default=1.5
    beta : float, default=8.0
    floor : Optional[float], default=None
        the lower bound delta of alpha^2. If None, use the smallest sampled value
    mode : Union[WeightMode, str], default=WeightMode.A

    Raises
    ------
    PreconditionError
        if a sample of alpha^2 is not positive or falls below `floor`
    ConfigurationError
        if p is outside of (1, 2) or beta is not positive
    """
    if not 1 < p < 2:
        raise ConfigurationError(f"p must lie in (1, 2)! got: {p}")
    if not beta > 0:
        raise ConfigurationError(f"beta must be positive! got: {beta}")

    if callable(alpha2):
        a2 = np.asarray(alpha2(grid.nodes), dtype=float)
    else:
        a2 = np.asarray(alpha2, dtype=float)
    a2 = np.broadcast_to(a2, grid.nodes.shape).astype(float)

    if np.any(~np.isfinite(a2)) or np.any(a2 <= 0):
        raise PreconditionError(f"alpha^2 must be positive on [0, T]! min sample: {a2.min()}")

    floor = float(a2.min()) if floor is None else floor
    if floor <= 0 or np.any(a2 < floor):
        raise PreconditionError(f"alpha^2 must be bounded below by delta={floor} > 0!")

    A = cumulative_trapezoid(a2, grid.nodes, initial=0.0)
    A_star = cumulative_trapezoid(a2 ** (p / (2 - p)), grid.nodes, initial=0.0)

    return WeightProfile(grid, a2, floor, A, A_star, p, float(beta), WeightMode.coerce(mode))
