from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from pybsvie.exceptions import ConfigurationError, PreconditionError

UNIFORM_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """A discrete time axis 0 = t_0 < t_1 < ... < t_N = T

    Attributes
    ----------
    horizon : float
        the terminal time T
    step_count : int
        the number of steps N
    nodes : np.ndarray
        the N+1 grid nodes

    Parameters
    ----------
    horizon : float
    step_count : int
    nodes : Optional[Sequence[float]], default=None
        explicit nodes. If None, build a uniform grid
    """

    horizon: float
    step_count: int
    nodes: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive! got: {self.horizon}")
        if self.step_count < 1:
            raise ConfigurationError(f"step_count must be at least 1! got: {self.step_count}")

        if self.nodes is None:
            nodes = np.linspace(0.0, self.horizon, self.step_count + 1)
        else:
            nodes = np.asarray(self.nodes, dtype=float)

        if nodes.shape != (self.step_count + 1,):
            raise PreconditionError(
                f"expected {self.step_count + 1} nodes, got array of shape {nodes.shape}"
            )
        if nodes[0] != 0.0 or not np.isclose(nodes[-1], self.horizon, rtol=0, atol=1e-14):
            raise PreconditionError(f"nodes must run from 0 to {self.horizon}!")
        if np.any(np.diff(nodes) <= 0):
            raise PreconditionError("nodes must be strictly increasing!")

        nodes = nodes.copy()
        nodes[-1] = self.horizon
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, horizon: float, step_count: int) -> "TimeGrid":
        return cls(float(horizon), int(step_count))

    @classmethod
    def from_nodes(cls, nodes: Sequence[float]) -> "TimeGrid":
        nodes = np.asarray(nodes, dtype=float)
        return cls(float(nodes[-1]), len(nodes) - 1, nodes)

    def __len__(self) -> int:
        return self.step_count + 1

    @property
    def T(self) -> float:
        return self.horizon

    @property
    def N(self) -> int:
        return self.step_count

    @cached_property
    def steps(self) -> np.ndarray:
        """the step sizes h_i = t_{i+1} - t_i"""
        return np.diff(self.nodes)

    def step(self, i: int) -> float:
        return float(self.steps[i])

    @property
    def is_uniform(self) -> bool:
        h = self.horizon / self.step_count
        return bool(np.allclose(self.steps, h, rtol=UNIFORM_RTOL, atol=0.0))

    def index(self, t: float) -> int:
        """the index of the node equal to `t`

        Raises
        ------
        PreconditionError
            if `t` is not a grid node
        """
        i = int(np.argmin(np.abs(self.nodes - t)))
        if not np.isclose(self.nodes[i], t, rtol=0.0, atol=1e-12 * max(1.0, self.horizon)):
            raise PreconditionError(f"t={t} is not a node of the grid!")

        return i

    def trapezoid_weights(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """composite trapezoid weights for an integral over [t_start, t_stop], as a vector of
        length N+1 that is zero outside of [start, stop]"""
        stop = self.step_count if stop is None else stop
        w = np.zeros(self.step_count + 1)
        if stop <= start:
            return w

        h = self.steps[start:stop]
        w[start:stop] += h / 2
        w[start + 1 : stop + 1] += h / 2

        return w

    @cached_property
    def upper_weights(self) -> np.ndarray:
        """row i holds the trapezoid weights of an s-integral over [t_i, T]"""
        W = np.stack([self.trapezoid_weights(i) for i in range(self.step_count + 1)])
        W.setflags(write=False)
        return W

    @cached_property
    def lower_weights(self) -> np.ndarray:
        """row i holds the left-endpoint weights h_j, j < i, of an s-integral over [0, t_i)"""
        W = np.tril(np.broadcast_to(np.append(self.steps, 0.0), (len(self), len(self))), k=-1)
        W = np.ascontiguousarray(W)
        W.setflags(write=False)
        return W

    @property
    def square_weights(self) -> np.ndarray:
        return self.upper_weights + self.lower_weights

    def integrate(self, values: np.ndarray, start: int = 0, axis: int = -1) -> np.ndarray:
        """trapezoid integral over [t_start, T] of node values along `axis`"""
        return np.tensordot(values, self.trapezoid_weights(start), axes=([axis], [0]))
