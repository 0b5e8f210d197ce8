from dataclasses import dataclass
from functools import cached_property
from typing import Dict

import numpy as np

from pybsvie.exceptions import PreconditionError
from pybsvie.model.grid import TimeGrid

FEATURES = ("W", "int_W")


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """A seeded ensemble of d-dimensional Brownian sample paths on a TimeGrid

    Attributes
    ----------
    grid : TimeGrid
    increments : np.ndarray
        the Brownian increments dW of shape `M x N x d`
    states : np.ndarray
        the Brownian states W of shape `M x (N+1) x d`, with W[:, 0] = 0
    seed : int
        the seed the increments were drawn from
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        dW = np.asarray(self.increments, dtype=float)
        if dW.ndim != 3 or dW.shape[1] != self.grid.step_count:
            raise PreconditionError(
                f"increments must have shape M x {self.grid.step_count} x d! got: {dW.shape}"
            )
        dW.setflags(write=False)
        object.__setattr__(self, "increments", dW)

    @cached_property
    def states(self) -> np.ndarray:
        M, N, d = self.increments.shape
        W = np.zeros((M, N + 1, d))
        # W[j+1] = W[j] + dW[j] one step at a time so that the identity holds exactly
        for j in range(N):
            W[:, j + 1] = W[:, j] + self.increments[:, j]
        W.setflags(write=False)

        return W

    @cached_property
    def integrated_states(self) -> np.ndarray:
        """the running trapezoid integral of W over [0, t_j], shape `M x (N+1) x d`"""
        W = self.states
        h = self.grid.steps[None, :, None]
        I = np.zeros_like(W)
        I[:, 1:] = np.cumsum(h * (W[:, 1:] + W[:, :-1]) / 2, axis=1)
        I.setflags(write=False)

        return I

    @property
    def path_count(self) -> int:
        return self.increments.shape[0]

    @property
    def dim(self) -> int:
        return self.increments.shape[2]

    @property
    def M(self) -> int:
        return self.path_count

    @property
    def d(self) -> int:
        return self.dim

    @property
    def N(self) -> int:
        return self.grid.step_count

    def features(self, j: int) -> Dict[str, np.ndarray]:
        """the path features observable at t_j, each of shape `M x d`"""
        return {"W": self.states[:, j], "int_W": self.integrated_states[:, j]}

    def __len__(self) -> int:
        return self.path_count
