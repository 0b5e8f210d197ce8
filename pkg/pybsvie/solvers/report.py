from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

FACTOR_EPS = 10 * np.finfo(float).eps


@dataclass
class SolverReport:
    """The record of a solve

    Attributes
    ----------
    kind : str
    mode : str
    iterations : int
        the number of fixed-point iterations (Picard steps for the Picard recursion)
    distances : List[float]
        the distance between successive iterates at each iteration
    contraction_factors : List[float]
        the ratios distances[k+1] / distances[k], defined only where distances[k] > 10 eps
    factor_iterations : List[int]
        the iteration at which each contraction factor was measured
    converged : bool
    beta : Optional[float]
    beta_doublings : int
    contraction_scale : Optional[float]
        the theoretical scale of the contraction factor for the weight mode
    kernel_condition : Optional[float]
        sup_t (int_t^T L^q ds)^(2/q)
    norms : List[float]
        E int |Y_n|^2 dt at each Picard step
    inner_iterations : List[int]
        the fixed-point iterations used by each Picard step
    residuals : Dict[str, float]
    estimates : Dict[str, float]
    tags : List[str]
    """

    kind: str = "lipschitz"
    mode: str = "m_solution"
    iterations: int = 0
    distances: List[float] = field(default_factory=list)
    contraction_factors: List[float] = field(default_factory=list)
    factor_iterations: List[int] = field(default_factory=list)
    converged: bool = False
    beta: Optional[float] = None
    beta_doublings: int = 0
    contraction_scale: Optional[float] = None
    kernel_condition: Optional[float] = None
    norms: List[float] = field(default_factory=list)
    inner_iterations: List[int] = field(default_factory=list)
    residuals: Dict[str, float] = field(default_factory=dict)
    estimates: Dict[str, float] = field(default_factory=dict)
    tags: List[str] = field(default_factory=list)

    def record(self, distance: float) -> Optional[float]:
        """append a distance and return the contraction factor it defines, if any"""
        distance = float(distance)
        factor = None
        if self.distances and self.distances[-1] > FACTOR_EPS:
            factor = distance / self.distances[-1]
            self.contraction_factors.append(factor)
            self.factor_iterations.append(len(self.distances))

        self.distances.append(distance)
        self.iterations = len(self.distances)

        return factor

    def consecutive_expansions(self) -> int:
        """the number of trailing contraction factors >= 1"""
        n = 0
        for factor in reversed(self.contraction_factors):
            if factor < 1:
                break
            n += 1

        return n

    @property
    def sup_factor(self) -> float:
        return max(self.contraction_factors, default=0.0)

    def iterates_frame(self) -> pd.DataFrame:
        """a table of (iteration, distance, factor) with NaN where no factor is defined"""
        factors = dict(zip(self.factor_iterations, self.contraction_factors))
        return pd.DataFrame(
            {
                "iteration": np.arange(1, len(self.distances) + 1),
                "distance": self.distances,
                "factor": [factors.get(k, np.nan) for k in range(len(self.distances))],
            }
        )

    def to_dict(self) -> Dict:
        return jsonable(asdict(self))


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)

    return x
