from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Union

from pybsvie.exceptions import ConfigurationError
from pybsvie.regression import RegressionConfig
from pybsvie.utils import SolverKind, SolverMode, WeightMode


@dataclass(repr=True, eq=False)
class SolverConfig:
    """

    Attributes
    ----------
    kind : SolverKind
        the solver to run: the simple solver, the Lipschitz fixed-point iteration or the Picard
        recursion
    mode : SolverMode
        M_SOLUTION to populate Z on the whole square, ADAPTED for Z on t <= s only
    beta : Optional[float]
        the weight exponent. If None, use max(8, 4 sup L^2 sum r_i^2 T)
    weight_mode : WeightMode
        whether the weights are e^{beta A} or e^{beta A*}
    p : float
        the exponent defining A*, in (1, 2)
    alpha2 : Optional[float]
        alpha^2. If None, use max(r1^2 + r2^2 + r3^2, alpha_floor)
    alpha_floor : float
        the lower bound delta of alpha^2
    tol : float
        the stopping tolerance of the weighted distance between successive iterates
    max_iter : int
        the maximum number of fixed-point iterations
    max_doublings : int
        the number of times beta is doubled after a divergence
    outer_tol : float
        the stopping tolerance of E int |Y_n - Y_{n-1}|^2 in the Picard recursion
    outer_max_iter : int
        the maximum number of Picard steps
    regression : RegressionConfig
    verbose : int

    Parmeters
    ---------
    kind : Union[SolverKind, str], default=SolverKind.LIPSCHITZ
    mode : Union[SolverMode, str], default=SolverMode.M_SOLUTION
    beta : Optional[float], default=None
    weight_mode : Union[WeightMode, str], default=WeightMode.A
    p : float, default=1.5
    alpha2 : Optional[float], default=None
    alpha_floor : float, default=1.0
    tol : float, default=1e-6
    max_iter : int, default=50
    max_doublings : int, default=5
    outer_tol : float, default=1e-4
    outer_max_iter : int, default=30
    regression : Union[RegressionConfig, Dict], default=RegressionConfig()
    verbose : int, default=0
    """

    kind: Union[SolverKind, str] = SolverKind.LIPSCHITZ
    mode: Union[SolverMode, str] = SolverMode.M_SOLUTION
    beta: Optional[float] = None
    weight_mode: Union[WeightMode, str] = WeightMode.A
    p: float = 1.5
    alpha2: Optional[float] = None
    alpha_floor: float = 1.0
    tol: float = 1e-6
    max_iter: int = 50
    max_doublings: int = 5
    outer_tol: float = 1e-4
    outer_max_iter: int = 30
    regression: Union[RegressionConfig, Dict] = field(default_factory=RegressionConfig)
    verbose: int = 0

    def __post_init__(self):
        try:
            self.kind = SolverKind.coerce(self.kind)
            self.mode = SolverMode.coerce(self.mode)
            self.weight_mode = WeightMode.coerce(self.weight_mode)
        except KeyError as e:
            raise ConfigurationError(f"Unrecognized solver option: {e}")

        if isinstance(self.regression, dict):
            self.regression = RegressionConfig(**self.regression)

        if not self.tol > 0 or not self.outer_tol > 0:
            raise ConfigurationError(
                f"tolerances must be positive! got: {self.tol}, {self.outer_tol}"
            )
        if self.max_iter < 1 or self.outer_max_iter < 1:
            raise ConfigurationError(
                f"iteration limits must be at least 1! got: {self.max_iter}, {self.outer_max_iter}"
            )
        if self.beta is not None and not self.beta > 0:
            raise ConfigurationError(f"beta must be positive! got: {self.beta}")
        if not self.alpha_floor > 0:
            raise ConfigurationError(f"alpha_floor must be positive! got: {self.alpha_floor}")
        if not 1 < self.p < 2:
            raise ConfigurationError(f"p must lie in (1, 2)! got: {self.p}")


def build_config(options: Optional[Dict] = None, mode: Optional[str] = None) -> SolverConfig:
    """merge a partial dict of options over the SolverConfig defaults. Unknown keys are ignored"""
    options = dict(options or {})
    if mode is not None:
        options["mode"] = mode
    if "type" in options and "kind" not in options:
        options["kind"] = options.pop("type")

    d_cfg = asdict(SolverConfig())
    d_cfg.update((k, options[k]) for k in d_cfg.keys() & options.keys())

    return SolverConfig(**d_cfg)
