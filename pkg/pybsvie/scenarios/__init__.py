"""Scenario descriptions: JSON files naming a grid, an ensemble, a driver, a free term and the
solver and checks to run on them. The schema is documented in README.md next to this file."""
from dataclasses import asdict, dataclass, field, replace
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import warnings

from pybsvie.exceptions import CapacityError, ConfigurationError
from pybsvie.model import Driver, FreeTerm, TimeGrid, build_driver, build_free_term, get_modulus
from pybsvie.model.modulus import DEFAULT_CAP
from pybsvie.paths import check_capacity
from pybsvie.solvers import SolverConfig, build_config
from pybsvie.warnings import ScenarioParseWarning

BUILTIN_DIR = Path(__file__).parent
CHECKS = (
    "bsvie_residual",
    "m_identity",
    "estimate_6",
    "estimate_30",
    "estimate_31",
    "lower_triangle_energy",
    "contraction",
    "bihari",
    "gronwall",
    "stability",
    "bsde_oracle",
    "expected_y0",
)
DEFAULT_THRESHOLDS = {"residual": 1e-3, "y0_rtol": 0.02, "se_multiple": 3.0}


@dataclass
class Scenario:
    """A parsed scenario file

    Attributes
    ----------
    name : str
    description : str
    exercises : str
        the result the scenario exercises
    grid : Dict
        {"T": float, "N": int}
    ensemble : Dict
        {"M": int, "d": int, "seed": int}
    driver : Dict
        {"name": str, "coefficients": Dict, "kernel": Dict, "q": float}
    free_term : Dict
        {"name": str, "params": Dict}
    m : int
        the dimension of Y
    weights : Dict
        {"mode": "A" | "A_star", "p": float, "beta": float, "alpha_floor": float}
    modulus : Optional[str]
        overrides the modulus of the driver
    modulus_cap : float
    solver : Dict
        {"type": "simple" | "lipschitz" | "picard", "mode": "m_solution" | "adapted", ...}
    regression : Dict
        {"degree": int, "features": List[str], "ridge": float}
    checks : List[str]
    thresholds : Dict
    expected : Dict
        closed-form values used by the "expected_y0" check, e.g. {"Y0": 2.718}
    """

    name: str
    description: str = ""
    exercises: str = ""
    grid: Dict = field(default_factory=lambda: {"T": 1.0, "N": 16})
    ensemble: Dict = field(default_factory=lambda: {"M": 10000, "d": 1, "seed": 0})
    driver: Dict = field(default_factory=lambda: {"name": "zero"})
    free_term: Dict = field(default_factory=lambda: {"name": "constant"})
    m: int = 1
    weights: Dict = field(default_factory=dict)
    modulus: Optional[str] = None
    modulus_cap: float = DEFAULT_CAP
    solver: Dict = field(default_factory=dict)
    regression: Dict = field(default_factory=dict)
    checks: List[str] = field(default_factory=lambda: ["bsvie_residual"])
    thresholds: Dict = field(default_factory=dict)
    expected: Dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ConfigurationError(
                f'scenario "{self.name}" names unknown checks: {sorted(unknown)}'
            )
        for key in ("T", "N"):
            if key not in self.grid:
                raise ConfigurationError(f'scenario "{self.name}" is missing grid.{key}!')
        self.thresholds = {**DEFAULT_THRESHOLDS, **self.thresholds}

    @property
    def seed(self) -> int:
        return int(self.ensemble.get("seed", 0))

    @property
    def M(self) -> int:
        return int(self.ensemble.get("M", 10000))

    @property
    def d(self) -> int:
        return int(self.ensemble.get("d", 1))

    def build_grid(self) -> TimeGrid:
        return TimeGrid.uniform(float(self.grid["T"]), int(self.grid["N"]))

    def build_driver(self, grid: Optional[TimeGrid] = None) -> Driver:
        spec = dict(self.driver)
        driver = build_driver(
            spec.get("name", "zero"),
            spec.get("coefficients"),
            spec.get("kernel"),
            self.m,
            self.d,
            grid,
            spec.get("q"),
        )
        if self.modulus is not None:
            driver = replace(driver, modulus=get_modulus(self.modulus, self.modulus_cap))

        return driver

    def build_free_term(self) -> FreeTerm:
        return build_free_term(
            self.free_term.get("name", "constant"), self.free_term.get("params"), self.m
        )

    def check_capacity(self) -> int:
        """the size of the largest dense array of a solve in floats

        Raises
        ------
        ConfigurationError
            if the grid exceeds the resolution cap or Z exceeds the memory budget
        """
        try:
            return check_capacity(self.M, int(self.grid["N"]), self.m, self.d)
        except CapacityError as e:
            raise ConfigurationError(f'scenario "{self.name}" is too large: {e}')

    def build_config(self, verbose: int = 0) -> SolverConfig:
        self.check_capacity()
        options = {**self.solver, "regression": self.regression, "verbose": verbose}
        if "mode" in self.weights:
            options["weight_mode"] = self.weights["mode"]
        for key in ("p", "beta", "alpha_floor", "alpha2"):
            if key in self.weights:
                options[key] = self.weights[key]

        return build_config(options)

    def to_dict(self) -> Dict:
        return asdict(self)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """parse a scenario file

    Raises
    ------
    ConfigurationError
        if the file is missing, is not valid JSON or does not fit the schema
    """
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f'scenario file "{path}" does not exist!')
    except json.JSONDecodeError as e:
        raise ConfigurationError(f'scenario file "{path}" is not valid JSON: {e}')

    if not isinstance(spec, dict):
        raise ConfigurationError(f'scenario file "{path}" must hold a JSON object!')

    spec.setdefault("name", path.stem)
    try:
        return Scenario(**spec)
    except TypeError as e:
        raise ConfigurationError(f'scenario file "{path}" does not fit the schema: {e}')


def find_scenario(name: str, scenario_dir: Optional[Union[str, Path]] = None) -> Path:
    """the path of a scenario given by path or by name in `scenario_dir` or the bundled set"""
    path = Path(name)
    if path.suffix == ".json" or len(path.parts) > 1:
        if path.exists():
            return path
        raise ConfigurationError(f'Unrecognized scenario: "{name}" does not exist!')

    for directory in filter(None, [scenario_dir, BUILTIN_DIR]):
        candidate = Path(directory) / f"{name}.json"
        if candidate.exists():
            return candidate

    raise ConfigurationError(f'Unrecognized scenario: "{name}"')


def scenario_catalog(
    scenario_dir: Optional[Union[str, Path]] = None,
) -> List[Tuple[str, Optional[Scenario], Optional[str]]]:
    """(name, scenario, error) for every bundled scenario and every scenario in `scenario_dir`"""
    paths = sorted(BUILTIN_DIR.glob("*.json"))
    if scenario_dir is not None:
        paths.extend(sorted(Path(scenario_dir).glob("*.json")))

    catalog = []
    for path in paths:
        try:
            catalog.append((path.stem, load_scenario(path), None))
        except ConfigurationError as e:
            warnings.warn(f'could not parse scenario "{path}": {e}', ScenarioParseWarning)
            catalog.append((path.stem, None, str(e)))

    return catalog


def list_scenarios(scenario_dir: Optional[Union[str, Path]] = None) -> str:
    """a catalog of scenario names, one-line descriptions and the results they exercise.
    Unparseable files are listed with a parse-warning marker"""
    lines = []
    for name, scenario, error in scenario_catalog(scenario_dir):
        if scenario is None:
            lines.append(f"{name:<26} [PARSE WARNING] {error}")
        else:
            lines.append(f"{scenario.name:<26} {scenario.description} ({scenario.exercises})")

    return "\n".join(lines)
