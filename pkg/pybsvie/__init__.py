"""pybsvie
regression Monte Carlo solvers for backward stochastic Volterra integral equations
"""
from importlib.metadata import PackageNotFoundError, version

from . import args
from .model import Driver, FreeTerm, PathEnsemble, Process1P, Process2P, TimeGrid
from .paths import generate_paths
from .regression import ConditionalExpectation, RegressionConfig
from .solvers import SolverConfig, SolverReport, build_config, get_solver
from .scenarios import Scenario, list_scenarios, load_scenario
from .runner import run_scenario

try:
    __version__ = version("pybsvie")
except PackageNotFoundError:
    __version__ = "0.1.0"
