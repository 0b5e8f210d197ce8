from typing import Callable, Union

from pybsvie.exceptions import UnsupportedBuiltinError
from pybsvie.utils import SolverKind
from .config import SolverConfig, build_config
from .report import SolverReport
from .simple import m_extend, solve_simple
from .lipschitz import solve_lipschitz, stability_gap, theta_map, weighted_norm, zero_iterate
from .picard import (
    bihari_monitor,
    concavity_lemma_check,
    gronwall_bound,
    gronwall_bound_check,
    mean_square_integral,
    picard_solve,
)
from .bsde import solve_bsde


def get_solver(kind: Union[SolverKind, str]) -> Callable:
    """the solver of the given kind, with signature (g, psi, cfg, ens, ce=None) -> (Y, Z, report)"""
    try:
        kind = SolverKind.coerce(kind)
    except KeyError:
        raise UnsupportedBuiltinError(f'Unrecognized solver type: "{kind}"')

    if kind == SolverKind.LIPSCHITZ:
        return solve_lipschitz
    if kind == SolverKind.PICARD:
        return picard_solve

    return _solve_simple_driver


def _solve_simple_driver(g, psi, cfg: SolverConfig, ens, ce=None):
    """one application of Theta from (0, 0), i.e. the simple BSVIE with f = g(t, s, 0, 0, 0)"""
    y0, z0 = zero_iterate(ens, g, cfg.mode)
    Y, Z = theta_map(y0, z0, g, psi, cfg, ens, ce)
    report = SolverReport("simple", cfg.mode.name.lower(), iterations=1, converged=True)

    return Y, Z, report
