"""Run a scenario end to end: simulate, solve, check and write the artifacts"""
from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from colorama import Fore, Style
import numpy as np
import pandas as pd

from pybsvie import diagnostics as diag
from pybsvie.exceptions import (
    CapacityError,
    ConfigurationError,
    DivergenceError,
    InputError,
    ModeError,
    NumericalRankError,
    PreconditionError,
    PybsvieError,
)
from pybsvie.model import (
    Driver,
    PathEnsemble,
    Process1P,
    Process2P,
    WeightProfile,
    build_weight_profile,
)
from pybsvie.paths import generate_paths
from pybsvie.regression import ConditionalExpectation
from pybsvie.scenarios import CHECKS, Scenario, find_scenario, load_scenario
from pybsvie.solvers import (
    SolverConfig,
    SolverReport,
    bihari_monitor,
    get_solver,
    gronwall_bound_check,
    solve_bsde,
    stability_gap,
)
from pybsvie.solvers.lipschitz import DEFAULT_C, default_alpha2, default_beta
from pybsvie.solvers.report import jsonable
from pybsvie.solvers.simple import free_term_values
from pybsvie.utils import SolverKind, SolverMode, Verdict

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

FLOAT_FORMAT = "%.17g"
STABILITY_EPSILONS = (0.1, 0.05)
M_SOLUTION_CHECKS = {"m_identity", "lower_triangle_energy"}
PICARD_CHECKS = {"bihari", "gronwall"}
CONFIG_ERRORS = (
    ConfigurationError,
    CapacityError,
    InputError,
    ModeError,
    NumericalRankError,
    PreconditionError,
)


@dataclass
class CheckResult:
    name: str
    value: float
    passed: bool
    detail: Dict = field(default_factory=dict)


@dataclass
class RunContext:
    """everything a check needs to know about a finished solve"""

    scenario: Scenario
    g: Driver
    psi: np.ndarray
    cfg: SolverConfig
    ens: PathEnsemble
    ce: ConditionalExpectation
    Y: Process1P
    Z: Process2P
    report: SolverReport
    w: WeightProfile
    solver: Callable

    @property
    def se_multiple(self) -> float:
        return float(self.scenario.thresholds["se_multiple"])

    @property
    def f(self) -> np.ndarray:
        """the driver frozen at the solution"""
        use_zeta = self.g.uses_zeta and self.Z.has_lower
        return self.g.freeze(self.Y, self.Z, self.ens, use_zeta)


def _check_residual(ctx: RunContext) -> CheckResult:
    r = diag.bsvie_residual(ctx.Y, ctx.Z, ctx.g, ctx.psi, ctx.ens)
    value = float(r.max())
    ctx.report.residuals["bsvie_residual"] = value

    return CheckResult("bsvie_residual", value, value <= ctx.scenario.thresholds["residual"])


def _check_m_identity(ctx: RunContext) -> CheckResult:
    r = diag.m_identity_residual(ctx.Y, ctx.Z, ctx.ens)
    value = float(r.max())
    ctx.report.residuals["m_identity"] = value

    return CheckResult("m_identity", value, value <= ctx.scenario.thresholds["residual"])


def _estimate_result(ctx: RunContext, name: str, terms) -> CheckResult:
    """the worst ratio of an estimate, passed within `se_multiple` standard errors"""
    ratio, se = diag.ratio_se(*terms)
    ratio = np.atleast_1d(ratio)
    se = np.atleast_1d(se)
    worst = int(np.argmax(ratio))
    value = float(ratio[worst])
    ctx.report.estimates[name] = value

    passed = diag.passes(ratio, se, ctx.se_multiple)
    return CheckResult(name, value, passed, {"se": float(se[worst])})


def _check_estimate_6(ctx: RunContext) -> CheckResult:
    terms = diag.estimate_6_terms(ctx.Y, ctx.Z, ctx.psi, ctx.f, ctx.w)
    return _estimate_result(ctx, "estimate_6", terms)


def _check_estimate_30(ctx: RunContext) -> CheckResult:
    terms = diag.estimate_30_terms(ctx.Y, ctx.Z, ctx.psi, ctx.f, ctx.w)
    return _estimate_result(ctx, "estimate_30", terms)


def _check_estimate_31(ctx: RunContext) -> CheckResult:
    terms = diag.estimate_31_terms(ctx.Y, ctx.Z, ctx.psi[:, -1], ctx.f, ctx.w)
    return _estimate_result(ctx, "estimate_31", terms)


def _check_lower_energy(ctx: RunContext) -> CheckResult:
    lhs, rhs = diag.lower_triangle_energy_terms(ctx.Y, ctx.Z, ctx.w)
    result = _estimate_result(ctx, "lower_triangle_energy", (lhs, rhs))
    result.detail.update(lhs=float(lhs.mean()), rhs=float(rhs.mean()))

    return result


def _check_contraction(ctx: RunContext) -> CheckResult:
    factors = ctx.report.contraction_factors
    value = ctx.report.sup_factor

    return CheckResult("contraction", value, all(f < 1 for f in factors), {"n": len(factors)})


def _check_bihari(ctx: RunContext) -> CheckResult:
    verdict = bihari_monitor(ctx.report.distances, ctx.g.modulus)
    last = ctx.report.distances[-1] if ctx.report.distances else 0.0

    return CheckResult("bihari", last, verdict == Verdict.CONSISTENT, {"verdict": verdict.name})


def _check_gronwall(ctx: RunContext) -> CheckResult:
    a, b = ctx.g.modulus.linear_bound
    mass = diag.data_mass(ctx.psi, ctx.g, ctx.ens)
    K = ctx.g.kernel.sup**2 * ctx.g.r1**2
    T = ctx.ens.grid.T
    passed = gronwall_bound_check(ctx.report.norms, a, b, mass, T, K)
    value = max(ctx.report.norms, default=0.0)

    return CheckResult("gronwall", value, passed, {"data_mass": mass})


def _check_stability(ctx: RunContext) -> CheckResult:
    """perturb psi by a constant and compare the gap of the solutions with the data gap"""
    constants = []
    passed = True
    for eps in STABILITY_EPSILONS:
        psi2 = ctx.psi + eps
        Y2, Z2, _ = ctx.solver(ctx.g, psi2, ctx.cfg, ctx.ens, ce=ctx.ce)
        lhs, rhs = stability_gap(
            (ctx.Y, ctx.Z), (Y2, Z2), ctx.psi, psi2, ctx.g, ctx.g, 0.0, ctx.ens, DEFAULT_C
        )
        constants.append(diag.smallest_passing_constant(lhs, rhs / DEFAULT_C))
        passed &= lhs <= rhs

    value = max(constants)
    ctx.report.estimates["stability_constant"] = value

    return CheckResult("stability", value, bool(passed), {"epsilons": list(STABILITY_EPSILONS)})


def _check_bsde_oracle(ctx: RunContext) -> CheckResult:
    """the mean gap to the backward-Euler BSDE solution, less 3 standard errors and a step"""
    Yb, _ = solve_bsde(ctx.psi[:, -1], ctx.g, ctx.ens, ctx.ce)
    diff = ctx.Y.values - Yb
    gap = np.abs(diff.mean(axis=0))
    se = diff.std(axis=0) / np.sqrt(ctx.ens.M)
    excess = gap - 3 * se - ctx.ens.grid.steps.max()
    value = float(excess.max())

    return CheckResult("bsde_oracle", value, value <= 0, {"max_gap": float(gap.max())})


def _check_expected_y0(ctx: RunContext) -> CheckResult:
    expected = float(ctx.scenario.expected["Y0"])
    Y0 = float(ctx.Y.values[:, 0].mean())
    rel = abs(Y0 - expected) / abs(expected)

    return CheckResult("expected_y0", rel, rel <= ctx.scenario.thresholds["y0_rtol"], {"Y0": Y0})


CHECK_FUNCS: Dict[str, Callable[[RunContext], CheckResult]] = {
    "bsvie_residual": _check_residual,
    "m_identity": _check_m_identity,
    "estimate_6": _check_estimate_6,
    "estimate_30": _check_estimate_30,
    "estimate_31": _check_estimate_31,
    "lower_triangle_energy": _check_lower_energy,
    "contraction": _check_contraction,
    "bihari": _check_bihari,
    "gronwall": _check_gronwall,
    "stability": _check_stability,
    "bsde_oracle": _check_bsde_oracle,
    "expected_y0": _check_expected_y0,
}


def validate_checks(checks: Sequence[str], scenario: Scenario, cfg: SolverConfig) -> List[str]:
    """the checks to run, in canonical order

    Raises
    ------
    ConfigurationError
        if a check is unknown or does not apply to the scenario's solver or data
    """
    checks = list(dict.fromkeys(checks))
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ConfigurationError(f"Unrecognized checks: {sorted(unknown)}")

    if cfg.mode == SolverMode.ADAPTED and M_SOLUTION_CHECKS & set(checks):
        raise ConfigurationError(
            f"checks {sorted(M_SOLUTION_CHECKS & set(checks))} need an M-solution!"
        )
    if cfg.kind != SolverKind.PICARD and PICARD_CHECKS & set(checks):
        raise ConfigurationError(
            f"checks {sorted(PICARD_CHECKS & set(checks))} need the Picard solver!"
        )

    if "expected_y0" in checks and "Y0" not in scenario.expected:
        raise ConfigurationError('check "expected_y0" needs an expected Y0 value!')

    t_independent = scenario.build_free_term().t_independent
    for name in ("estimate_31", "bsde_oracle"):
        if name in checks and not t_independent:
            raise ConfigurationError(
                f'check "{name}" needs a free term that does not depend on t!'
            )

    return [name for name in CHECKS if name in checks]


def run_checks(ctx: RunContext, checks: Sequence[str], verbose: int = 0) -> List[CheckResult]:
    results = []
    for name in checks:
        if verbose > 0:
            print(f"  Running check: {name} ...", flush=True)
        results.append(CHECK_FUNCS[name](ctx))

    return results


def write_solution(Y: Process1P, Z: Process2P, grid, out_dir: Path) -> None:
    """solution_Y.csv (t, path mean, path sd) and solution_Z.csv (t, s, mean |Z|)"""
    t = grid.nodes
    m = Y.values.shape[-1]
    Y_cols = {"t": t}
    for k in range(m):
        suffix = "" if m == 1 else f"_{k}"
        Y_cols[f"mean{suffix}"] = Y.values[..., k].mean(axis=0)
        Y_cols[f"sd{suffix}"] = Y.values[..., k].std(axis=0)
    pd.DataFrame(Y_cols).to_csv(out_dir / "solution_Y.csv", index=False, float_format=FLOAT_FORMAT)

    Z_abs = np.linalg.norm(Z.values, axis=(-2, -1)).mean(axis=0)
    I, J = np.indices(Z_abs.shape)
    mask = np.ones_like(Z_abs, dtype=bool) if Z.has_lower else J >= I
    df = pd.DataFrame({"t": t[I[mask]], "s": t[J[mask]], "mean_abs_Z": Z_abs[mask]})
    df.to_csv(out_dir / "solution_Z.csv", index=False, float_format=FLOAT_FORMAT)


def write_report(
    out_dir: Path,
    scenario: Scenario,
    seed: int,
    report: Optional[SolverReport],
    results: Sequence[CheckResult],
    status: int,
    error: Optional[str] = None,
) -> Path:
    if report is not None:
        report.iterates_frame().to_csv(
            out_dir / "iterates.csv", index=False, float_format=FLOAT_FORMAT
        )

    data = {
        "scenario": scenario.name,
        "seed": seed,
        "exit_status": status,
        "passed": status == EXIT_OK,
        "error": error,
        "solver": report.to_dict() if report is not None else None,
        "checks": {r.name: {"value": r.value, "passed": r.passed, **r.detail} for r in results},
    }
    path = out_dir / "report.json"
    path.write_text(json.dumps(jsonable(data), indent=2))

    return path


def _print_results(results: Sequence[CheckResult]) -> None:
    for r in results:
        if r.passed:
            mark = Style.BRIGHT + Fore.GREEN + "PASS"
        else:
            mark = Style.BRIGHT + Fore.RED + "FAIL"
        print(f"  {mark}{Style.RESET_ALL} {r.name:<24} {r.value:0.6g}", flush=True)


def run_scenario(
    config: Union[str, Path, Scenario],
    out_dir: Union[str, Path],
    seed: Optional[int] = None,
    threads: int = 1,
    checks: Optional[Sequence[str]] = None,
    verbose: int = 0,
    scenario_dir: Optional[Union[str, Path]] = None,
) -> int:
    """Load a scenario, solve it, run its checks and write the artifacts to `out_dir`

    Parameters
    ----------
    config : Union[str, Path, Scenario]
        a scenario, the path of a scenario file or the name of a bundled scenario
    out_dir : Union[str, Path]
    seed : Optional[int], default=None
        overrides the scenario's seed
    threads : int, default=1
    checks : Optional[Sequence[str]], default=None
        overrides the scenario's checks
    verbose : int, default=0
    scenario_dir : Optional[Union[str, Path]], default=None
        an additional directory to look up scenario names in

    Returns
    -------
    int
        0 if every check passed, 1 if a check failed, 2 on a configuration error and 3 if the
        solver diverged. Divergence still writes report.json and iterates.csv. Any other error
        raised once the output directory exists is recorded in report.json
    """
    try:
        if isinstance(config, Scenario):
            scenario = config
        else:
            scenario = load_scenario(find_scenario(str(config), scenario_dir))
        seed = scenario.seed if seed is None else seed

        grid = scenario.build_grid()
        g = scenario.build_driver(grid)
        psi_term = scenario.build_free_term()
        cfg = scenario.build_config(verbose)
        checks = validate_checks(scenario.checks if checks is None else checks, scenario, cfg)
        solver = get_solver(cfg.kind)
    except CONFIG_ERRORS as e:
        print(Fore.RED + f"Configuration error: {e}", flush=True)
        return EXIT_CONFIG

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if verbose > 0:
        print(f'Simulating {scenario.M} paths for scenario "{scenario.name}" ...', flush=True)
    try:
        ens = generate_paths(grid, scenario.M, scenario.d, seed, threads)
        psi = free_term_values(psi_term, ens)
        ce = ConditionalExpectation(ens, cfg.regression)
        Y, Z, report = solver(g, psi, cfg, ens, ce=ce)
    except DivergenceError as e:
        print(Fore.RED + f"Solver diverged: {e}", flush=True)
        write_report(out_dir, scenario, seed, e.report, [], EXIT_DIVERGED, str(e))
        return EXIT_DIVERGED
    except PybsvieError as e:
        status = EXIT_CONFIG if isinstance(e, CONFIG_ERRORS) else EXIT_FAILED
        print(Fore.RED + f"{type(e).__name__}: {e}", flush=True)
        write_report(out_dir, scenario, seed, None, [], status, f"{type(e).__name__}: {e}")
        return status

    frozen_y = cfg.kind == SolverKind.PICARD
    alpha2 = default_alpha2(g, cfg, frozen_y)
    beta = report.beta or cfg.beta or default_beta(g, grid.T, frozen_y)
    w = build_weight_profile(alpha2, grid, cfg.p, beta, cfg.alpha_floor, cfg.weight_mode)

    ctx = RunContext(scenario, g, psi, cfg, ens, ce, Y, Z, report, w, solver)
    try:
        results = run_checks(ctx, checks, verbose)
    except PybsvieError as e:
        print(Fore.RED + f"A check raised {type(e).__name__}: {e}", flush=True)
        write_report(out_dir, scenario, seed, report, [], EXIT_FAILED, f"{type(e).__name__}: {e}")
        return EXIT_FAILED

    status = EXIT_OK if all(r.passed for r in results) else EXIT_FAILED

    write_solution(Y, Z, grid, out_dir)
    write_report(out_dir, scenario, seed, report, results, status)
    _print_results(results)

    return status
