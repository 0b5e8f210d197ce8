"""Moduli of continuity for drivers that are not Lipschitz in y"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from pybsvie.exceptions import ConfigurationError, ContractError

DEFAULT_CAP = 0.1
SCAN_MAX = 100.0
HEADROOM = 1.1
CONCAVITY_ATOL = 1e-12


@dataclass(frozen=True)
class Modulus:
    """An increasing concave function rho with rho(0) = 0 and rho(u) <= a + b*u

    Attributes
    ----------
    name : str
    rho : Callable[[np.ndarray], np.ndarray]
        the (vectorized) modulus
    a : float
    b : float
        the coefficients of the linear bound
    osgood : bool
        whether the integral of 1/rho diverges at 0+. Declared, not machine-checked
    """

    name: str
    rho: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    osgood: bool = True

    def __call__(self, u):
        return self.rho(u)

    @property
    def linear_bound(self) -> Tuple[float, float]:
        return self.a, self.b

    @classmethod
    def from_rho(cls, name: str, rho: Callable, osgood: bool = True) -> "Modulus":
        a, b = linear_bound(rho)
        return cls(name, rho, a, b, osgood)


def linear_bound(
    rho: Callable[[np.ndarray], np.ndarray], u_max: float = SCAN_MAX, headroom: float = HEADROOM
) -> Tuple[float, float]:
    """Find (a, b) > 0 with rho(u) <= a + b*u by a scan of (0, u_max]

    b is the chord slope of rho over [u_max/2, u_max]. For a concave rho that slope bounds the
    derivative beyond u_max, so the bound found on the scan holds for all u >= 0.
    """
    u = np.unique(np.concatenate([np.geomspace(1e-12, u_max, 2000), np.linspace(0, u_max, 2001)]))
    r = rho(u)

    b = (float(rho(np.array(u_max))) - float(rho(np.array(u_max / 2)))) / (u_max / 2)
    b = headroom * max(b, 1e-3)
    a = headroom * max(float(np.max(r - b * u)), 1e-12)

    return a, b


def midpoint_concave(
    func: Callable[[np.ndarray], np.ndarray], lo: float = 0.0, hi: float = 1.0, n: int = 100
) -> bool:
    """whether func((u+v)/2) >= (func(u) + func(v))/2 on an `n x n` sample grid of [lo, hi]"""
    u = np.linspace(lo, hi, n)
    U, V = np.meshgrid(u, u)
    lhs = func((U + V) / 2)
    rhs = (func(U) + func(V)) / 2

    return bool(np.all(lhs >= rhs - CONCAVITY_ATOL))


def check_modulus(modulus: Modulus, hi: float = 2.0, n: int = 100) -> None:
    """Validate a modulus on a sample grid of [0, hi]

    Raises
    ------
    ContractError
        if rho(0) != 0, rho is decreasing somewhere, rho fails the midpoint concavity test or
        exceeds its linear bound
    """
    u = np.linspace(0.0, hi, 10 * n)
    r = modulus(u)
    if r[0] != 0:
        raise ContractError(f'modulus "{modulus.name}" has rho(0) = {r[0]}!')
    if np.any(np.diff(r) < -CONCAVITY_ATOL):
        raise ContractError(f'modulus "{modulus.name}" is not nondecreasing!')
    if not midpoint_concave(modulus.rho, 0.0, hi, n):
        raise ContractError(f'modulus "{modulus.name}" fails the midpoint concavity test!')
    if np.any(r > modulus.a + modulus.b * u):
        raise ContractError(f'modulus "{modulus.name}" exceeds its linear bound!')


def _xlog(x):
    """x ln(1/x), continuous at 0"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, -x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _capped(core: Callable, slope: Callable, delta: float) -> Callable:
    """extend `core` past `delta` linearly with its left derivative at `delta`"""
    value = float(core(np.array(delta)))
    s = float(slope(delta))

    def rho(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= delta, core(np.minimum(x, delta)), value + s * (x - delta))

    return rho


def rho_log(delta: float = DEFAULT_CAP) -> Modulus:
    """x ln(1/x) on [0, delta], continued linearly"""
    if not 0 < delta < np.exp(-1):
        raise ConfigurationError(f"cap must lie in (0, 1/e)! got: {delta}")

    rho = _capped(_xlog, lambda x: np.log(1 / x) - 1, delta)

    return Modulus.from_rho("log", rho)


def rho_loglog(delta: float = DEFAULT_CAP) -> Modulus:
    """x ln(1/x) ln ln(1/x) on [0, delta], continued linearly"""
    L = np.log(1 / delta) if 0 < delta < 1 else 0.0
    if not (0 < delta < np.exp(-1) and (L - 1) * np.log(L) > 1):
        raise ConfigurationError(
            f"cap {delta} is too large: x ln(1/x) ln ln(1/x) is not increasing up to it!"
        )

    def core(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            Lx = np.log(1 / np.where(x > 0, x, 1.0))
            return np.where(x > 0, x * Lx * np.log(np.where(x > 0, Lx, np.e)), 0.0)

    def slope(x):
        Lx = np.log(1 / x)
        return Lx * np.log(Lx) - np.log(Lx) - 1

    return Modulus.from_rho("loglog", _capped(core, slope, delta))


def rho_log1p(x) -> np.ndarray:
    """x ln(1 + 1/x) for 0 < x < 1, ln 2 for x >= 1 and 0 at 0"""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        core = x * np.log1p(1 / np.where(x > 0, x, 1.0))
    return np.where(x <= 0, 0.0, np.where(x < 1, core, np.log(2.0)))


def standard_moduli(delta: float = DEFAULT_CAP) -> List[Modulus]:
    """the three reference moduli: the capped x ln(1/x), the capped x ln(1/x) ln ln(1/x) and
    x ln(1 + 1/x) saturating at ln 2"""
    return [rho_log(delta), rho_loglog(delta), Modulus.from_rho("log1p", rho_log1p)]


def get_modulus(name: Optional[str], delta: float = DEFAULT_CAP) -> Optional[Modulus]:
    if name is None:
        return None

    for modulus in standard_moduli(delta):
        if modulus.name == name.lower():
            return modulus

    raise ConfigurationError(f'Unrecognized modulus: "{name}"')


def f_example(x, delta: float = DEFAULT_CAP) -> np.ndarray:
    """|x| ln(1 + 1/|x|)^(1/2) for 0 < |x| < delta, frozen at its value at delta beyond, 0 at 0

    |f(y) - f(y')| <= rho(|y - y'|^2)^(1/2) with rho = `rho_log1p`
    """
    if not 0 < delta < 1:
        raise ConfigurationError(f"cap must lie in (0, 1)! got: {delta}")

    a = np.minimum(np.abs(np.asarray(x, dtype=float)), delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = a * np.sqrt(np.log1p(1 / np.where(a > 0, a, 1.0)))

    return np.where(a > 0, value, 0.0)
