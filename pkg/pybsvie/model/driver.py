from dataclasses import dataclass, field, replace
import warnings
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from pybsvie.exceptions import ConfigurationError, InputError, UnsupportedBuiltinError
from pybsvie.model.ensemble import PathEnsemble
from pybsvie.model.grid import TimeGrid
from pybsvie.model.modulus import DEFAULT_CAP, Modulus, f_example, get_modulus
from pybsvie.model.process import Process1P, Process2P
from pybsvie.warnings import KernelConditionWarning

DEFAULT_CLIP = 1e-3

DriverFunc = Callable[
    [float, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray
]


@dataclass(frozen=True)
class Kernel:
    """A nonnegative kernel L(t, s), vectorized in s

    Attributes
    ----------
    name : str
    func : Callable[[float, np.ndarray], np.ndarray]
    sup : float
        an upper bound of L on the grid
    gamma : float
        the order of the diagonal singularity. 0 for bounded kernels
    """

    name: str
    func: Callable[[float, np.ndarray], np.ndarray]
    sup: float
    gamma: float = 0.0

    def __call__(self, t: float, s: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.func(t, np.asarray(s, dtype=float)), np.shape(s))


def constant_kernel(k: float = 1.0) -> Kernel:
    if k < 0:
        raise ConfigurationError(f"kernel constant must be nonnegative! got: {k}")

    return Kernel("constant", lambda t, s: np.full(np.shape(s), float(k)), float(k))


def power_kernel(ell: float = 1.0, gamma: float = 0.25, clip: float = DEFAULT_CLIP) -> Kernel:
    """ell * (s - t)^(-gamma), with s - t clipped below at `clip`"""
    if ell < 0 or not 0 <= gamma < 1 or clip <= 0:
        raise ConfigurationError(
            f"power kernel needs ell >= 0, 0 <= gamma < 1 and clip > 0! got: {ell}, {gamma}, {clip}"
        )

    def func(t, s):
        return ell * np.maximum(np.abs(s - t), clip) ** (-gamma)

    return Kernel("power", func, ell * clip ** (-gamma), gamma)


KERNELS = {"constant": constant_kernel, "power": power_kernel}


def build_kernel(spec: Optional[Dict] = None, grid: Optional[TimeGrid] = None) -> Kernel:
    """build a kernel from a {"name": ..., **params} dict. A power kernel on a grid is clipped at
    half the smallest step unless a clip is given"""
    spec = dict(spec or {"name": "constant", "k": 1.0})
    name = spec.pop("name", "constant")
    if name == "power" and grid is not None:
        spec.setdefault("clip", float(grid.steps.min()) / 2)

    try:
        return KERNELS[name](**spec)
    except KeyError:
        raise UnsupportedBuiltinError(f'Unrecognized kernel: "{name}"')
    except TypeError as e:
        raise UnsupportedBuiltinError(f'Bad parameters for kernel "{name}": {e}')


def kernel_condition(kernel: Kernel, grid: TimeGrid, q: float) -> float:
    """sup_t (int_t^T L(t,s)^q ds)^(2/q) by trapezoid quadrature on the grid

    Warns with a KernelConditionWarning when gamma*q >= 1, where the continuous integral diverges
    and the value only reflects the clipping
    """
    values = [
        grid.integrate(kernel(t, grid.nodes) ** q, start=i) ** (2 / q)
        for i, t in enumerate(grid.nodes[:-1])
    ]
    if kernel.gamma * q >= 1:
        warnings.warn(
            f'kernel "{kernel.name}" has gamma*q = {kernel.gamma * q:0.3f} >= 1: '
            "int L^q diverges near the diagonal",
            KernelConditionWarning,
        )

    return float(max(values, default=0.0))


@dataclass(frozen=True)
class Driver:
    """The generator g(t, s, y, z, zeta) of a BSVIE

    `func` is vectorized over paths and over the second time parameter: it takes the scalar t,
    the nodes s of shape `K`, y of shape `M x K x m`, z and zeta of shape `M x K x m x d` and the
    Brownian states of shape `M x K x d` and returns an array of shape `M x K x m`.

    Attributes
    ----------
    name : str
    func : DriverFunc
    m : int
    d : int
    uses_zeta : bool
        whether g reads the reflected argument zeta = Z(s, t)
    kernel : Kernel
        the kernel L(t, s) of the Lipschitz (or modulus) condition
    r1, r2, r3 : float
        bounds of the coefficients of y, z and zeta
    q : float
        the kernel integrability exponent, q > 2
    modulus : Optional[Modulus]
        if given, g is only rho-continuous in y: the r1*|dy| term becomes r1*rho(|dy|^2)^(1/2)
    stochastic_coeffs : bool
        whether the coefficients r_i depend on the path. r_i are then their sup bounds
    """

    name: str
    func: DriverFunc
    m: int = 1
    d: int = 1
    uses_zeta: bool = False
    kernel: Kernel = field(default_factory=constant_kernel)
    r1: float = 0.0
    r2: float = 0.0
    r3: float = 0.0
    q: float = 4.0
    modulus: Optional[Modulus] = None
    stochastic_coeffs: bool = False

    def __post_init__(self):
        if not self.q > 2:
            raise ConfigurationError(f"kernel exponent q must exceed 2! got: {self.q}")
        if min(self.r1, self.r2, self.r3) < 0:
            raise ConfigurationError("Lipschitz coefficients must be nonnegative!")

    def __call__(self, t, s, y, z, zeta, W) -> np.ndarray:
        return self.func(t, s, y, z, zeta, W)

    @property
    def lipschitz(self) -> bool:
        return self.modulus is None

    @property
    def coeff_sq_sum(self) -> float:
        return self.r1**2 + self.r2**2 + self.r3**2

    def freeze(
        self,
        y: Process1P,
        z: Process2P,
        ens: PathEnsemble,
        use_zeta: Optional[bool] = None,
    ) -> np.ndarray:
        """f(t_i, t_k) = g(t_i, t_k, y(t_k), z(t_i, t_k), z(t_k, t_i)) on every path

        Returns
        -------
        np.ndarray
            an array of shape `M x (N+1) x (N+1) x m`

        Raises
        ------
        InputError
            if g is not finite at the frozen arguments
        """
        use_zeta = self.uses_zeta if use_zeta is None else use_zeta
        s = ens.grid.nodes
        W = ens.states
        zeros = np.zeros_like(z.values[:, 0])
        M, n = y.values.shape[:2]

        f = np.empty((M, n, n, self.m))
        for i, t in enumerate(s):
            zeta = z.values[:, :, i] if use_zeta else zeros
            f[:, i] = self.func(t, s, y.values, z.values[:, i], zeta, W)

        if not np.all(np.isfinite(f)):
            raise InputError(f'driver "{self.name}" is not finite at the frozen arguments!')

        return f

    def lipschitz_excess(self, n_pairs: int = 1000, seed: int = 0, scale: float = 2.0) -> float:
        """max over random argument pairs of |g - g'| - L(t,s)(r1|dy| + r2|dz| + r3|dzeta|)

        A value <= 0 means the declared condition holds on the sample. With a modulus the y term
        is r1*rho(|dy|^2)^(1/2).
        """
        rng = np.random.default_rng(seed)
        m, d = self.m, self.d
        t = rng.uniform(0, 1)
        s = np.sort(rng.uniform(t, 1 + t, n_pairs))

        def draw(*shape):
            return rng.uniform(-scale, scale, (1, n_pairs, *shape))

        y1, y2 = draw(m), draw(m)
        z1, z2 = draw(m, d), draw(m, d)
        w1, w2 = draw(m, d), draw(m, d)
        W = draw(d)

        g1 = self.func(t, s, y1, z1, w1, W)
        g2 = self.func(t, s, y2, z2, w2, W)
        lhs = np.linalg.norm(g1 - g2, axis=-1)

        dy = np.linalg.norm(y1 - y2, axis=-1)
        dz = np.linalg.norm((z1 - z2).reshape(1, n_pairs, -1), axis=-1)
        dw = np.linalg.norm((w1 - w2).reshape(1, n_pairs, -1), axis=-1)
        y_term = dy if self.modulus is None else np.sqrt(self.modulus(dy**2))
        rhs = self.kernel(t, s) * (self.r1 * y_term + self.r2 * dz + self.r3 * dw)

        return float(np.max(lhs - rhs))


def _frobenius(x: np.ndarray) -> np.ndarray:
    """|x| over the trailing `m x d` axes, shape `M x K x 1`"""
    return np.sqrt(np.sum(x**2, axis=(-2, -1)))[..., None]


def zero(m: int = 1, d: int = 1, kernel: Optional[Kernel] = None) -> Driver:
    return Driver(
        "zero",
        lambda t, s, y, z, zeta, W: np.zeros(np.broadcast_shapes(y.shape, (1, len(s), m))),
        m,
        d,
        kernel=kernel or constant_kernel(0.0),
    )


def linear(
    const: float = 0.0,
    y: float = 0.0,
    z: Optional[Sequence[float]] = None,
    zeta: Optional[Sequence[float]] = None,
    m: int = 1,
    d: int = 1,
    kernel: Optional[Kernel] = None,
) -> Driver:
    """g = L(t,s) * (const + y*y_k + sum_l z_l Z_{kl} + sum_l zeta_l zeta_{kl}) per component k"""
    kernel = kernel or constant_kernel(1.0)
    a_z = np.zeros(d) if z is None else np.asarray(z, dtype=float)
    a_zeta = np.zeros(d) if zeta is None else np.asarray(zeta, dtype=float)
    if a_z.shape != (d,) or a_zeta.shape != (d,):
        raise ConfigurationError(f"z and zeta coefficients must have length d={d}!")

    def func(t, s, Y, Z, Zeta, W):
        L = kernel(t, s)[None, :, None]
        g = const + y * Y + Z @ a_z
        if np.any(a_zeta):
            g = g + Zeta @ a_zeta
        return L * np.broadcast_to(g, np.broadcast_shapes(g.shape, (1, len(s), m)))

    return Driver(
        "linear",
        func,
        m,
        d,
        bool(np.any(a_zeta)),
        kernel,
        abs(y),
        float(np.linalg.norm(a_z)),
        float(np.linalg.norm(a_zeta)),
    )


def stochastic_linear(
    y: float = 0.0, z: Optional[Sequence[float]] = None, m: int = 1, d: int = 1, kernel=None
) -> Driver:
    """g = L(t,s) * c(s, W(s)) * (y*y_k + sum_l z_l Z_{kl}) with the path-dependent coefficient
    c = 1 / (1 + |W(s)|^2) in (0, 1]"""
    kernel = kernel or constant_kernel(1.0)
    a_z = np.zeros(d) if z is None else np.asarray(z, dtype=float)
    if a_z.shape != (d,):
        raise ConfigurationError(f"z coefficients must have length d={d}!")

    def func(t, s, Y, Z, Zeta, W):
        c = 1 / (1 + np.sum(W**2, axis=-1, keepdims=True))
        return kernel(t, s)[None, :, None] * c * (y * Y + Z @ a_z)

    return Driver(
        "stochastic_linear",
        func,
        m,
        d,
        False,
        kernel,
        abs(y),
        float(np.linalg.norm(a_z)),
        stochastic_coeffs=True,
    )


def f_y(delta: float = DEFAULT_CAP, m: int = 1, d: int = 1, kernel=None) -> Driver:
    """g = L(t,s) f(|y|) for the rho-continuous f of `f_example`"""
    kernel = kernel or constant_kernel(1.0)
    f_example(0.0, delta)

    def func(t, s, Y, Z, Zeta, W):
        y_abs = np.linalg.norm(Y, axis=-1, keepdims=True)
        g = kernel(t, s)[None, :, None] * f_example(y_abs, delta)
        return np.broadcast_to(g, np.broadcast_shapes(g.shape, (1, len(s), m)))

    r = float(np.sqrt(m))
    return Driver("f_y", func, m, d, False, kernel, r, modulus=get_modulus("log1p"))


def eq33(delta: float = DEFAULT_CAP, m: int = 1, d: int = 1, kernel=None) -> Driver:
    """g = L(t,s) [f(|y|) + |z| + |zeta|]"""
    kernel = kernel or constant_kernel(0.1)
    f_example(0.0, delta)

    def func(t, s, Y, Z, Zeta, W):
        y_abs = np.linalg.norm(Y, axis=-1, keepdims=True)
        g = f_example(y_abs, delta) + _frobenius(Z) + _frobenius(Zeta)
        g = kernel(t, s)[None, :, None] * g
        return np.broadcast_to(g, np.broadcast_shapes(g.shape, (1, len(s), m)))

    r = float(np.sqrt(m))
    return Driver("eq33", func, m, d, True, kernel, r, r, r, modulus=get_modulus("log1p"))


BUILTINS: Dict[str, Callable[..., Driver]] = {
    "zero": zero,
    "linear": linear,
    "stochastic_linear": stochastic_linear,
    "f_y": f_y,
    "eq33": eq33,
}


def build_driver(
    name: str,
    coefficients: Optional[Dict] = None,
    kernel: Optional[Dict] = None,
    m: int = 1,
    d: int = 1,
    grid: Optional[TimeGrid] = None,
    q: Optional[float] = None,
) -> Driver:
    """build a named builtin driver

    Parameters
    ----------
    name : str
        one of "zero", "linear", "stochastic_linear", "f_y" and "eq33"
    coefficients : Optional[Dict], default=None
        the keyword parameters of the builtin, e.g. the linear coefficient table
        {"const": c, "y": a, "z": [...], "zeta": [...]}
    kernel : Optional[Dict], default=None
        the kernel spec, e.g. {"name": "power", "ell": 1.0, "gamma": 0.25}
    m : int, default=1
    d : int, default=1
    grid : Optional[TimeGrid], default=None
        the grid used to clip singular kernels
    q : Optional[float], default=None
        the kernel integrability exponent. If None, keep the builtin's

    Raises
    ------
    UnsupportedBuiltinError
        if the name, kernel or parameters are unrecognized
    """
    try:
        factory = BUILTINS[name.lower()]
    except KeyError:
        raise UnsupportedBuiltinError(f'Unrecognized driver: "{name}"')

    params = dict(coefficients or {})
    if kernel is not None:
        params["kernel"] = build_kernel(kernel, grid)

    try:
        driver = factory(**params, m=m, d=d)
    except TypeError as e:
        raise UnsupportedBuiltinError(f'Bad parameters for driver "{name}": {e}')

    if q is not None:
        driver = replace(driver, q=q)

    return driver
