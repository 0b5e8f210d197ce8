from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from pybsvie.exceptions import ContractError, InputError, UnsupportedBuiltinError
from pybsvie.model.ensemble import PathEnsemble

FEATURE_TAGS = ("W_t", "W_T", "int_W_T")

FreeTermFunc = Callable[[float, Mapping[str, np.ndarray]], np.ndarray]


@dataclass(frozen=True)
class FreeTerm:
    """The free term psi(t), an F_T-measurable random variable for every t

    Attributes
    ----------
    name : str
    func : FreeTermFunc
        a function of the parameter t and a mapping of path features, each an array of shape
        `n x d`, returning an array of shape `n x m`
    feature_tags : Tuple[str, ...]
        the path features `func` reads. A subset of {"W_t", "W_T", "int_W_T"}
    dim : int
        the dimension m of psi
    t_independent : bool
        whether psi(t) = xi for a single terminal variable xi
    """

    name: str
    func: FreeTermFunc
    feature_tags: Tuple[str, ...] = ()
    dim: int = 1
    t_independent: bool = False

    def __post_init__(self):
        unknown = set(self.feature_tags) - set(FEATURE_TAGS)
        if unknown:
            raise ContractError(f"unknown feature tags: {sorted(unknown)}")
        object.__setattr__(self, "feature_tags", tuple(self.feature_tags))

    def __call__(self, t: float, features: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.func(t, features)

    def values(self, ens: PathEnsemble) -> np.ndarray:
        """psi(t_i) on every path, shape `M x (N+1) x m`

        Raises
        ------
        InputError
            if psi is not finite on the ensemble
        """
        W = ens.states
        features = {"W_T": W[:, -1], "int_W_T": ens.integrated_states[:, -1]}
        psi = np.empty((ens.M, ens.N + 1, self.dim))
        for i, t in enumerate(ens.grid.nodes):
            features["W_t"] = W[:, i]
            psi[:, i] = np.broadcast_to(self.func(t, features), (ens.M, self.dim))

        if not np.all(np.isfinite(psi)):
            raise InputError(f'free term "{self.name}" is not finite on the ensemble!')

        return psi


def _component(W: np.ndarray, m: int) -> np.ndarray:
    """the first m Brownian components (cycled when m > d), shape `n x m`"""
    d = W.shape[-1]
    return W[..., [k % d for k in range(m)]]


def constant(c: float = 0.0, dim: int = 1) -> FreeTerm:
    return FreeTerm("constant", lambda t, F: np.full((1, dim), float(c)), (), dim, True)


def polynomial(
    c0: float = 0.0,
    c_terminal: float = 0.0,
    c_scaled_terminal: float = 0.0,
    c_state: float = 0.0,
    c_terminal_sq: float = 0.0,
    dim: int = 1,
) -> FreeTerm:
    """psi(t) = c0 + (c_terminal + c_scaled_terminal t) W(T) + c_state W(t) + c_terminal_sq W(T)^2
    """

    def func(t, F):
        value = np.full((1, dim), float(c0))
        if c_terminal or c_scaled_terminal or c_terminal_sq:
            WT = _component(F["W_T"], dim)
            value = value + (c_terminal + c_scaled_terminal * t) * WT + c_terminal_sq * WT**2
        if c_state:
            value = value + c_state * _component(F["W_t"], dim)
        return value

    tags = []
    if c_terminal or c_scaled_terminal or c_terminal_sq:
        tags.append("W_T")
    if c_state:
        tags.append("W_t")
    t_independent = not (c_scaled_terminal or c_state)

    return FreeTerm("polynomial", func, tuple(tags), dim, t_independent)


def scaled_terminal(scale: float = 1.0, offset: float = 0.0, dim: int = 1) -> FreeTerm:
    """psi(t) = (offset + scale*t) W(T)"""
    term = polynomial(c_terminal=offset, c_scaled_terminal=scale, dim=dim)
    return FreeTerm("scaled_terminal", term.func, term.feature_tags, dim, term.t_independent)


def terminal(payoff: str = "linear", dim: int = 1) -> FreeTerm:
    """psi(t) = xi for xi in {W(T), W(T)^2, exp(W(T))}"""
    payoffs = {"linear": lambda x: x, "square": lambda x: x**2, "exp": np.exp}
    try:
        g = payoffs[payoff]
    except KeyError:
        raise UnsupportedBuiltinError(f'Unrecognized terminal payoff: "{payoff}"')

    return FreeTerm(
        "terminal", lambda t, F: g(_component(F["W_T"], dim)), ("W_T",), dim, t_independent=True
    )


def path_average(dim: int = 1) -> FreeTerm:
    """psi(t) = int_0^T W(s) ds, a functional of the whole path"""
    return FreeTerm(
        "path_average", lambda t, F: _component(F["int_W_T"], dim), ("int_W_T",), dim, True
    )


BUILTINS: Dict[str, Callable[..., FreeTerm]] = {
    "constant": constant,
    "polynomial": polynomial,
    "scaled_terminal": scaled_terminal,
    "terminal": terminal,
    "path_average": path_average,
}


def build_free_term(name: str, params: Optional[Dict] = None, dim: int = 1) -> FreeTerm:
    try:
        factory = BUILTINS[name.lower()]
    except KeyError:
        raise UnsupportedBuiltinError(f'Unrecognized free term: "{name}"')

    try:
        return factory(**(params or {}), dim=dim)
    except TypeError as e:
        raise UnsupportedBuiltinError(f'Bad parameters for free term "{name}": {e}')
