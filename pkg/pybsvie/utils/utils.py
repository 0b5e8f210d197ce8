__all__ = [
    "AutoName",
    "Domain",
    "SolverKind",
    "SolverMode",
    "Verdict",
    "WeightMode",
    "chunks",
    "parallel_map",
    "safe_ratio",
]

from enum import Enum, auto
from itertools import islice
from typing import Callable, Iterable, Iterator, List, Sequence, TypeVar

import numpy as np
import ray

T = TypeVar("T")
U = TypeVar("U")


class AutoName(Enum):
    def _generate_next_value_(name, start, count, last_values):
        return name

    @classmethod
    def from_str(cls, s):
        return cls[s.replace("-", "_").upper()]

    @classmethod
    def coerce(cls, value):
        return value if isinstance(value, cls) else cls.from_str(value)


class SolverMode(AutoName):
    """Which notion of solution is computed. M_SOLUTION populates the lower triangle of Z through
    the martingale representation of Y; ADAPTED only needs Z on t <= s"""

    M_SOLUTION = auto()
    ADAPTED = auto()


class WeightMode(AutoName):
    """The exponent process used in the weighted norms: A(t) or the star process A*(t)"""

    A = auto()
    A_STAR = auto()


class Domain(AutoName):
    """The part of [0,T]^2 on which a two-parameter process lives. FULL is the square"""

    UPPER = auto()
    FULL = auto()

    @classmethod
    def from_str(cls, s):
        s = s.replace("-", "_").upper()
        return cls.FULL if s == "SQUARE" else cls[s]


class SolverKind(AutoName):
    SIMPLE = auto()
    LIPSCHITZ = auto()
    PICARD = auto()


class Verdict(AutoName):
    CONSISTENT = auto()
    VIOLATED = auto()


def chunks(it: Iterable, size: int) -> Iterator[List]:
    """chunk an iterable into chunks of given size, with the last chunk being potentially smaller"""
    it = iter(it)
    return iter(lambda: list(islice(it, size)), [])


def parallel_map(func: Callable[[T], U], items: Sequence[T], threads: int = 1) -> List[U]:
    """Map `func` over `items`, preserving order.

    With `threads > 1` the calls are distributed over a local ray cluster. The output does not
    depend on the number of workers so long as `func` is deterministic in its argument.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    if not ray.is_initialized():
        try:
            ray.init(num_cpus=threads, include_dashboard=False)
        except PermissionError:
            print("Failed to create a temporary directory for ray")
            raise

    remote_func = ray.remote(num_cpus=1)(func)
    refs = [remote_func.remote(item) for item in items]

    return ray.get(refs)


def safe_ratio(lhs: np.ndarray, rhs: np.ndarray, eps: float = 1e-300) -> np.ndarray:
    """lhs / rhs with the convention 0 / 0 = 0 and x / 0 = inf for x > 0"""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > eps, lhs / np.where(rhs > eps, rhs, 1.0), np.inf)
    ratio = np.where((np.abs(lhs) <= eps) & (rhs <= eps), 0.0, ratio)

    return ratio if ratio.ndim else float(ratio)
