"""Seeded Brownian ensembles and elementary path statistics"""
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.special import ndtri

from pybsvie.exceptions import CapacityError, ConfigurationError, PreconditionError
from pybsvie.model import PathEnsemble, Process1P, TimeGrid
from pybsvie.utils import chunks, parallel_map

MAX_FLOATS = 200_000_000
MAX_STEPS = 64
MAX_DENSE_FLOATS = 250_000_000
BLOCK_SIZE = 4096
HEADER_DTYPE = np.dtype("<i8")
DATA_DTYPE = np.dtype("<f8")


def _stride(N: int, d: int) -> int:
    """Philox counter steps consumed by one path: each step yields four 64-bit words"""
    return -(-N * d // 4)


def _draw_block(args: Tuple) -> np.ndarray:
    """standard normal draws for the paths [start, stop), shape `(stop - start) x N x d`"""
    start, stop, N, d, seed = args
    stride = _stride(N, d)

    xi = np.empty((stop - start, N, d))
    for k, p in enumerate(range(start, stop)):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=p * stride))
        u = rng.random((N, d)) + 2.0**-54
        xi[k] = ndtri(u)

    return xi


def generate_paths(
    grid: TimeGrid,
    M: int,
    d: int = 1,
    seed: int = 0,
    threads: int = 1,
    max_floats: int = MAX_FLOATS,
) -> PathEnsemble:
    """Simulate M paths of a d-dimensional Brownian motion on the grid

    Every path p draws from its own Philox stream keyed by `seed` and started at a counter offset
    proportional to p. The ensemble is therefore the same for any number of threads.

    Parameters
    ----------
    grid : TimeGrid
    M : int
        the number of paths
    d : int, default=1
        the Brownian dimension
    seed : int, default=0
    threads : int, default=1
        the number of workers over which to distribute blocks of paths
    max_floats : int, default=MAX_FLOATS
        the memory budget for the states in floats

    Returns
    -------
    PathEnsemble

    Raises
    ------
    ConfigurationError
        if M < 1, d < 1 or the seed is negative
    CapacityError
        if M*(N+1)*d exceeds `max_floats`
    """
    if M < 1 or d < 1:
        raise ConfigurationError(f"M and d must be positive! got: M={M}, d={d}")
    if seed < 0:
        raise ConfigurationError(f"seed must be nonnegative! got: {seed}")

    N = grid.step_count
    if M * (N + 1) * d > max_floats:
        raise CapacityError(
            f"an ensemble of {M} x {N + 1} x {d} floats exceeds the budget of {max_floats}!"
        )

    blocks = [(b[0], b[-1] + 1, N, d, seed) for b in chunks(range(M), BLOCK_SIZE)]
    xi = np.concatenate(parallel_map(_draw_block, blocks, threads), axis=0)
    dW = xi * np.sqrt(grid.steps)[None, :, None]

    return PathEnsemble(grid, dW, seed)


def dense_floats(M: int, N: int, m: int = 1, d: int = 1) -> int:
    """the floats held by one dense two-parameter array of shape `M x (N+1) x (N+1) x m x d`"""
    return M * (N + 1) ** 2 * m * d


def check_capacity(
    M: int,
    N: int,
    m: int = 1,
    d: int = 1,
    max_steps: int = MAX_STEPS,
    max_dense_floats: int = MAX_DENSE_FLOATS,
) -> int:
    """Check that the dense two-parameter arrays of a solve fit the budget

    Z(t, s) is stored densely on the grid square, so a solve holds a few arrays of
    M (N+1)^2 m d floats at once. The grid resolution is capped at `max_steps` steps.

    Returns
    -------
    int
        the size of the largest dense array in floats

    Raises
    ------
    CapacityError
        if N > max_steps or the largest dense array exceeds `max_dense_floats`
    """
    if N > max_steps:
        raise CapacityError(f"N={N} steps exceeds the resolution cap of {max_steps}!")

    n = dense_floats(M, N, m, d)
    if n > max_dense_floats:
        raise CapacityError(
            f"Z of {M} x {N + 1} x {N + 1} x {m} x {d} = {n} floats exceeds the budget of "
            f"{max_dense_floats}!"
        )

    return n


def sample_moments(ens: PathEnsemble) -> Tuple[np.ndarray, np.ndarray]:
    """the sample mean and variance of W at every node, each of shape `(N+1) x d`"""
    W = ens.states
    return W.mean(axis=0), W.var(axis=0, ddof=1)


def adapted_threshold(M: int) -> float:
    return 3 / np.sqrt(M)


def check_adapted(
    proc: Union[Process1P, np.ndarray], ens: PathEnsemble, j: int
) -> float:
    """The R^2 of the least-squares regression of proc(t_j) on the future increments dW_j..dW_{N-1}

    An adapted process is independent of the future increments, so its R^2 is of order the number
    of regressors over M, well below `adapted_threshold(M)`. A constant process has R^2 = 0 by
    convention, as does any process at j = N.

    Parameters
    ----------
    proc : Union[Process1P, np.ndarray]
        the process or its values of shape `M x (N+1) x m`
    ens : PathEnsemble
    j : int

    Returns
    -------
    float
        the largest R^2 over the components of proc
    """
    values = proc.values if isinstance(proc, Process1P) else np.asarray(proc, dtype=float)
    if values.shape[0] != ens.M or values.shape[1] != ens.N + 1:
        raise PreconditionError(
            f"process of shape {values.shape} is not defined on an ensemble of {ens.M} paths "
            f"and {ens.N + 1} nodes!"
        )
    if j >= ens.N:
        return 0.0

    Y = values[:, j].reshape(ens.M, -1)
    X = ens.increments[:, j:].reshape(ens.M, -1)
    X = np.column_stack([np.ones(ens.M), X])

    Yc = Y - Y.mean(axis=0)
    sst = np.sum(Yc**2, axis=0)
    scale = np.maximum(np.abs(Y).max(axis=0), 1.0)
    if np.all(sst <= (1e-12 * scale) ** 2 * ens.M):
        return 0.0

    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    ssr = np.sum((Y - X @ coef) ** 2, axis=0)
    r2 = np.where(sst > (1e-12 * scale) ** 2 * ens.M, 1 - ssr / np.where(sst > 0, sst, 1), 0.0)

    return float(np.clip(r2, 0.0, 1.0).max())


def dump_ensemble(ens: PathEnsemble, path: Union[str, Path]) -> Path:
    """write the ensemble to `path`: the header M, N, d, seed as little-endian 64-bit integers,
    then the increments as little-endian 64-bit floats in C order"""
    path = Path(path)
    header = np.array([ens.M, ens.N, ens.d, ens.seed], dtype=HEADER_DTYPE)
    with open(path, "wb") as fid:
        fid.write(header.tobytes())
        fid.write(np.ascontiguousarray(ens.increments, dtype=DATA_DTYPE).tobytes())

    return path


def load_ensemble(path: Union[str, Path], grid: TimeGrid) -> PathEnsemble:
    """read an ensemble written by `dump_ensemble`

    Raises
    ------
    PreconditionError
        if the file is truncated or its step count does not match the grid
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4 * HEADER_DTYPE.itemsize:
        raise PreconditionError(f'"{path}" is too short to hold an ensemble header!')

    M, N, d, seed = np.frombuffer(raw[: 4 * HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE).tolist()
    if N != grid.step_count:
        raise PreconditionError(f'"{path}" holds {N} steps but the grid has {grid.step_count}!')

    data = np.frombuffer(raw[4 * HEADER_DTYPE.itemsize :], dtype=DATA_DTYPE)
    if data.size != M * N * d:
        raise PreconditionError(f'"{path}" holds {data.size} floats, expected {M * N * d}!')

    return PathEnsemble(grid, data.reshape(M, N, d).astype(float), seed)
