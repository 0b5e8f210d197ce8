import numpy as np
import pytest

from pybsvie.utils import Domain, SolverKind, SolverMode, WeightMode, chunks, safe_ratio


@pytest.fixture(params=[1, 3, 7])
def size(request):
    return request.param


@pytest.mark.parametrize(
    "enum,s,expected",
    [
        (SolverMode, "m_solution", SolverMode.M_SOLUTION),
        (SolverMode, "m-solution", SolverMode.M_SOLUTION),
        (SolverMode, "ADAPTED", SolverMode.ADAPTED),
        (WeightMode, "a_star", WeightMode.A_STAR),
        (Domain, "square", Domain.FULL),
        (Domain, "upper", Domain.UPPER),
        (SolverKind, "picard", SolverKind.PICARD),
    ],
)
def test_from_str(enum, s, expected):
    assert enum.from_str(s) == expected


@pytest.mark.parametrize("s", ["foo", "lower", "m_soln"])
def test_from_str_invalid(s):
    with pytest.raises(KeyError):
        SolverMode.from_str(s)


def test_coerce_passthrough():
    assert SolverMode.coerce(SolverMode.ADAPTED) is SolverMode.ADAPTED


def test_chunks(size):
    items = list(range(20))
    cs = list(chunks(items, size))

    assert all(len(c) == size for c in cs[:-1])
    assert 0 < len(cs[-1]) <= size
    assert sum(cs, []) == items


def test_safe_ratio_conventions():
    r = safe_ratio(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.0, 4.0]))

    np.testing.assert_array_equal(r, [0.0, np.inf, 0.5])


def test_safe_ratio_scalar():
    assert safe_ratio(3.0, 2.0) == 1.5
