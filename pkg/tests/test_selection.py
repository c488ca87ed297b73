import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semalloc.errors import DomainError
from semalloc.selection import (
    SelectionInstance, branch_and_bound, exhaustive, fits, lp_relaxation, value,
)


def inst(v, b, cap_b, p=None, cap_p=None):
    p = np.zeros(len(v)) if p is None else p
    return SelectionInstance(v, b, p, cap_b, 1.0 if cap_p is None else cap_p)


def test_lp_examples():
    beta, bound = lp_relaxation(inst([5, 4], [3, 2], 3))
    np.testing.assert_allclose(beta, [1 / 3, 1], atol=1e-9)
    assert bound == pytest.approx(17 / 3)
    beta, bound = lp_relaxation(inst([3, 2, 2], [2, 1, 1], 2))
    np.testing.assert_allclose(beta, [0, 1, 1], atol=1e-9)
    assert bound == pytest.approx(4.0)
    beta, bound = lp_relaxation(inst([1, 2, 3], [1, 1, 1], 10))
    np.testing.assert_allclose(beta, [1, 1, 1])
    assert bound == pytest.approx(6.0)


def test_bnb_examples():
    assert branch_and_bound(inst([5, 4], [3, 2], 3)).tolist() == [1, 0]
    assert branch_and_bound(inst([1, 2, 3], [1, 1, 1], 10)).tolist() == [1, 1, 1]
    assert branch_and_bound(inst([], [], 1)).tolist() == []


def test_validation():
    with pytest.raises(DomainError):
        SelectionInstance([1, 2], [1], [1, 1], 1, 1)
    with pytest.raises(DomainError):
        SelectionInstance([-1], [1], [1], 1, 1)


@settings(max_examples=80)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_bnb_equals_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    i = SelectionInstance(rng.random(n), rng.random(n), rng.random(n), rng.random() * n / 2, rng.random() * n / 2)
    b = branch_and_bound(i)
    assert fits(i, b)
    assert value(i, b) == exhaustive(i)[1]
    assert lp_relaxation(i)[1] >= value(i, b) - 1e-9


def test_integer_costs_with_ties():
    # many equal-valued subsets; exact value must still match
    i = SelectionInstance([1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 1, 1], [2, 1, 2, 1, 2, 1], 3, 4)
    b = branch_and_bound(i)
    assert value(i, b) == exhaustive(i)[1] == 3.0
