import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from semalloc.errors import DomainError
from semalloc.semantics import (
    ImportanceWeights, achieved_ratio, asc_compress, importance_weights, mi_gap, mi_upper_bound,
    mutual_information, read_tensor, read_weights_csv, threshold_for_ratio, write_tensor,
    write_weights_csv,
)

BSC = np.array([[0.375, 0.125], [0.125, 0.375]])


def test_pooling_examples():
    assert importance_weights(np.ones((1, 2, 2))).omega[0] == 1.0
    assert importance_weights(np.array([[[1, 2], [3, 6]]])).omega[0] == 3.0
    assert importance_weights(np.zeros((1, 3, 3))).omega[0] == 0.0
    with pytest.raises(DomainError):
        importance_weights(np.zeros((0, 2, 2)))


@given(arrays(float, (3, 2, 2), elements=st.floats(-10, 10)),
       arrays(float, (3, 2, 2), elements=st.floats(-10, 10)),
       st.floats(-3, 3), st.floats(-3, 3))
def test_pooling_is_linear(g1, g2, a, b):
    lhs = importance_weights(a * g1 + b * g2).omega
    rhs = a * importance_weights(g1).omega + b * importance_weights(g2).omega
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_threshold_examples():
    w = ImportanceWeights([0.9, 0.5, 0.3, 0.1])
    f = np.arange(4.0)[:, None, None] + np.ones((4, 2, 2))
    kept = lambda t: set(np.nonzero(asc_compress(f, w, t).reshape(4, -1).any(axis=1))[0])
    assert threshold_for_ratio(w, 0.5) == 0.5
    assert kept(threshold_for_ratio(w, 0.5)) == {0, 1}
    assert kept(threshold_for_ratio(w, 0.75)) == {0}
    assert kept(threshold_for_ratio(w, 0.0)) == {0, 1, 2, 3}
    with pytest.raises(DomainError):
        threshold_for_ratio(w, 1.0)


def test_ties_are_kept():
    w = ImportanceWeights([0.5, 0.5, 0.5, 0.1])
    t = threshold_for_ratio(w, 0.5)
    # cannot drop exactly half without splitting the tie; the tie survives whole
    assert achieved_ratio(w, t) in (0.25, 0.0) or t == 0.5
    assert np.count_nonzero(w.omega >= t) >= 1


@given(arrays(float, st.integers(1, 20), elements=st.floats(0, 1)), st.floats(0, 0.999))
def test_threshold_reaches_smallest_feasible_ratio(omega, o):
    w = ImportanceWeights(omega)
    t = threshold_for_ratio(w, o)
    r = achieved_ratio(w, t)
    # at least one feature survives
    assert np.count_nonzero(w.omega >= t) >= 1
    # every achievable ratio strictly between o and r would need a threshold between ties
    cands = sorted({achieved_ratio(w, v) for v in np.unique(w.omega)})
    ok = [c for c in cands if c >= o - 1e-12]
    if ok:
        assert r == pytest.approx(ok[0])


@given(arrays(float, (5, 2, 3), elements=st.floats(-5, 5)), st.floats(-1, 1))
def test_compression_is_idempotent(f, t):
    w = ImportanceWeights(np.linspace(-1, 1, 5))
    once = asc_compress(f, w, t)
    assert np.array_equal(asc_compress(once, w, t), once)


def test_mi_examples():
    assert mutual_information(BSC) == pytest.approx(math.log(2) - (-(0.25 * math.log(0.25) + 0.75 * math.log(0.75))), abs=1e-12)
    assert mi_upper_bound(BSC) == pytest.approx(0.25 * math.log(3), abs=1e-12)
    assert mi_gap(BSC) == pytest.approx(0.1438410, abs=1e-7)
    ind = np.outer([0.3, 0.7], [0.6, 0.4])
    assert mutual_information(ind) == pytest.approx(0.0, abs=1e-15)
    assert mi_upper_bound(ind) == pytest.approx(0.0, abs=1e-15)
    assert mi_upper_bound(np.eye(2) / 2) == math.inf
    assert mutual_information(np.eye(2) / 2) == pytest.approx(math.log(2))


def test_mi_rejects_invalid_joint():
    with pytest.raises(DomainError):
        mutual_information(np.array([[0.5, 0.6]]))
    with pytest.raises(DomainError):
        mi_upper_bound(np.array([[-0.1, 1.1]]))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_upper_bound_dominates(nx, ny, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    p /= p.sum()
    assert mi_upper_bound(p) >= mutual_information(p) - 1e-12
    assert mi_gap(p) >= -1e-12


def test_tensor_and_weight_files(tmp_path):
    a = np.arange(24.0).reshape(2, 3, 4)
    for name in ("t.bin", "t.txt"):
        write_tensor(a, tmp_path / name)
        assert np.array_equal(read_tensor(tmp_path / name), a)
    np.save(tmp_path / "t.npy", a)
    assert np.array_equal(read_tensor(tmp_path / "t.npy"), a)
    w = ImportanceWeights([0.25, 0.5, 1.0])
    write_weights_csv(w, tmp_path / "w.csv")
    assert np.array_equal(read_weights_csv(tmp_path / "w.csv").omega, w.omega)
