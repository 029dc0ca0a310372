import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wae.domain import AssignmentMatrix, DimensionMismatch
from wae.normalization import (
    NegativeEntry,
    ZeroSum,
    combined_load,
    load_distribution,
    normalize,
    normalize_or_empty,
    placement_vector,
)


def test_uniform():
    assert normalize([1, 1, 1, 1]).weights == (0.25, 0.25, 0.25, 0.25)


def test_single_mass():
    assert normalize([0, 0, 0, 7]).weights == (0.0, 0.0, 0.0, 1.0)


def test_evaluation_user_counts():
    counts = [5000, 1500, 500, 0]
    total = sum(counts)
    expected = [c / total for c in counts]
    assert normalize(counts).as_array() == pytest.approx(expected, abs=1e-12)
    assert normalize(counts)[0] == pytest.approx(0.714285714, abs=1e-9)


def test_zero_sum_and_negative():
    with pytest.raises(ZeroSum):
        normalize([0, 0, 0, 0])
    with pytest.raises(NegativeEntry) as e:
        normalize([1, -1, 0, 0])
    assert e.value.index == 1
    empty = normalize_or_empty([0, 0, 0])
    assert empty.empty
    assert empty.weights == (0.0, 0.0, 0.0)


def test_combined_load():
    assert combined_load([0, 0, 0], [0, 0, 0]).tolist() == [0, 0, 0]
    assert combined_load([0.32, 0.28, 0.25], [0.48, 0.42, 0.51]) == pytest.approx([0.80, 0.70, 0.76])
    assert combined_load([1, 0], [0, 1]).tolist() == [1, 1]
    with pytest.raises(DimensionMismatch):
        combined_load([1, 0], [0, 1, 0])


def test_load_distribution_examples():
    assert load_distribution([1, 1], AssignmentMatrix([[1, 0], [0, 1]])).weights == (0.5, 0.5)
    full = AssignmentMatrix(np.ones((3, 4)))
    assert load_distribution([0.8, 0.7, 0.76], full).as_array() == pytest.approx([0.25] * 4)

    a = AssignmentMatrix([[1, 0], [1, 1]])
    assert placement_vector([0.6, 0.4], a) == pytest.approx([1.0, 0.4])
    assert load_distribution([0.6, 0.4], a).as_array() == pytest.approx([1 / 1.4, 0.4 / 1.4])


def test_placement_vector_matches_brute_force_multiply():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n, m = rng.integers(1, 6), rng.integers(1, 6)
        v = rng.uniform(0, 2, size=n)
        a = rng.integers(0, 2, size=(n, m))
        expected = [sum(v[i] * a[i, j] for i in range(n)) for j in range(m)]
        assert placement_vector(v, AssignmentMatrix(a)) == pytest.approx(expected)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e6, allow_nan=False), min_size=1, max_size=8)
       .filter(lambda v: sum(v) > 0))
def test_normalized_is_a_distribution(v):
    w = normalize(v).as_array()
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_ten_thousand_random_vectors():
    rng = np.random.default_rng(2024)
    for v in rng.uniform(0, 100, size=(10_000, 4)):
        w = normalize(v).as_array()
        assert abs(w.sum() - 1.0) <= 1e-9
        assert np.all(w >= 0)
        assert np.abs(normalize(v * 37.5).as_array() - w).max() <= 1e-9
        assert np.array_equal(np.argsort(w, kind="stable"), np.argsort(v, kind="stable"))


vectors = st.lists(st.floats(min_value=0, max_value=1e6, allow_nan=False), min_size=1, max_size=8) \
    .filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=500, deadline=None)
@given(vectors, st.floats(min_value=1e-3, max_value=1e3))
def test_scale_invariance(v, k):
    scaled = normalize([k * x for x in v]).as_array()
    assert scaled == pytest.approx(normalize(v).as_array(), abs=1e-9)


@settings(max_examples=500, deadline=None)
@given(vectors)
def test_order_is_preserved(v):
    w = normalize(v).weights
    for i in range(len(v)):
        for j in range(len(v)):
            if v[i] < v[j]:
                assert w[i] <= w[j]
            elif v[i] == v[j]:
                assert w[i] == w[j]


@settings(max_examples=500, deadline=None)
@given(vectors)
def test_normalize_is_idempotent(v):
    once = normalize(v).as_array()
    assert normalize(once).as_array() == pytest.approx(once, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.0, 1e-9, 1.0, 250.0]), min_size=1, max_size=6))
def test_zero_sum_exactly_when_all_zero(v):
    if sum(v) == 0:
        with pytest.raises(ZeroSum):
            normalize(v)
    else:
        assert normalize(v).as_array().sum() == pytest.approx(1.0, abs=1e-9)
