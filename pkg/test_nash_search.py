import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nash_search import first_pure_nash, first_pure_nash_batch, is_pure_nash


def brute_force_first_nash(Q1, Q2):
    n1, n2 = Q1.shape
    for count, (i, j) in enumerate(itertools.product(range(n1), range(n2)), start=1):
        if Q1[i, j] <= Q1[:, j].min() and Q2[i, j] <= Q2[i, :].min():
            return True, i, j, count
    return False, 0, 0, n1 * n2


def test_matching_pennies_has_no_pure_equilibrium():
    found, _, _, checked = first_pure_nash([[0, 1], [1, 0]], [[1, 0], [0, 1]])
    assert not found
    assert checked == 4


def test_prisoners_dilemma_in_costs():
    assert first_pure_nash([[1, 3], [0, 2]], [[1, 0], [3, 2]])[:3] == (True, 1, 1)


def test_ties_pick_first_in_lexicographic_order():
    Q = np.zeros((3, 3))
    assert first_pure_nash(Q, Q) == (True, 0, 0, 1)


def test_separable_costs_pick_own_minimizer():
    a = np.linspace(-1, 1, 5)
    Q1 = np.add.outer(a ** 2, np.zeros(5))
    Q2 = np.add.outer(np.zeros(5), (a - 0.5) ** 2)
    found, i1, i2, _ = first_pure_nash(Q1, Q2)
    assert found and a[i1] == 0.0 and a[i2] == 0.5


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        first_pure_nash_batch(np.zeros((1, 2, 3)), np.zeros((1, 3, 2)))


small_games = st.integers(1, 4).flatmap(lambda n1: st.integers(1, 4).flatmap(
    lambda n2: st.tuples(arrays(np.float64, (n1, n2), elements=st.integers(-3, 3).map(float)),
                         arrays(np.float64, (n1, n2), elements=st.integers(-3, 3).map(float)))))


@settings(max_examples=300)
@given(small_games)
def test_agrees_with_brute_force(game):
    Q1, Q2 = game
    assert first_pure_nash(Q1, Q2) == brute_force_first_nash(Q1, Q2)


@settings(max_examples=100)
@given(small_games)
def test_returned_pair_is_nash(game):
    Q1, Q2 = game
    found, i1, i2, _ = first_pure_nash(Q1, Q2)
    if found:
        assert is_pure_nash(Q1, Q2, i1, i2)


def test_batch_matches_single_games():
    rng = np.random.default_rng(0)
    Q1 = rng.integers(-2, 3, size=(50, 3, 4)).astype(float)
    Q2 = rng.integers(-2, 3, size=(50, 3, 4)).astype(float)
    found, i1, i2, checked = first_pure_nash_batch(Q1, Q2)
    for k in range(50):
        assert (bool(found[k]), int(i1[k]), int(i2[k]), int(checked[k])) == brute_force_first_nash(Q1[k], Q2[k])
