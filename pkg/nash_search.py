"""
Module: nash_search.py

Description:
Exhaustive search for pure-strategy Nash equilibria of two-player cost
bimatrices. Pairs are scanned in lexicographic order (first player's control
is the outer index) and the first pair where neither player can lower their
own cost by a unilateral deviation is returned.

Author: F.Ahmadzade
"""

from typing import Tuple

import numpy as np


def first_pure_nash_batch(Q1: np.ndarray,
                          Q2: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    First pure Nash pair of many cost bimatrices at once.

    Args:
        Q1 (np.ndarray): Costs of player 1, shape (n, n1, n2); Q1[k, i, l] is the
            cost of pair (i, l) in game k.
        Q2 (np.ndarray): Costs of player 2, same shape.

    Returns:
        Tuple of arrays of length n: found flag, index of player 1's control,
        index of player 2's control, and the number of pairs scanned (the
        position of the returned pair plus one, or n1*n2 when none exists).
        Indices are 0 where nothing was found.
    """
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    if Q1.shape != Q2.shape or Q1.ndim != 3:
        raise ValueError(f"Cost tables must share a shape (n, n1, n2), got {Q1.shape} and {Q2.shape}")
    n, n1, n2 = Q1.shape

    # player 1 best responds over axis 1 (its own control) for every fixed a2
    best1 = Q1 <= Q1.min(axis=1, keepdims=True)
    best2 = Q2 <= Q2.min(axis=2, keepdims=True)
    nash = (best1 & best2).reshape(n, n1 * n2)

    found = nash.any(axis=1)
    first = np.argmax(nash, axis=1)
    i1, i2 = np.unravel_index(first, (n1, n2))
    checked = np.where(found, first + 1, n1 * n2)
    return found, i1.astype(np.int64), i2.astype(np.int64), checked.astype(np.int64)


def first_pure_nash(Q1: np.ndarray, Q2: np.ndarray) -> Tuple[bool, int, int, int]:
    """
    First pure Nash pair of a single cost bimatrix.

    Args:
        Q1 (np.ndarray): Costs of player 1, shape (n1, n2).
        Q2 (np.ndarray): Costs of player 2, shape (n1, n2).

    Returns:
        Tuple[bool, int, int, int]: found, control index of player 1, control
        index of player 2, pairs scanned.
    """
    found, i1, i2, checked = first_pure_nash_batch(np.asarray(Q1)[None], np.asarray(Q2)[None])
    return bool(found[0]), int(i1[0]), int(i2[0]), int(checked[0])


def is_pure_nash(Q1: np.ndarray, Q2: np.ndarray, i1: int, i2: int) -> bool:
    """True when no player lowers their own cost by deviating from (i1, i2)."""
    Q1 = np.asarray(Q1)
    Q2 = np.asarray(Q2)
    return bool(Q1[i1, i2] <= Q1[:, i2].min() and Q2[i1, i2] <= Q2[i1, :].min())


if __name__ == "__main__":
    # Matching-pennies shape: no pure equilibrium
    print(first_pure_nash([[0, 1], [1, 0]], [[1, 0], [0, 1]]))
    # Prisoner's dilemma in costs: (defect, defect)
    print(first_pure_nash([[1, 3], [0, 2]], [[1, 0], [3, 2]]))
