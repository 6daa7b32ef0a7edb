from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_ari
from pfmr.evaluation import (
    adjusted_rand,
    adjusted_rand_exact,
    confusion,
    labels_from_table,
    match_to_table,
    rand_index,
)

EFMRC_TABLE = [[40, 10, 0, 0], [0, 49, 0, 1], [0, 0, 50, 0], [0, 0, 2, 48]]
EFMR_TABLE = [[46, 4], [4, 46], [50, 0], [2, 48]]


def test_identical_is_one():
    assert adjusted_rand([0, 0, 1, 2], [5, 5, 7, 9]) == 1.0


def test_single_cluster_is_zero():
    assert adjusted_rand([0] * 6, [0, 1, 0, 1, 2, 2]) == 0.0


def test_degenerate_conventions():
    assert adjusted_rand_exact([0, 1, 2], [3, 4, 5]) == 1
    assert adjusted_rand_exact([0], [1]) == 1


def test_reference_tables():
    a, b = labels_from_table(EFMRC_TABLE)
    assert round(adjusted_rand(a, b), 2) == 0.84
    a, b = labels_from_table(EFMR_TABLE)
    assert round(adjusted_rand(a, b), 2) == 0.40
    sex = np.where(np.isin(a, [0, 2]), "M", "F")
    assert round(adjusted_rand(sex, b), 2) == 0.81


def test_length_mismatch():
    with pytest.raises(ValueError):
        adjusted_rand([0, 1], [0])
    with pytest.raises(ValueError):
        confusion([0, 1], [0])


def test_confusion_examples():
    assert np.array_equal(confusion([0, 0, 1], [0, 0, 1]).table, [[2, 0], [0, 1]])
    assert np.array_equal(confusion([0, 0, 1], [1, 1, 0]).table, [[0, 2], [1, 0]])
    c = confusion(["a", "b", "b"], [2, 2, 3])
    assert c.table.sum(axis=1).tolist() == [1, 2] and c.table.sum(axis=0).tolist() == [2, 1]


def test_match_to_table():
    assert match_to_table(EFMRC_TABLE, EFMRC_TABLE) == 0
    perm = np.asarray(EFMRC_TABLE)[:, [2, 0, 3, 1]]
    assert match_to_table(perm, EFMRC_TABLE) == 0
    off = np.asarray(EFMRC_TABLE).copy()
    off[0, 0] -= 1
    off[0, 2] += 1
    assert match_to_table(off, EFMRC_TABLE) == 2


partitions = st.integers(2, 60).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 5), min_size=n, max_size=n),
                        st.lists(st.integers(0, 5), min_size=n, max_size=n)))


@settings(max_examples=150, deadline=None)
@given(partitions)
def test_brute_force_oracle(pair):
    a, b = pair
    assert adjusted_rand_exact(a, b) == brute_force_ari(a, b)


@settings(max_examples=100, deadline=None)
@given(partitions, st.permutations(range(6)))
def test_symmetry_and_renaming(pair, perm):
    a, b = pair
    assert adjusted_rand_exact(a, b) == adjusted_rand_exact(b, a)
    renamed = [perm[x] for x in a]
    assert adjusted_rand_exact(renamed, b) == adjusted_rand_exact(a, b)
    assert 0.0 <= rand_index(a, b) <= 1.0
    assert adjusted_rand_exact(a, b) <= 1
    assert isinstance(adjusted_rand_exact(a, b), Fraction)
