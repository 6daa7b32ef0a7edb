"""Agreement between two partitions: Rand index, adjusted Rand index and
contingency tables.

Pair counts are accumulated in Python integers so the indices are exact up
to the final division.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class Contingency:
    table: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __str__(self) -> str:
        width = max([len(str(x)) for x in self.row_labels + self.col_labels] + [4])
        head = " " * width + "".join(f" {str(c):>{width}}" for c in self.col_labels)
        lines = [head]
        for lab, row in zip(self.row_labels, self.table):
            lines.append(f"{str(lab):>{width}}" + "".join(f" {int(v):>{width}}" for v in row))
        return "\n".join(lines)


def _check(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("partitions must be 1-d label vectors")
    if a.shape != b.shape:
        raise ValueError(f"partitions differ in length: {a.size} vs {b.size}")
    if a.size < 1:
        raise ValueError("partitions must be non-empty")
    return a, b


def confusion(a, b) -> Contingency:
    """Counts of co-occurrence of labels of ``a`` (rows) and ``b`` (columns)."""
    a, b = _check(a, b)
    ra, ia = np.unique(a, return_inverse=True)
    rb, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ra.size, rb.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return Contingency(table, tuple(ra.tolist()), tuple(rb.tolist()))


def _comb2(x) -> int:
    x = int(x)
    return x * (x - 1) // 2


def _pair_counts(a, b):
    t = confusion(a, b).table
    both = sum(_comb2(v) for v in t.ravel())
    same_a = sum(_comb2(v) for v in t.sum(axis=1))
    same_b = sum(_comb2(v) for v in t.sum(axis=0))
    return both, same_a, same_b, _comb2(t.sum())


def rand_index(a, b) -> float:
    both, same_a, same_b, total = _pair_counts(a, b)
    if total == 0:
        return 1.0
    agree = total + 2 * both - same_a - same_b
    return float(Fraction(agree, total))


def adjusted_rand_exact(a, b) -> Fraction:
    both, same_a, same_b, total = _pair_counts(a, b)
    a_arr, b_arr = np.asarray(a), np.asarray(b)
    identical = confusion(a_arr, b_arr).table
    same_partition = bool(
        np.all((identical > 0).sum(axis=0) == 1) and np.all((identical > 0).sum(axis=1) == 1)
    )
    if total == 0:
        return Fraction(1) if same_partition else Fraction(0)
    expected = Fraction(same_a * same_b, total)
    max_index = Fraction(same_a + same_b, 2)
    if max_index == expected:
        return Fraction(1) if same_partition else Fraction(0)
    return (both - expected) / (max_index - expected)


def adjusted_rand(a, b) -> float:
    """Hubert-Arabie adjusted Rand index; 1 for identical partitions."""
    return float(adjusted_rand_exact(a, b))


def labels_from_table(table) -> tuple:
    """Expand a contingency table into two aligned label vectors."""
    table = np.asarray(table, dtype=int)
    rows, cols = [], []
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            rows += [i] * table[i, j]
            cols += [j] * table[i, j]
    return np.array(rows), np.array(cols)


def match_to_table(table, reference) -> int:
    """Smallest number of cells that differ between ``table`` and
    ``reference`` over all column permutations (tables padded to a common
    shape)."""
    from itertools import permutations

    a = np.asarray(table, dtype=int)
    r = np.asarray(reference, dtype=int)
    rows = max(a.shape[0], r.shape[0])
    cols = max(a.shape[1], r.shape[1])
    A = np.zeros((rows, cols), dtype=int)
    R = np.zeros((rows, cols), dtype=int)
    A[: a.shape[0], : a.shape[1]] = a
    R[: r.shape[0], : r.shape[1]] = r
    best = rows * cols
    for perm in permutations(range(cols)):
        best = min(best, int(np.sum(A[:, list(perm)] != R)))
    return best
