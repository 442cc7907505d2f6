"""Shared fixtures and brute-force oracles.

The oracles re-derive every quantity by explicit loops over rows and pairs,
sharing no code with the package beyond the input containers.
"""
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from secoclust.data import Dataset, GroupLayout, RankMatrix


def oracle_ranks(column):
    """rank = number of entries <= value, later rows ranked above earlier ties."""
    n = len(column)
    out = []
    for i in range(n):
        smaller = sum(1 for j in range(n) if column[j] < column[i])
        tied_before = sum(1 for j in range(i) if column[j] == column[i])
        out.append(smaller + tied_before + 1)
    return out


def oracle_extreme(rank, n, k):
    # rank > n + 0.5 - k, kept in exact arithmetic
    return Fraction(rank) > Fraction(2 * n + 1 - 2 * k, 2)


def oracle_theta(ranks, cols, k):
    n = len(ranks)
    hits = 0
    for i in range(n):
        if any(oracle_extreme(ranks[i][c], n, k) for c in cols):
            hits += 1
    return Fraction(hits, k)


def oracle_chi(ranks, a, b, k):
    n = len(ranks)
    hits = sum(
        1 for i in range(n) if oracle_extreme(ranks[i][a], n, k) and oracle_extreme(ranks[i][b], n, k)
    )
    return Fraction(hits, k)


def oracle_seco_pair(ranks, groups, a, b, k):
    return (
        oracle_theta(ranks, groups[a], k)
        + oracle_theta(ranks, groups[b], k)
        - oracle_theta(ranks, list(groups[a]) + list(groups[b]), k)
    )


def oracle_seco_partition(ranks, groups, clusters, k):
    total = sum(oracle_theta(ranks, [c for g in cl for c in groups[g]], k) for cl in clusters)
    every = [c for g in groups for c in g]
    return total - oracle_theta(ranks, every, k)


def oracle_madogram(block_ranks, cols):
    k = len(block_ranks)
    acc = Fraction(0)
    for row in block_ranks:
        vals = [Fraction(row[c], k + 1) for c in cols]
        acc += max(vals) - sum(vals) / len(vals)
    return acc / k


def oracle_ari(labels1, labels2):
    """Pair-counting ARI over all element pairs."""
    n11 = n10 = n01 = n00 = 0
    for i, j in combinations(range(len(labels1)), 2):
        same1 = labels1[i] == labels1[j]
        same2 = labels2[i] == labels2[j]
        if same1 and same2:
            n11 += 1
        elif same1:
            n10 += 1
        elif same2:
            n01 += 1
        else:
            n00 += 1
    num = 2 * (n11 * n00 - n10 * n01)
    den = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00)
    return Fraction(num, den)


def random_layout(q, rng):
    """Random assignment of ``q`` columns to groups (non-contiguous)."""
    perm = rng.permutation(q).tolist()
    cuts = sorted(rng.choice(np.arange(1, q), size=rng.integers(0, q), replace=False).tolist()) if q > 1 else []
    groups, start = [], 0
    for c in cuts + [q]:
        groups.append(perm[start:c])
        start = c
    return GroupLayout.from_lists(groups, q)


def make_dataset(values, groups):
    values = np.asarray(values, dtype=float)
    return Dataset(values, GroupLayout.from_lists(groups, values.shape[1]))


def ranks_from_columns(*cols):
    return RankMatrix(np.array(cols).T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def block_matrix():
    """Similarity matrix with blocks {0,1,2} and {3,4}: 0.9 within, 0.01 across."""
    m = np.full((5, 5), 0.01)
    for block in ([0, 1, 2], [3, 4]):
        for a in block:
            for b in block:
                m[a, b] = 0.9
    np.fill_diagonal(m, 1.0)
    return m


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
