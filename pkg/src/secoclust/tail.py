"""Rank-based estimators of extremal dependence.

All estimators work on a :class:`~secoclust.data.RankMatrix`.  An observation
``i`` is *extreme* in column ``c`` when its rank exceeds ``n + 0.5 - k``,
i.e. when it is among the ``k`` largest values of that column.  Every
exceedance-based estimate is therefore an integer count divided by ``k``.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import DataError, GroupLayout, RankMatrix


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class TailParams:
    k: int
    m: int | None = None

    def check(self, n: int) -> None:
        _check_k(n, self.k)
        if self.m is not None and not 1 <= self.m <= n:
            raise EstimatorError(f"m={self.m} outside 1..{n}")


def _check_k(n: int, k: int) -> None:
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise EstimatorError(f"k={k} outside 1..{n}")


def _check_cols(r: RankMatrix, cols) -> list[int]:
    cols = sorted(set(int(c) for c in cols))
    if not cols:
        raise EstimatorError("empty column set")
    if cols[0] < 0 or cols[-1] >= r.q:
        raise EstimatorError(f"columns {cols} outside 0..{r.q - 1}")
    return cols


def _check_groups(layout: GroupLayout, *groups: int) -> None:
    for g in groups:
        if not 0 <= g < layout.d:
            raise EstimatorError(f"group {g} outside 0..{layout.d - 1}")


def exceedances(r: RankMatrix, k: int) -> np.ndarray:
    """Boolean ``n x q`` matrix flagging the ``k`` largest entries per column."""
    _check_k(r.n, k)
    return r.ranks > r.n + 0.5 - k


def group_exceedances(r: RankMatrix, layout: GroupLayout, k: int) -> np.ndarray:
    """Boolean ``n x d`` matrix: row ``i`` is extreme in at least one column of group ``j``."""
    if layout.q != r.q:
        raise DataError(f"layout covers {layout.q} columns, rank matrix has {r.q}")
    ex = exceedances(r, k)
    out = np.empty((r.n, layout.d), dtype=bool)
    for j, g in enumerate(layout.groups):
        out[:, j] = ex[:, list(g)].any(axis=1)
    return out


def exceedance_count(r: RankMatrix, cols: Iterable[int], k: int) -> int:
    """Number of rows extreme in at least one of ``cols``."""
    cols = _check_cols(r, cols)
    _check_k(r.n, k)
    return int((r.ranks[:, cols] > r.n + 0.5 - k).any(axis=1).sum())


def ext_coeff_eks(r: RankMatrix, cols: Iterable[int], k: int) -> float:
    """Empirical extremal coefficient of the columns ``cols``; lies in ``[1, n/k]``."""
    return exceedance_count(r, cols, k) / k


def ext_corr(r: RankMatrix, a: int, b: int, k: int) -> float:
    """Empirical extremal correlation (chi) between two columns."""
    if a == b:
        raise EstimatorError("extremal correlation needs two distinct columns")
    _check_cols(r, (a, b))
    _check_k(r.n, k)
    thr = r.n + 0.5 - k
    joint = (r.ranks[:, a] > thr) & (r.ranks[:, b] > thr)
    return int(joint.sum()) / k


def seco_pair(r: RankMatrix, layout: GroupLayout, a: int, b: int, k: int) -> float:
    """Empirical SECO between groups ``a`` and ``b``: theta(a) + theta(b) - theta(a, b)."""
    if a == b:
        raise EstimatorError("seco_pair needs two distinct groups")
    _check_groups(layout, a, b)
    ca = exceedance_count(r, layout.groups[a], k)
    cb = exceedance_count(r, layout.groups[b], k)
    cab = exceedance_count(r, layout.columns((a, b)), k)
    return (ca + cb - cab) / k


@dataclass(frozen=True)
class SecoMatrix:
    """Normalised SECO similarities between the ``d`` groups.

    ``counts[j]`` is the number of rows in which group ``j`` is extreme, so
    ``thetas[j] == counts[j] / k``.  ``shared[a, b]`` counts rows where both
    groups are extreme; the unnormalised SECO of the pair is ``shared / k``.
    """

    entries: np.ndarray
    thetas: np.ndarray
    k: int
    n: int | None = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise EstimatorError("SECO matrix must be square")
        if not np.array_equal(e, e.T):
            raise EstimatorError("SECO matrix must be symmetric")
        t = np.array(self.thetas, dtype=float)
        if t.shape != (e.shape[0],):
            raise EstimatorError("thetas length must match matrix dimension")
        e.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "thetas", t)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dissimilarity(self) -> np.ndarray:
        """``1 - entries`` with an exactly zero diagonal."""
        out = 1.0 - self.entries
        np.fill_diagonal(out, 0.0)
        return out

    def save(self, path, sidecar=None) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for row in self.entries:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        sidecar = Path(sidecar) if sidecar is not None else path.with_suffix(".json")
        meta = {"d": self.dim, "k": int(self.k), "thetas": [float(t) for t in self.thetas]}
        if self.n is not None:
            meta["n"] = int(self.n)
        sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, sidecar=None) -> "SecoMatrix":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"matrix file not found: {path}")
        rows = []
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                raise EstimatorError(f"{path}: non-numeric entry on line {i}") from None
        if any(len(r) != len(rows) for r in rows):
            raise EstimatorError(f"{path}: matrix is not square")
        sidecar = Path(sidecar) if sidecar is not None else path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
            thetas, k, n = meta["thetas"], meta["k"], meta.get("n")
        else:
            thetas, k, n = [float("nan")] * len(rows), 0, None
        return cls(np.array(rows).reshape(len(rows), len(rows)), np.array(thetas), k, n)


def shared_exceedances(ex: np.ndarray, threads: int = 1, block: int = 256) -> np.ndarray:
    """Integer matrix ``ex.T @ ex`` for a boolean ``n x d`` indicator matrix.

    Row blocks are farmed out to ``threads`` workers; each block writes a
    distinct slice, and 0/1 products summed in float64 are exact, so the result
    does not depend on the worker count.
    """
    x = ex.astype(np.float64)
    d = x.shape[1]
    out = np.empty((d, d), dtype=np.int64)

    def work(start):
        stop = min(start + block, d)
        out[start:stop] = np.rint(x[:, start:stop].T @ x).astype(np.int64)

    starts = range(0, d, block)
    if threads <= 1 or d <= block:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    return out


def seco_matrix(r: RankMatrix, layout: GroupLayout, k: int, threads: int = 1) -> SecoMatrix:
    """Normalised SECO for every pair of groups.

    Uses ``SECO(a, b) = #{rows where both a and b are extreme} / k``, which is
    the same integer identity as ``theta(a) + theta(b) - theta(a, b)`` by
    inclusion-exclusion, and divides by ``min(theta(a), theta(b))``.
    """
    gex = group_exceedances(r, layout, k)
    counts = gex.sum(axis=0).astype(np.int64)
    shared = shared_exceedances(gex, threads=threads)
    denom = np.minimum.outer(counts, counts)
    # every group is extreme in at least k rows
    assert denom.min() >= k
    entries = shared / denom
    np.fill_diagonal(entries, 1.0)
    return SecoMatrix(entries, counts / k, k, r.n)


def _clusters_of(partition) -> list[list[int]]:
    clusters = getattr(partition, "clusters", partition)
    return [list(c) for c in clusters]


def seco_partition(r: RankMatrix, layout: GroupLayout, partition, k: int) -> float:
    """Empirical SECO of a partition of the groups.

    ``partition`` is a :class:`~secoclust.clustering.Partition` or a sequence
    of lists of 0-based group indices.
    """
    clusters = _clusters_of(partition)
    flat = sorted(g for c in clusters for g in c)
    if flat != list(range(layout.d)) or any(len(c) == 0 for c in clusters):
        raise EstimatorError("partition does not cover the groups disjointly")
    gex = group_exceedances(r, layout, k)
    return _seco_partition_from_exceedances(gex, clusters) / k


def _seco_partition_from_exceedances(gex: np.ndarray, clusters: Sequence[Sequence[int]]) -> int:
    total = sum(int(gex[:, list(c)].any(axis=1).sum()) for c in clusters)
    return total - int(gex.any(axis=1).sum())


def madogram_fraction(r_block: RankMatrix, cols: Iterable[int]) -> Fraction:
    """Exact rational value of the multivariate madogram on block-maxima ranks."""
    cols = _check_cols(r_block, cols)
    k = r_block.n
    if k < 2:
        raise EstimatorError("madogram needs at least 2 block maxima")
    sub = r_block.ranks[:, cols]
    p = len(cols)
    # sum over blocks of max rank, and of all ranks, both integers
    top = int(sub.max(axis=1).sum())
    total = int(sub.sum())
    return Fraction(p * top - total, p * k * (k + 1))


def madogram(r_block: RankMatrix, cols: Iterable[int]) -> float:
    return float(madogram_fraction(r_block, cols))


def ext_coeff_mad(nu, k: int):
    """Extremal coefficient ``(1/2 + nu) / (1/2 - nu)`` from a madogram value.

    Exact when ``nu`` is a :class:`fractions.Fraction`; the result is then a
    ``Fraction`` too.
    """
    if k < 1:
        raise EstimatorError(f"k={k} must be positive")
    half = Fraction(1, 2) if isinstance(nu, Rational) else 0.5
    upper = Fraction(k, k + 1) - Fraction(1, 2)
    if nu < 0 or nu > (upper if isinstance(nu, Rational) else float(upper) + 1e-12):
        raise EstimatorError(f"madogram value {nu} outside [0, {float(upper)}]")
    return (half + nu) / (half - nu)


def ext_coeff_madogram(r_block: RankMatrix, cols: Iterable[int]) -> float:
    """Madogram-based extremal coefficient, evaluated exactly and rounded once."""
    nu = madogram_fraction(r_block, cols)
    return float(ext_coeff_mad(nu, r_block.n))
