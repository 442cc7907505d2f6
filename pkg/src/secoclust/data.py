"""Datasets of grouped time series, rank transforms and block maxima.

A dataset is an ``n x q`` matrix whose columns are partitioned into ``d``
groups (for instance precipitation and wind speed at one pixel).  Every tail
estimator in the package only ever sees column-wise ranks.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised on malformed datasets or group layouts."""


@dataclass(frozen=True)
class GroupLayout:
    """Assignment of the ``q`` data columns to ``d`` groups.

    ``groups[j]`` lists the 0-based column indices of group ``j``.
    """

    groups: tuple[tuple[int, ...], ...]
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise DataError("layout must cover at least one column")
        seen = set()
        for j, g in enumerate(self.groups):
            if len(g) == 0:
                raise DataError(f"group {j} is empty")
            for c in g:
                if c < 0 or c >= self.q:
                    raise DataError(f"index {c} in group {j} outside 0..{self.q - 1}")
                if c in seen:
                    raise DataError(f"index {c} repeated")
                seen.add(c)
        if len(seen) != self.q:
            missing = sorted(set(range(self.q)) - seen)
            raise DataError(f"columns {missing} not assigned to any group")

    @classmethod
    def from_lists(cls, groups: Sequence[Sequence[int]], q: int | None = None) -> "GroupLayout":
        gs = tuple(tuple(int(c) for c in g) for g in groups)
        if q is None:
            q = max((max(g) for g in gs if g), default=-1) + 1
        return cls(gs, q)

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "GroupLayout":
        """Layout where group ``j`` holds the next ``sizes[j]`` columns."""
        groups, start = [], 0
        for p in sizes:
            groups.append(tuple(range(start, start + p)))
            start += p
        return cls(tuple(groups), start)

    @property
    def d(self) -> int:
        return len(self.groups)

    def columns(self, group_ids) -> list[int]:
        """All columns of the given groups, in group order."""
        return [c for j in group_ids for c in self.groups[j]]

    def to_json(self) -> str:
        return json.dumps([list(g) for g in self.groups])


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    layout: GroupLayout

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        if v.shape[0] < 2:
            raise DataError(f"need at least 2 rows, got {v.shape[0]}")
        if v.shape[1] != self.layout.q:
            raise DataError(f"dataset has {v.shape[1]} columns but layout covers {self.layout.q}")
        bad = np.argwhere(~np.isfinite(v))
        if bad.size:
            i, c = bad[0]
            raise DataError(f"non-finite value at row {i + 1}, column {c + 1}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.layout.d


@dataclass(frozen=True)
class RankMatrix:
    ranks: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranks)
        if r.ndim != 2:
            raise DataError("ranks must be a 2-d matrix")
        r = r.astype(np.int64, copy=True)
        r.setflags(write=False)
        object.__setattr__(self, "ranks", r)

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def q(self) -> int:
        return self.ranks.shape[1]


def load_layout(path, q: int | None = None) -> GroupLayout:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"layout file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, list) or not all(isinstance(g, list) for g in raw):
        raise DataError(f"{path}: layout must be a JSON array of arrays")
    for j, g in enumerate(raw):
        for c in g:
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise DataError(f"{path}: group {j} holds invalid column index {c!r}")
    return GroupLayout.from_lists(raw, q)


def load_dataset(path, layout_path) -> Dataset:
    """Read a wide CSV (one header row) and its JSON group layout.

    Error messages locate offending cells by 1-based data row (header
    excluded) and 1-based column.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        q = len(header)
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != q:
                raise DataError(f"{path}: row {i} has {len(row)} fields, expected {q}")
            parsed = []
            for c, cell in enumerate(row, start=1):
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric value {cell!r} at ({i},{c})") from None
                if not math.isfinite(x):
                    raise DataError(f"{path}: non-finite value {cell!r} at ({i},{c})")
                parsed.append(x)
            rows.append(parsed)
    layout = load_layout(layout_path, q=None)
    if layout.q != q:
        raise DataError(f"layout covers {layout.q} columns but {path} has {q}")
    values = np.array(rows, dtype=float).reshape(len(rows), q)
    return Dataset(values, layout)


def save_dataset(ds: Dataset, path, layout_path=None, header: Sequence[str] | None = None) -> None:
    if header is None:
        # header names follow column order, not group order
        names = [""] * ds.q
        for j, g in enumerate(ds.layout.groups):
            for l, c in enumerate(g):
                names[c] = f"g{j + 1}_{l + 1}"
        header = names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in ds.values:
            w.writerow([repr(float(x)) for x in row])
    if layout_path is not None:
        Path(layout_path).write_text(ds.layout.to_json() + "\n", encoding="utf-8")


def rank_columns(values: np.ndarray) -> np.ndarray:
    """Column-wise ranks in 1..n, ties broken by ascending row index."""
    v = np.asarray(values)
    n = v.shape[0]
    order = np.argsort(v, axis=0, kind="stable")
    ranks = np.empty(v.shape, dtype=np.int64)
    np.put_along_axis(ranks, order, np.arange(1, n + 1, dtype=np.int64)[:, None], axis=0)
    return ranks


def rank_matrix(ds: Dataset) -> RankMatrix:
    return RankMatrix(rank_columns(ds.values))


def block_maxima(ds: Dataset, m: int) -> Dataset:
    """Non-overlapping block maxima of length ``m``; trailing rows are dropped."""
    if not 1 <= m <= ds.n:
        raise DataError(f"block length m={m} outside 1..{ds.n}")
    k = ds.n // m
    if k < 2:
        raise DataError(f"block length m={m} leaves fewer than 2 blocks")
    blocks = ds.values[: k * m].reshape(k, m, ds.q).max(axis=1)
    return Dataset(blocks, ds.layout)
