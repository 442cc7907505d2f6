"""Partitioning groups from the normalised SECO matrix.

``caice`` is the greedy thresholding procedure that splits the groups into
blocks whose extremes are asymptotically independent of one another;
``select_tau`` picks its threshold by minimising the empirical SECO of the
resulting partition.  ``hclust`` and ``kmedoids`` are baselines working on the
dissimilarity ``1 - Theta``, with ``choose_k`` picking their number of
clusters by average silhouette.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import GroupLayout, RankMatrix
from .tail import SecoMatrix, _seco_partition_from_exceedances, group_exceedances

DEFAULT_GRID = "0.05:0.0025:0.12"
DEFAULT_K_LOSS = 30
LINKAGES = ("average", "single", "complete")


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Disjoint clusters of 0-based group indices covering ``range(d)``.

    Clusters are stored canonically: each sorted, ordered by smallest member.
    ``algorithm`` and ``params`` record provenance and do not take part in
    equality.
    """

    clusters: tuple[tuple[int, ...], ...]
    d: int
    algorithm: str = field(default="", compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cl = [tuple(sorted(int(g) for g in c)) for c in self.clusters]
        if any(len(c) == 0 for c in cl):
            raise ClusteringError("empty cluster")
        flat = sorted(g for c in cl for g in c)
        if flat != list(range(self.d)):
            raise ClusteringError(f"clusters do not partition 0..{self.d - 1}")
        cl.sort(key=lambda c: c[0])
        object.__setattr__(self, "clusters", tuple(cl))

    @classmethod
    def from_labels(cls, labels: Sequence[int], algorithm: str = "", params: dict | None = None) -> "Partition":
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(i)
        return cls(tuple(groups.values()), len(labels), algorithm, dict(params or {}))

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def labels(self) -> np.ndarray:
        out = np.empty(self.d, dtype=np.int64)
        for c, members in enumerate(self.clusters):
            out[list(members)] = c
        return out

    def to_dict(self) -> dict:
        out = {"algorithm": self.algorithm}
        out.update(self.params)
        out["clusters"] = [[g + 1 for g in c] for c in self.clusters]
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, obj: dict) -> "Partition":
        try:
            clusters = [[int(g) - 1 for g in c] for c in obj["clusters"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ClusteringError(f"malformed partition: {exc}") from exc
        d = sum(len(c) for c in clusters)
        params = {k: v for k, v in obj.items() if k not in ("algorithm", "clusters")}
        return cls(tuple(clusters), d, obj.get("algorithm", ""), params)

    @classmethod
    def load(cls, path) -> "Partition":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"partition file not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ClusteringError(f"{path}: invalid JSON ({exc})") from exc


def parse_grid(spec: str) -> list[float]:
    """Expand ``"start:step:end"`` (end inclusive) into a list of thresholds."""
    try:
        start, step, end = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ClusteringError(f"grid must look like start:step:end, got {spec!r}") from None
    if step <= 0 or end < start:
        raise ClusteringError(f"empty grid {spec!r}")
    count = int(math.floor((end - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _as_matrix(theta) -> np.ndarray:
    m = theta.entries if isinstance(theta, SecoMatrix) else np.asarray(theta, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ClusteringError("similarity matrix must be square")
    return m


def caice(theta, tau: float) -> Partition:
    """Greedy clustering of a normalised SECO matrix at threshold ``tau``.

    Repeatedly take the most similar remaining pair ``(a, b)``; if their
    similarity is at most ``tau`` emit ``{a}``, otherwise emit every remaining
    ``s`` with ``min(Theta(a, s), Theta(b, s)) >= tau``.  Argmax ties go to the
    lexicographically smallest pair.
    """
    if not tau > 0:
        raise ClusteringError(f"tau must be positive, got {tau}")
    m = np.array(_as_matrix(theta), dtype=float)
    d = m.shape[0]
    np.fill_diagonal(m, 1.0)
    remaining = np.arange(d)
    clusters = []
    while remaining.size:
        if remaining.size == 1:
            clusters.append(remaining.tolist())
            break
        sub = m[np.ix_(remaining, remaining)]
        upper = np.where(np.triu(np.ones(sub.shape, dtype=bool), 1), sub, -np.inf)
        i, j = divmod(int(np.argmax(upper)), remaining.size)
        if sub[i, j] <= tau:
            # nothing left exceeds tau, so every further pass emits a singleton
            clusters.extend([s] for s in remaining.tolist())
            break
        keep = np.minimum(sub[i], sub[j]) >= tau
        clusters.append(remaining[keep].tolist())
        remaining = remaining[~keep]
    return Partition(tuple(clusters), d, "caice", {"tau": float(tau)})


@dataclass(frozen=True)
class TauCurve:
    grid: tuple[float, ...]
    seco_values: tuple[float, ...]
    loss: tuple[float, ...]
    best_tau: float
    partitions: tuple[Partition, ...] = field(compare=False, default=())

    @property
    def best_partition(self) -> Partition:
        return self.partitions[self.grid.index(self.best_tau)]

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau,seco,loss,n_clusters\n")
            for t, s, l, p in zip(self.grid, self.seco_values, self.loss, self.partitions):
                fh.write(f"{t!r},{s!r},{l!r},{p.n_clusters}\n")


def select_tau(
    r: RankMatrix,
    layout: GroupLayout,
    theta,
    grid: Sequence[float],
    k_loss: int = DEFAULT_K_LOSS,
    threads: int = 1,
) -> TauCurve:
    """Evaluate the partition SECO loss over a grid of thresholds.

    ``theta`` stays as estimated by the caller; ``k_loss`` only enters the
    evaluation of the partition SECO.
    """
    grid = [float(t) for t in grid]
    if not grid:
        raise ClusteringError("empty tau grid")
    if any(not t > 0 for t in grid):
        raise ClusteringError("tau values must be positive")
    m = _as_matrix(theta)
    if m.shape[0] != layout.d:
        raise ClusteringError(f"matrix has dimension {m.shape[0]}, layout has {layout.d} groups")
    gex = group_exceedances(r, layout, k_loss)

    def evaluate(tau):
        p = caice(m, tau)
        return p, _seco_partition_from_exceedances(gex, p.clusters) / k_loss

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, grid))
    else:
        results = [evaluate(t) for t in grid]
    partitions = tuple(p for p, _ in results)
    seco = tuple(s for _, s in results)
    low = min(seco)
    loss = tuple(math.log1p(s - low) for s in seco)
    best = min(t for t, l in zip(grid, loss) if l == 0.0)
    return TauCurve(tuple(grid), seco, loss, best, partitions)


def _check_dissim(dissim) -> np.ndarray:
    dm = np.asarray(dissim, dtype=float)
    if dm.ndim != 2 or dm.shape[0] != dm.shape[1]:
        raise ClusteringError("dissimilarity matrix must be square")
    if not np.allclose(dm, dm.T, rtol=0, atol=1e-12):
        raise ClusteringError("dissimilarity matrix must be symmetric")
    if np.any(np.diag(dm) != 0):
        raise ClusteringError("dissimilarity matrix must have a zero diagonal")
    if np.any(dm < 0) or not np.all(np.isfinite(dm)):
        raise ClusteringError("dissimilarities must be finite and non-negative")
    return dm


def _check_k(K: int, d: int) -> None:
    if not 1 <= K <= d:
        raise ClusteringError(f"K={K} outside 1..{d}")


def hclust(dissim, K: int, linkage: str = "average") -> Partition:
    """Agglomerative clustering down to ``K`` clusters.

    Cluster slots are indexed by their smallest member; among equally close
    pairs the lexicographically smallest pair of slots merges first.
    """
    dm = _check_dissim(dissim)
    d = dm.shape[0]
    _check_k(K, d)
    if linkage not in LINKAGES:
        raise ClusteringError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    dist = dm.copy()
    upper = np.triu(np.ones((d, d), dtype=bool), 1)
    active = np.ones(d, dtype=bool)
    sizes = np.ones(d)
    members = {i: [i] for i in range(d)}
    for _ in range(d - K):
        cand = np.where(upper & active[:, None] & active[None, :], dist, np.inf)
        i, j = divmod(int(np.argmin(cand)), d)
        if linkage == "single":
            row = np.minimum(dist[i], dist[j])
        elif linkage == "complete":
            row = np.maximum(dist[i], dist[j])
        else:
            row = (sizes[i] * dist[i] + sizes[j] * dist[j]) / (sizes[i] + sizes[j])
        dist[i, :] = row
        dist[:, i] = row
        dist[i, i] = 0.0
        sizes[i] += sizes[j]
        active[j] = False
        members[i].extend(members.pop(j))
    return Partition(tuple(members.values()), d, "hclust", {"K": K, "linkage": linkage})


@dataclass
class KMedoidsResult:
    partition: Partition
    medoids: list[int]
    objective: float
    history: list[float]


def _build_init(dm: np.ndarray, K: int) -> list[int]:
    medoids = [int(np.argmin(dm.sum(axis=1)))]
    nearest = dm[medoids[0]].copy()
    for _ in range(1, K):
        gain = np.maximum(nearest[None, :] - dm, 0.0).sum(axis=1)
        gain[medoids] = -np.inf
        c = int(np.argmax(gain))
        medoids.append(c)
        nearest = np.minimum(nearest, dm[c])
    return medoids


def kmedoids_fit(dissim, K: int, seed: int = 0, init: str = "build", max_iter: int = 100) -> KMedoidsResult:
    """PAM: greedy or random initial medoids, then best-improvement swaps."""
    dm = _check_dissim(dissim)
    d = dm.shape[0]
    _check_k(K, d)
    if init == "build":
        medoids = _build_init(dm, K)
    elif init == "random":
        medoids = sorted(np.random.default_rng(seed).choice(d, size=K, replace=False).tolist())
    else:
        raise ClusteringError(f"unknown init {init!r}")

    def assign(med):
        sub = dm[med]
        order = np.argsort(sub, axis=0, kind="stable")
        d1 = np.take_along_axis(sub, order[:1], axis=0)[0]
        d2 = np.take_along_axis(sub, order[1:2], axis=0)[0] if len(med) > 1 else np.full(d, np.inf)
        return order[0], d1, d2

    nearest, d1, d2 = assign(medoids)
    history = [float(d1.sum())]
    for _ in range(max_iter):
        best_delta, best_swap = 0.0, None
        is_med = np.zeros(d, dtype=bool)
        is_med[medoids] = True
        for slot in range(K):
            own = nearest == slot
            new = np.where(own[None, :], np.minimum(d2[None, :], dm), np.minimum(d1[None, :], dm))
            delta = new.sum(axis=1) - d1.sum()
            delta[is_med] = np.inf
            o = int(np.argmin(delta))
            if delta[o] < best_delta - 1e-12:
                best_delta, best_swap = delta[o], (slot, o)
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        nearest, d1, d2 = assign(medoids)
        history.append(float(d1.sum()))
    labels = [medoids[s] for s in nearest]
    part = Partition.from_labels(labels, "kmedoids", {"K": K, "seed": seed, "init": init})
    return KMedoidsResult(part, list(medoids), float(d1.sum()), history)


def kmedoids(dissim, K: int, seed: int = 0) -> Partition:
    return kmedoids_fit(dissim, K, seed).partition


def silhouette(dissim, p: Partition) -> tuple[np.ndarray, float]:
    """Per-group silhouette values and their mean; singletons score 0."""
    dm = _check_dissim(dissim)
    if p.d != dm.shape[0]:
        raise ClusteringError("partition and matrix sizes differ")
    if p.n_clusters < 2:
        raise ClusteringError("silhouette needs at least two clusters")
    labels = p.labels()
    sizes = np.bincount(labels, minlength=p.n_clusters)
    # sums[i, c] = total dissimilarity from i to members of cluster c
    onehot = np.zeros((p.d, p.n_clusters))
    onehot[np.arange(p.d), labels] = 1.0
    sums = dm @ onehot
    own = labels
    a = sums[np.arange(p.d), own] / np.maximum(sizes[own] - 1, 1)
    means = sums / sizes[None, :]
    means[np.arange(p.d), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((sizes[own] > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return s, float(s.mean())


def choose_k(dissim, k_range: Sequence[int], method: str = "hclust", seed: int = 0, linkage: str = "average"):
    """Number of clusters with the largest average silhouette (smallest on ties).

    Returns ``(K, table)`` where ``table`` lists ``(K, average silhouette)``.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ClusteringError("empty K range")
    dm = _check_dissim(dissim)
    if ks[0] < 2 or ks[-1] > dm.shape[0]:
        raise ClusteringError(f"K range must lie within 2..{dm.shape[0]}")
    table = []
    for K in ks:
        if method == "hclust":
            p = hclust(dm, K, linkage)
        elif method == "kmedoids":
            p = kmedoids(dm, K, seed)
        else:
            raise ClusteringError(f"unknown method {method!r}")
        table.append((K, silhouette(dm, p)[1]))
    best_k, best_s = table[0]
    for K, s in table[1:]:
        if s > best_s:
            best_k, best_s = K, s
    return best_k, table
