"""Validation harnesses: adjusted Rand index, estimator saturation, axiom
checks on estimates, and monotonicity of closed-form SECO level sets."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import Partition
from .data import Dataset, GroupLayout, block_maxima, rank_matrix
from .models import LOGISTIC, HUSLER_REISS, seco_nested_hr, seco_nested_logistic
from .tail import (
    exceedance_count,
    ext_coeff_eks,
    ext_coeff_mad,
    madogram_fraction,
    seco_matrix,
    seco_pair,
    seco_partition,
)


class ValidationError(ValueError):
    pass


@dataclass
class Report:
    """Outcome of a validation run: a table of rows plus named checks."""

    name: str
    rows: list[dict] = field(default_factory=list)
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def check(self, label: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((label, bool(ok), detail))
        return bool(ok)

    @property
    def failed(self) -> int:
        return sum(not ok for _, ok, _ in self.checks)

    @property
    def passed(self) -> int:
        return sum(ok for _, ok, _ in self.checks)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def summary(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "failed": self.failed,
            "details": [
                {"check": label, "passed": ok, "detail": detail}
                for label, ok, detail in self.checks
                if not ok
            ],
        }

    def write(self, out_dir, stem: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.name
        table = out_dir / f"{stem}.csv"
        rows = self.rows or [{"check": c, "passed": ok, "detail": d} for c, ok, d in self.checks]
        with table.open("w", newline="", encoding="utf-8") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
        summary = out_dir / f"{stem}_summary.json"
        summary.write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")
        return table, summary


def contingency_table(p1: Partition, p2: Partition) -> np.ndarray:
    if p1.d != p2.d:
        raise ValidationError(f"partitions cover {p1.d} and {p2.d} entities")
    table = np.zeros((p1.n_clusters, p2.n_clusters), dtype=np.int64)
    np.add.at(table, (p1.labels(), p2.labels()), 1)
    return table


def _pairs(x) -> int:
    return int(x) * (int(x) - 1) // 2


def ari(p1: Partition, p2: Partition) -> float:
    """Adjusted Rand index; may be negative for worse-than-chance agreement."""
    table = contingency_table(p1, p2)
    d = p1.d
    if d < 2:
        raise ValidationError("ARI needs at least two entities")
    r0 = sum(_pairs(x) for x in table.ravel())
    r1 = sum(_pairs(x) for x in table.sum(axis=1))
    r2 = sum(_pairs(x) for x in table.sum(axis=0))
    r3 = Fraction(2 * r1 * r2, d * (d - 1))
    denom = Fraction(r1 + r2, 2) - r3
    if denom == 0:
        raise ValidationError("ARI undefined: both partitions are trivial in the same way")
    return float((r0 - r3) / denom)


def bounds_experiment(
    n_grid: Sequence[int] = tuple(range(100, 1001, 50)),
    exponent: float = 1.25,
    k: int = 50,
    m: int = 50,
    seed: int = 0,
) -> Report:
    """Estimator saturation with ``d = ceil(n**exponent)`` independent columns.

    Independent columns have true extremal coefficient ``d``, far above what
    ``n/k`` (exceedances) or ``n/m`` (madogram) estimators can reach.
    """
    n_grid = [int(n) for n in n_grid]
    if not n_grid:
        raise ValidationError("empty n grid")
    for n in n_grid:
        if n < k or n < 2 * m:
            raise ValidationError(f"n={n} too small for k={k}, m={m}")
    rep = Report("bounds")
    for idx, n in enumerate(n_grid):
        d = math.ceil(n ** exponent)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(idx,)))
        values = rng.random((n, d))
        ds = Dataset(values, GroupLayout.contiguous([d]))
        r = rank_matrix(ds)
        count = exceedance_count(r, range(d), k)
        eks = count / k
        rb = rank_matrix(block_maxima(ds, m))
        kb = rb.n
        nu = madogram_fraction(rb, range(d))
        nu_bound = Fraction(kb, kb + 1) - Fraction(1, 2)
        mad = ext_coeff_mad(nu, kb)
        row = {
            "n": n,
            "d": d,
            "theta_true": d,
            "eks": eks,
            "eks_bound": n / k,
            "madogram": float(nu),
            "madogram_bound": float(nu_bound),
            "mad": float(mad),
            "mad_bound": n / m,
        }
        rep.rows.append(row)
        rep.check(f"n={n}: 1 <= eks <= n/k", 1 <= count and count <= n, f"eks={eks}")
        rep.check(f"n={n}: madogram <= k/(k+1)-1/2", nu <= nu_bound, f"nu={float(nu)}")
        rep.check(f"n={n}: 1 <= mad <= n/m", 1 <= mad <= Fraction(n // m), f"mad={float(mad)}")
    return rep


def _transforms():
    return {
        "affine": lambda x: 2.0 * x + 1.0,
        "exp": lambda x: np.exp((x - x.mean()) / (x.std() + 1.0)),
        "cube": lambda x: x ** 3,
    }


def _injective(before: np.ndarray, after: np.ndarray) -> bool:
    """False when rounding merged distinct values or overflowed."""
    return bool(np.all(np.isfinite(after))) and len(np.unique(after)) == len(np.unique(before))


def _relabel(ds_values: np.ndarray, layout: GroupLayout, group_perm, rng):
    """Physically shuffle columns and groups; returns new values and layout."""
    new_groups = []
    for j in group_perm:
        g = list(layout.groups[j])
        rng.shuffle(g)
        new_groups.append(g)
    order = [c for g in new_groups for c in g]
    values = ds_values[:, order]
    return values, GroupLayout.contiguous([len(g) for g in new_groups])


def axiom_suite(data, layout: GroupLayout, k: int, seed: int = 0, rounds: int = 5) -> Report:
    """Exact checks of permutation invariance, monotone-transform invariance and
    the deterministic bounds of the SECO estimators on one dataset.

    ``data`` is a :class:`Dataset` or a :class:`RankMatrix` (whose ranks are
    then treated as the raw observations).
    """
    values = data.values if isinstance(data, Dataset) else data.ranks.astype(float)
    ds = Dataset(values, layout)
    r = rank_matrix(ds)
    rng = np.random.default_rng(seed)
    rep = Report("axioms")
    base = seco_matrix(r, layout, k)
    d = layout.d
    n = r.n

    for t in range(rounds):
        perm = rng.permutation(d)
        pvalues, playout = _relabel(ds.values, layout, perm, rng)
        pm = seco_matrix(rank_matrix(Dataset(pvalues, playout)), playout, k)
        same = np.array_equal(pm.entries, base.entries[np.ix_(perm, perm)]) and np.array_equal(
            pm.thetas, base.thetas[perm]
        )
        rep.check(f"permutation invariance round {t}", same)
        if d >= 2:
            labels = rng.integers(0, max(1, d // 2), size=d)
            part = Partition.from_labels(labels)
            ppart = Partition.from_labels(labels[perm])
            a = seco_partition(r, layout, part, k)
            b = seco_partition(rank_matrix(Dataset(pvalues, playout)), playout, ppart, k)
            rep.check(f"partition SECO permutation invariance round {t}", a == b, f"{a} vs {b}")

    for name, fn in _transforms().items():
        cols = rng.permutation(ds.q)[: max(1, ds.q // 2)]
        tv = ds.values.copy()
        with np.errstate(over="ignore"):
            for c in cols:
                tv[:, c] = fn(tv[:, c])
        if not all(_injective(ds.values[:, c], tv[:, c]) for c in cols):
            rep.check(f"monotone transform {name}", True, "skipped: transform not injective in floating point")
            continue
        tm = seco_matrix(rank_matrix(Dataset(tv, layout)), layout, k)
        rep.check(
            f"monotone transform {name}",
            np.array_equal(tm.entries, base.entries) and np.array_equal(tm.thetas, base.thetas),
        )

    thetas = base.thetas
    rep.check("theta bounds 1 <= theta <= n/k", bool(np.all((thetas >= 1) & (thetas <= n / k))),
              f"min={thetas.min()}, max={thetas.max()}")
    bad_pairs = 0
    for a in range(d):
        for b in range(a + 1, d):
            s = seco_pair(r, layout, a, b, k)
            if not 0 <= s <= min(thetas[a], thetas[b]):
                bad_pairs += 1
            if s != seco_pair(r, layout, b, a, k):
                bad_pairs += 1
    rep.check("pairwise 0 <= SECO(a,b) <= min theta, symmetric", bad_pairs == 0, f"{bad_pairs} violations")
    if d >= 2:
        total = seco_partition(r, layout, [[j] for j in range(d)], k)
        upper = min(thetas.sum() - thetas[j] for j in range(d))
        rep.check("total SECO 0 <= SECO <= min_j sum_{i!=j} theta_i", 0 <= total <= upper + 1e-12,
                  f"SECO={total}, bound={upper}")
    if d >= 3:
        # appending a group can only add shared exceedances
        head = [c for g in layout.groups[:-1] for c in g]
        fewer = float(thetas[:-1].sum()) - ext_coeff_eks(r, head, k)
        rep.check("adding a group never decreases SECO", total >= fewer - 1e-12,
                  f"{total} vs {fewer}")
    for t in range(rounds):
        labels = rng.integers(0, max(1, d), size=d)
        val = seco_partition(r, layout, Partition.from_labels(labels), k)
        rep.check(f"partition SECO >= 0 round {t}", val >= 0, f"{val}")
    return rep


LOGISTIC_MOTHERS = (0.91, 0.93, 0.95, 0.97, 0.99)
LOGISTIC_CHILDREN = tuple(round(0.01 * i, 2) for i in range(1, 91))
HR_MOTHERS = (6.0, 6.25, 6.5, 6.75, 7.0)
HR_CHILDREN = tuple(round(0.01 * i, 2) for i in range(1, 601))


def coherence_levelsets(
    family: str,
    mother_grid: Sequence[float] | None = None,
    child_grid: Sequence[float] | None = None,
    thin: int = 1,
    tol: float = 1e-12,
) -> Report:
    """Closed-form SECO must strictly decrease along the mother parameter at
    every pair of child parameters."""
    fam = family.lower()
    if fam in ("logistic", "gumbel"):
        fam, fn = LOGISTIC, seco_nested_logistic
        mothers = LOGISTIC_MOTHERS if mother_grid is None else mother_grid
        children = LOGISTIC_CHILDREN if child_grid is None else child_grid
    elif fam in ("hr", "husler-reiss", "huslerreiss"):
        fam, fn = HUSLER_REISS, seco_nested_hr
        mothers = HR_MOTHERS if mother_grid is None else mother_grid
        children = HR_CHILDREN if child_grid is None else child_grid
    else:
        raise ValidationError(f"unknown family {family!r}")
    mothers = sorted(float(x) for x in mothers)
    children = [float(x) for x in children][:: max(1, thin)]
    if fam == LOGISTIC and children and max(children) > mothers[0]:
        raise ValidationError("child parameters must not exceed the smallest mother parameter")
    rep = Report(f"coherence_{fam}")
    violations = 0
    for ca in children:
        for cb in children:
            vals = [fn(m0, ca, cb) for m0 in mothers]
            steps = [vals[i] - vals[i + 1] for i in range(len(vals) - 1)]
            bad = sum(s <= tol for s in steps)
            violations += bad
            rep.rows.append({
                "child_a": ca,
                "child_b": cb,
                **{f"seco@{m0}": v for m0, v in zip(mothers, vals)},
                "min_decrease": min(steps) if steps else float("nan"),
                "violations": bad,
            })
    rep.check(
        f"{fam}: strictly decreasing in mother parameter",
        violations == 0,
        f"{violations} violations over {len(children) ** 2} child pairs x {len(mothers)} mothers",
    )
    return rep
