"""Logistic and Husler-Reiss extreme-value models, flat and nested.

Closed forms (stable tail dependence functions, extremal coefficients and the
SECO of two nested groups) plus exact samplers for the logistic family.  The
samplers draw from the extreme-value copula with uniform margins through the
positive-stable frailty construction: with ``V`` positive stable of index
``alpha`` (Laplace transform ``exp(-t**alpha)``) and ``E`` i.i.d. standard
exponentials, ``U = exp(-(E / V)**alpha)`` has the logistic copula.  Nesting
multiplies a child frailty ``V0**(1/beta) * S`` with ``beta = alpha_j/alpha_0``
onto the mother frailty ``V0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, GroupLayout

LOGISTIC = "logistic"
HUSLER_REISS = "husler-reiss"
_FAMILY_ALIASES = {
    "logistic": LOGISTIC,
    "gumbel": LOGISTIC,
    "husler-reiss": HUSLER_REISS,
    "huslerreiss": HUSLER_REISS,
    "hr": HUSLER_REISS,
}

# rows drawn per independent random stream; fixed so output never depends on scheduling
CHUNK_ROWS = 4096


class ModelError(ValueError):
    pass


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if x == math.inf:
        return 1.0
    if x == -math.inf:
        return 0.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def stdf_logistic(x: Sequence[float], alpha: float) -> float:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ModelError("stdf arguments must be non-negative")
    if not 0 < alpha <= 1:
        raise ModelError(f"logistic parameter {alpha} outside (0, 1]")
    top = x.max(initial=0.0)
    if top == 0:
        return 0.0
    # scale by the maximum so x**(1/alpha) cannot underflow for small alpha
    return float(top * np.sum((x / top) ** (1.0 / alpha)) ** alpha)


def stdf_hr(x: Sequence[float], lam: float) -> float:
    """Bivariate Husler-Reiss stdf in the log-ratio form."""
    x1, x2 = (float(v) for v in x)
    if x1 < 0 or x2 < 0:
        raise ModelError("stdf arguments must be non-negative")
    if x1 == 0 and x2 == 0:
        raise ModelError("Husler-Reiss stdf undefined at the origin")
    if not lam > 0:
        raise ModelError(f"Husler-Reiss parameter {lam} must be positive")
    if x1 == 0:
        return x2
    if x2 == 0:
        return x1
    if lam == math.inf:
        return x1 + x2
    r = math.log(x1 / x2) / lam
    return x1 * norm_cdf(lam / 2 + r) + x2 * norm_cdf(lam / 2 - r)


def theta_hr(lam: float) -> float:
    """Extremal coefficient ``2 Phi(lambda / 2)`` of a Husler-Reiss pair."""
    if not lam > 0:
        raise ModelError(f"Husler-Reiss parameter {lam} must be positive")
    return 2.0 * norm_cdf(lam / 2)


def seco_nested_logistic(a0: float, aa: float, ab: float) -> float:
    """SECO of two bivariate logistic groups under a logistic mother."""
    for a in (aa, ab):
        if not 0 < a <= a0 <= 1:
            raise ModelError(f"invalid nesting: need 0 < {a} <= {a0} <= 1")
    return 2.0 ** aa + 2.0 ** ab - (2.0 ** (aa / a0) + 2.0 ** (ab / a0)) ** a0


def seco_nested_hr(l0: float, la: float, lb: float) -> float:
    """SECO of two Husler-Reiss pairs under a Husler-Reiss mother."""
    if not (l0 > 0 and la > 0 and lb > 0):
        raise ModelError("Husler-Reiss parameters must be positive")
    ta, tb = theta_hr(la), theta_hr(lb)
    return ta + tb - stdf_hr((ta, tb), l0)


@dataclass(frozen=True)
class NestedModelSpec:
    """A mother stdf joining child stdfs over groups of coordinates.

    For the logistic family ``mother`` and ``children`` are dependence
    parameters in ``(0, 1]``; for Husler-Reiss they are positive ``lambda``
    values and groups have at most two columns.
    """

    family: str
    mother: float
    children: tuple[float, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ModelError(f"unknown model family {self.family!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "children", tuple(float(a) for a in self.children))
        object.__setattr__(self, "sizes", tuple(int(p) for p in self.sizes))
        if len(self.children) != len(self.sizes) or not self.children:
            raise ModelError("children and sizes must be non-empty and of equal length")
        if any(p < 1 for p in self.sizes):
            raise ModelError("every group needs at least one column")
        if fam == LOGISTIC:
            if not 0 < self.mother <= 1:
                raise ModelError(f"mother parameter {self.mother} outside (0, 1]")
            for a in self.children:
                if not 0 < a <= 1:
                    raise ModelError(f"child parameter {a} outside (0, 1]")
                if a > self.mother:
                    raise ModelError(f"child parameter {a} exceeds mother {self.mother}")
        else:
            if not self.mother > 0 or any(not l > 0 for l in self.children):
                raise ModelError("Husler-Reiss parameters must be positive")
            if any(p > 2 for p in self.sizes):
                raise ModelError("Husler-Reiss groups have at most two columns")

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def q(self) -> int:
        return sum(self.sizes)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "mother": self.mother,
            "children": list(self.children),
            "sizes": list(self.sizes),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "NestedModelSpec":
        try:
            return cls(obj["family"], float(obj["mother"]), tuple(obj["children"]), tuple(obj["sizes"]))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model spec: {exc}") from exc


def load_specs(path) -> list[NestedModelSpec]:
    """Read one spec (JSON object) or a list of block specs (JSON array)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict):
        return [NestedModelSpec.from_dict(raw)]
    if isinstance(raw, list) and raw and all(isinstance(o, dict) for o in raw):
        return [NestedModelSpec.from_dict(o) for o in raw]
    raise ModelError(f"{path}: expected a spec object or a non-empty array of specs")


def theta_model(spec: NestedModelSpec, cluster: Iterable[int]) -> float:
    """Extremal coefficient of the coordinates of the groups in ``cluster``."""
    cluster = sorted(set(cluster))
    if not cluster or cluster[0] < 0 or cluster[-1] >= spec.d:
        raise ModelError(f"cluster {cluster} not within 0..{spec.d - 1}")
    if spec.family == LOGISTIC:
        child = [spec.sizes[j] ** spec.children[j] for j in cluster]
        return stdf_logistic(child, spec.mother)
    child = [theta_hr(spec.children[j]) if spec.sizes[j] == 2 else 1.0 for j in cluster]
    if len(child) == 1:
        return child[0]
    if len(child) == 2:
        return stdf_hr(child, spec.mother)
    raise ModelError("Husler-Reiss mother is bivariate; clusters hold at most two groups")


def _log_positive_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Log of positive stable variates with Laplace transform ``exp(-t**alpha)``.

    Kanter's representation, evaluated in log space so that small ``alpha``
    does not overflow.
    """
    if alpha == 1.0:
        return np.zeros(size)
    u = np.pi * (1.0 - rng.random(size))
    w = rng.standard_exponential(size)
    return (
        np.log(np.sin(alpha * u))
        - np.log(np.sin(u)) / alpha
        + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(w))
    )


def _stream(seed: int, block: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(block, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _nested_logistic_rows(spec: NestedModelSpec, rows: int, rng: np.random.Generator) -> np.ndarray:
    log_v0 = _log_positive_stable(spec.mother, rows, rng)
    out = np.empty((rows, spec.q))
    start = 0
    for a, p in zip(spec.children, spec.sizes):
        beta = a / spec.mother
        log_v = log_v0 / beta + _log_positive_stable(beta, rows, rng)
        e = rng.standard_exponential((rows, p))
        out[:, start:start + p] = np.exp(-np.exp(a * (np.log(e) - log_v[:, None])))
        start += p
    return out


def _sample_block(n: int, spec: NestedModelSpec, seed: int, block: int) -> np.ndarray:
    if spec.family != LOGISTIC:
        raise ModelError("sampling is only available for the logistic family")
    if n < 1:
        raise ModelError("n must be positive")
    parts = []
    for chunk, start in enumerate(range(0, n, CHUNK_ROWS)):
        rows = min(CHUNK_ROWS, n - start)
        parts.append(_nested_logistic_rows(spec, rows, _stream(seed, block, chunk)))
    return np.vstack(parts)


def sample_nested_logistic(n: int, spec: NestedModelSpec, seed: int) -> Dataset:
    """``n`` i.i.d. rows of a nested logistic copula; one layout group per child."""
    values = _sample_block(n, spec, seed, 0)
    return Dataset(values, GroupLayout.contiguous(spec.sizes))


def sample_logistic(n: int, p: int, alpha: float, seed: int) -> Dataset:
    """``n`` i.i.d. rows of the ``p``-variate logistic copula (one group)."""
    if p < 1:
        raise ModelError("p must be positive")
    if not 0 < alpha <= 1:
        raise ModelError(f"logistic parameter {alpha} outside (0, 1]")
    return sample_nested_logistic(n, NestedModelSpec(LOGISTIC, alpha, (alpha,), (p,)), seed)


def sample_ai_blocks(n: int, block_specs: Sequence[NestedModelSpec], seed: int):
    """Mutually independent blocks, each drawn from its own nested model.

    Returns the dataset and the planted :class:`~secoclust.clustering.Partition`
    of groups into blocks.
    """
    from .clustering import Partition

    if not block_specs:
        raise ModelError("need at least one block")
    parts, sizes, clusters = [], [], []
    g = 0
    for b, spec in enumerate(block_specs):
        parts.append(_sample_block(n, spec, seed, b))
        sizes.extend(spec.sizes)
        clusters.append(list(range(g, g + spec.d)))
        g += spec.d
    ds = Dataset(np.hstack(parts), GroupLayout.contiguous(sizes))
    return ds, Partition(clusters, g, algorithm="planted")
