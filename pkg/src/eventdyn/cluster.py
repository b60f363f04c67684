"""Ward hierarchical clustering of countries and per-cluster comparisons."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from . import specfun
from ._util import fmt6
from .errors import ValidationError
from .ingest import IndicatorTable


@dataclass(frozen=True)
class DistanceMatrix:
    labels: tuple[str, ...]
    d: np.ndarray

    def __post_init__(self):
        d = self.d
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.labels):
            raise ValidationError("distance matrix must be square and match its labels")
        if not np.isfinite(d).all():
            raise ValidationError("distance matrix has non-finite entries")
        if (d < 0).any() or not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(np.diag(d) != 0):
            raise ValidationError("distance matrix must be symmetric, non-negative, zero on the diagonal")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree. Leaves are nodes ``0..n-1``; merge ``i`` creates node ``n + i``."""

    labels: tuple[str, ...]
    merges: tuple[Merge, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    def linkage_matrix(self) -> np.ndarray:
        """The tree in SciPy linkage layout ``[left, right, height, size]``."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def to_tree(self) -> dict:
        n = self.n_leaves
        nodes: dict[int, dict] = {i: {"id": i, "label": lab, "size": 1} for i, lab in enumerate(self.labels)}
        for i, m in enumerate(self.merges):
            nodes[n + i] = {
                "id": n + i,
                "left": nodes.pop(m.left),
                "right": nodes.pop(m.right),
                "height": m.height,
                "size": m.size,
            }
        (root,) = nodes.values()
        return root


@dataclass(frozen=True)
class ClusterAssignment:
    labels: tuple[str, ...]
    cluster_id: tuple[int, ...]

    @property
    def k(self) -> int:
        return max(self.cluster_id)

    def members(self, cluster: int) -> list[str]:
        return [lab for lab, c in zip(self.labels, self.cluster_id) if c == cluster]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["country", "cluster"])
        w.writerows(zip(self.labels, self.cluster_id))
        return buf.getvalue()


def euclidean_distances(matrix, labels: Sequence[str] | None = None) -> DistanceMatrix:
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValidationError("need a 2-D matrix with at least 2 rows")
    if np.isnan(x).any():
        raise ValidationError("matrix has missing cells; impute or drop them first")
    d = np.sqrt(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1))
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(len(x)))
    return DistanceMatrix(labels, d)


def ward_cluster(dm: DistanceMatrix) -> Dendrogram:
    """Agglomerative Ward clustering via the Lance-Williams recurrence.

    Works on squared distances; merge heights are reported as their square
    roots, so two singletons merge at their Euclidean distance. Among equal
    minimal distances, the pair with the smallest (i, j) slot indices wins;
    a merged cluster keeps the smaller slot.
    """
    n = len(dm)
    if n < 2:
        raise ValidationError("need at least 2 leaves")
    d2 = dm.d.astype(float) ** 2
    np.fill_diagonal(d2, np.inf)
    size = np.ones(n, dtype=np.int64)
    node = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = []
    for step in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], d2, np.inf)
        masked[np.tril_indices(n)] = np.inf
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        dij = d2[i, j]
        ni, nj = size[i], size[j]
        merges.append(Merge(int(node[i]), int(node[j]), math.sqrt(max(dij, 0.0)), int(ni + nj)))

        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        upd = ((ni + nk) * d2[i, others] + (nj + nk) * d2[j, others] - nk * dij) / (ni + nj + nk)
        d2[i, others] = upd
        d2[others, i] = upd
        active[j] = False
        size[i] = ni + nj
        node[i] = n + step
    return Dendrogram(dm.labels, tuple(merges))


def cut_dendrogram(dg: Dendrogram, k: int) -> ClusterAssignment:
    """Undo the last ``k - 1`` merges.

    Cluster ids are 1..k in order of each cluster's first leaf.
    """
    n = dg.n_leaves
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, {n}], got {k}")
    owner = list(range(n))  # leaf -> current node
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step, m in enumerate(dg.merges[: n - k]):
        merged = members.pop(m.left) + members.pop(m.right)
        members[n + step] = merged
        for leaf in merged:
            owner[leaf] = n + step
    ids: dict[int, int] = {}
    out = []
    for leaf in range(n):
        out.append(ids.setdefault(owner[leaf], len(ids) + 1))
    return ClusterAssignment(dg.labels, tuple(out))


def cluster_profiles(assignment: ClusterAssignment, zranks) -> np.ndarray:
    """Mean row per cluster; row ``c - 1`` belongs to cluster ``c``."""
    z = np.asarray(zranks, dtype=float)
    if len(z) != len(assignment.labels):
        raise ValidationError("assignment and matrix have different row counts")
    ids = np.asarray(assignment.cluster_id)
    return np.vstack([z[ids == c].mean(axis=0) for c in range(1, assignment.k + 1)])


def profiles_to_csv(profiles: np.ndarray, categories: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", *categories])
    for c, row in enumerate(profiles, start=1):
        w.writerow([c, *(fmt6(v) for v in row)])
    return buf.getvalue()


# -- group comparisons -----------------------------------------------------


def one_way_anova(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """F statistic and p-value; groups may differ in size."""
    gs = [np.asarray(g, dtype=float) for g in groups]
    if len(gs) < 2 or any(len(g) < 1 for g in gs):
        raise ValidationError("ANOVA needs at least two non-empty groups")
    allv = np.concatenate(gs)
    n, k = len(allv), len(gs)
    if n <= k:
        raise ValidationError("ANOVA needs more observations than groups")
    grand = allv.mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in gs)
    df_b, df_w = k - 1, n - k
    if ss_within == 0:
        f = 0.0 if ss_between == 0 else math.inf
        return f, (1.0 if ss_between == 0 else 0.0)
    f = (ss_between / df_b) / (ss_within / df_w)
    return float(f), specfun.f_sf(f, df_b, df_w)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_rank_sum_p(ranks: np.ndarray, n_a: int, w: float) -> float:
    # doubled midranks are integers; count size-n_a subsets by rank sum
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros((n_a + 1, total + 1))
    counts[0, 0] = 1.0
    for used, r in enumerate(r2, start=1):
        for j in range(min(used, n_a), 0, -1):
            counts[j, r:] += counts[j - 1, : total + 1 - r]
    dist = counts[n_a]
    dist = dist / dist.sum()
    w2 = int(round(2 * w))
    lower = dist[: w2 + 1].sum()
    upper = dist[w2:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def rank_sum_test(a, b, method: str = "auto") -> tuple[float, float, str]:
    """Wilcoxon rank-sum test, two-sided.

    Returns (W, p, method) where W is the rank sum of ``a``. ``auto`` uses
    exact enumeration when both groups have at most 10 values and the normal
    approximation (tie and continuity corrected) otherwise.
    """
    xa, xb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = len(xa), len(xb)
    if na < 1 or nb < 1:
        raise ValidationError("both groups need at least one value")
    if method == "auto":
        method = "exact" if max(na, nb) <= 10 else "normal"
    ranks = _midranks(np.concatenate([xa, xb]))
    w = float(ranks[:na].sum())
    if method == "exact":
        return w, _exact_rank_sum_p(ranks, na, w), method
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    n = na + nb
    _, ties = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(ties**3 - ties)) / (n * (n - 1)) if n > 1 else 0.0
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return w, 1.0, method
    z = max(abs(w - na * (n + 1) / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return w, min(1.0, 2.0 * specfun.normal_cdf(-z)), method


def boxplot_summary(values) -> dict:
    """Median, mean, quartiles, 1.5 x IQR whiskers and the points beyond them."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {
        "n": int(len(v)),
        "median": float(med),
        "mean": float(v.mean()),
        "q1": float(q1),
        "q3": float(q3),
        "iqr": float(iqr),
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "outliers": [float(x) for x in v if x < lo_fence or x > hi_fence],
    }


def compare_cluster_indicators(
    assignment: ClusterAssignment,
    indicators: IndicatorTable,
    indicator: str,
) -> dict:
    """One-way ANOVA across clusters plus pairwise rank-sum tests for one indicator.

    Countries without a value are dropped for this indicator only. Clusters
    with fewer than two values are left out of the tests, and comparisons
    that cannot be run are reported with ``None`` statistics.
    """
    column = indicators.column(indicator)
    groups: dict[int, list[float]] = {}
    for country, cid in zip(assignment.labels, assignment.cluster_id):
        v = column.get(country)
        groups.setdefault(cid, [])
        if v is not None:
            groups[cid].append(v)
    usable = {c: g for c, g in sorted(groups.items()) if len(g) >= 2}

    anova = {"F": None, "p": None, "df_between": None, "df_within": None}
    if len(usable) >= 2:
        f, p = one_way_anova(list(usable.values()))
        n = sum(len(g) for g in usable.values())
        anova = {"F": f, "p": p, "df_between": len(usable) - 1, "df_within": n - len(usable)}

    pairwise = []
    for a, b in combinations(sorted(groups), 2):
        entry = {"a": a, "b": b, "W": None, "p": None, "n_a": len(groups[a]), "n_b": len(groups[b]), "method": None}
        if a in usable and b in usable:
            w, p, method = rank_sum_test(usable[a], usable[b])
            entry.update(W=w, p=p, method=method)
        pairwise.append(entry)

    return {
        "indicator": indicator,
        "anova": anova,
        "pairwise": pairwise,
        "groups": {str(c): (boxplot_summary(g) if g else {"n": 0}) for c, g in sorted(groups.items())},
    }


def cluster_countries(zmatrix, labels: Sequence[str], k: int = 3) -> tuple[Dendrogram, ClusterAssignment]:
    """Euclidean distances, Ward linkage and a k-cluster cut in one call."""
    dg = ward_cluster(euclidean_distances(zmatrix, labels))
    return dg, cut_dendrogram(dg, k)


def assignment_from_mapping(mapping: Mapping[str, int]) -> ClusterAssignment:
    labels = tuple(mapping)
    return ClusterAssignment(labels, tuple(int(mapping[c]) for c in labels))
