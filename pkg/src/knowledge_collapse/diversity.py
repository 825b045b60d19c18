"""Output-diversity measures over a fixed reference list of entities.

Generator outputs are reduced to mention counts over the reference list.
The representativeness checks are scored empirically: a list of violating
entities for the non-zero requirement, total-variation deviation from a
weight-proportional target for the others. Entity resolution maps mention
vectors onto reference vectors; embeddings themselves come from elsewhere.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import UsageError

NOISE = -1
METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class FrequencyTable:
    """Mention counts over a reference list; absent entities count zero."""

    reference: tuple
    counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ref = tuple(self.reference)
        if not ref:
            raise UsageError("reference list is empty")
        if len(set(ref)) != len(ref):
            raise UsageError("reference labels must be unique")
        known = set(ref)
        clean = {}
        for k, v in self.counts.items():
            if k not in known:
                raise UsageError(f"entity {k!r} is not in the reference list")
            if int(v) != v or v < 0:
                raise UsageError(f"count for {k!r} must be a non-negative integer")
            if v:
                clean[k] = int(v)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "counts", clean)

    @property
    def reference_size(self) -> int:
        return len(self.reference)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, label) -> int:
        return self.counts.get(label, 0)

    def vector(self) -> np.ndarray:
        return np.array([self.count(r) for r in self.reference], dtype=float)

    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            raise UsageError("frequency table is empty")
        return self.vector() / self.total

    def ranked(self) -> list:
        """``(label, count)`` pairs by descending count, then label."""
        return sorted(((r, self.count(r)) for r in self.reference), key=lambda t: (-t[1], t[0]))

    def __add__(self, other: "FrequencyTable") -> "FrequencyTable":
        if self.reference != other.reference:
            raise UsageError("tables use different reference lists")
        merged = Counter(self.counts)
        merged.update(other.counts)
        return FrequencyTable(self.reference, dict(merged))


def frequency_table(labels: Sequence, reference: Sequence) -> FrequencyTable:
    """Count resolved mentions; ``None`` entries (discarded mentions) are skipped."""
    return FrequencyTable(tuple(reference), dict(Counter(l for l in labels if l is not None)))


def shannon_index(table: FrequencyTable) -> float:
    """Shannon diversity ``H' = -sum p_i ln p_i`` (natural log, 0 ln 0 = 0)."""
    # reference order keeps the float summation independent of how counts were built
    c = table.vector()
    c = c[c > 0]
    if c.sum() == 0:
        raise UsageError("frequency table is empty")
    p = c / c.sum()
    return float(max(0.0, -(p * np.log(p)).sum()))


def pielou_evenness(h_prime: float, reference_size: int) -> float:
    """Pielou's J' = H' / ln R."""
    if reference_size < 2:
        raise UsageError("Pielou evenness needs at least two reference entities")
    ln_r = math.log(reference_size)
    if h_prime < 0 or h_prime > ln_r + 1e-9:
        raise UsageError(f"H'={h_prime} outside [0, ln R]")
    return min(1.0, h_prime / ln_r)


def minimal_representativeness(table: FrequencyTable) -> list:
    """Reference entities never mentioned; empty when every entity appears."""
    return [r for r in table.reference if table.count(r) == 0]


def _total_variation(p: np.ndarray, w: np.ndarray) -> float:
    return float(min(1.0, max(0.0, 0.5 * np.abs(p - w).sum())))


def proportional_deviation(table: FrequencyTable, weights: Mapping[str, float]) -> float:
    """Total-variation distance between mention shares and ``weights``
    normalised over the reference list. Uniform weights give the deviation
    from strong uniform representativeness."""
    missing = [r for r in table.reference if r not in weights]
    if missing:
        raise UsageError(f"no weight for entity {missing[0]!r}")
    w = np.array([float(weights[r]) for r in table.reference])
    if np.any(w < 0):
        raise UsageError("weights must be non-negative")
    if not w.sum() > 0:
        raise UsageError("weights sum to zero")
    return _total_variation(table.probabilities(), w / w.sum())


def uniform_deviation(table: FrequencyTable) -> float:
    return proportional_deviation(table, {r: 1.0 for r in table.reference})


@dataclass(frozen=True)
class GroupPartition:
    groups: Mapping[str, str]
    weights: Mapping[str, float]

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise UsageError("group weights must be non-negative")
        if not sum(self.weights.values()) > 0:
            raise UsageError("group weights sum to zero")
        unknown = set(self.groups.values()) - set(self.weights)
        if unknown:
            raise UsageError(f"no weight for group {sorted(unknown)[0]!r}")


def group_proportional_deviation(table: FrequencyTable, partition: GroupPartition) -> float:
    """Aggregate counts by group, then total variation against group weights."""
    names = sorted(partition.weights)
    counts = dict.fromkeys(names, 0)
    for label, c in table.counts.items():
        if label not in partition.groups:
            raise UsageError(f"entity {label!r} has mentions but no group")
        counts[partition.groups[label]] += c
    total = sum(counts.values())
    if total == 0:
        raise UsageError("frequency table is empty")
    p = np.array([counts[g] / total for g in names])
    w = np.array([float(partition.weights[g]) for g in names])
    return _total_variation(p, w / w.sum())


@dataclass(frozen=True)
class VectorSet:
    labels: tuple
    vectors: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        labels = tuple(self.labels)
        if v.shape[0] != len(labels):
            raise UsageError("one vector per label required")
        if len(set(labels)) != len(labels):
            raise UsageError("vector labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "vectors", v)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.labels)

    def subset(self, labels) -> "VectorSet":
        index = {l: i for i, l in enumerate(self.labels)}
        missing = [l for l in labels if l not in index]
        if missing:
            raise UsageError(f"no vector for {missing[0]!r}")
        return VectorSet(tuple(labels), self.vectors[[index[l] for l in labels]])


def _distances(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    if metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}")
    return cdist(a, b, metric=metric)


def dbscan(vectors: VectorSet, eps: float, min_pts: int = 2, metric: str = "euclidean") -> dict:
    """Density-based clustering; returns ``label -> cluster id`` with
    ``NOISE`` (-1) for noise points.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are the connected components of core points
    under the eps-neighbour relation. A border point joins the cluster of
    its nearest core neighbour, ties going to the lower cluster id. Cluster
    ids are numbered by each cluster's smallest member label, which makes
    the output independent of input order.
    """
    if len(vectors) == 0:
        raise UsageError("empty vector set")
    if not eps > 0:
        raise UsageError("eps must be > 0")
    if min_pts < 1:
        raise UsageError("min_pts must be >= 1")
    labels = vectors.labels
    order = sorted(range(len(labels)), key=lambda i: labels[i])
    X = vectors.vectors[order]
    names = [labels[i] for i in order]
    dist = _distances(X, X, metric)
    nbr = dist <= eps
    core = nbr.sum(axis=1) >= min_pts

    n = len(names)
    assign = np.full(n, NOISE)
    next_id = 0
    for i in range(n):
        if not core[i] or assign[i] != NOISE:
            continue
        assign[i] = next_id
        stack = [i]
        while stack:
            j = stack.pop()
            for k in np.flatnonzero(nbr[j] & core):
                if assign[k] == NOISE:
                    assign[k] = next_id
                    stack.append(k)
        next_id += 1

    # points are visited in label order, so cluster ids already follow the
    # smallest core label; border points may carry an even smaller label
    for i in np.flatnonzero(~core):
        cand = np.flatnonzero(nbr[i] & core)
        if cand.size:
            d = dist[i, cand]
            best = cand[d == d.min()]
            assign[i] = min(assign[b] for b in best)
    return _canonical({names[i]: int(assign[i]) for i in range(n)})


def _canonical(assignment: dict) -> dict:
    first = {}
    for label in sorted(assignment):
        cid = assignment[label]
        if cid != NOISE and cid not in first:
            first[cid] = len(first)
    return {label: (first[c] if c != NOISE else NOISE) for label, c in assignment.items()}


def resolve_entities(
    mentions: VectorSet, reference: VectorSet, eps: float, metric: str = "euclidean"
) -> dict:
    """Map each mention to its nearest reference label within ``eps``,
    or to ``None`` when nothing is that close. Ties go to the earlier
    reference entry."""
    if mentions.dimension != reference.dimension:
        raise UsageError(
            f"dimension mismatch: mentions {mentions.dimension}, reference {reference.dimension}"
        )
    if len(mentions) == 0:
        return {}
    d = _distances(mentions.vectors, reference.vectors, metric)
    best = d.argmin(axis=1)
    out = {}
    for i, label in enumerate(mentions.labels):
        j = int(best[i])
        out[label] = reference.labels[j] if d[i, j] <= eps else None
    return out
