"""Typogenic and phylogenic grouping: leader clustering and manufacturer families."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..errors import ScenarioError


@dataclass(frozen=True)
class Clustering:
    assignments: dict  # agent id -> cluster id
    centroids: tuple  # cluster id -> centroid

    __hash__ = None

    @property
    def count(self) -> int:
        return len(self.centroids)

    def members(self, cid: int) -> list[str]:
        return sorted(a for a, c in self.assignments.items() if c == cid)


def cluster_agents(agents: Iterable[tuple[str, Sequence[float]]], tau: float) -> Clustering:
    """Single-pass leader clustering in agent-id order.

    Each agent joins the nearest centroid within ``tau`` (lowest cluster id on
    ties) or founds a new cluster; centroids are running means.
    """
    if not (tau > 0 and math.isfinite(tau)):
        raise ScenarioError("BAD_TAU", f"tau must be positive, got {tau}")
    ordered = sorted(((aid, tuple(float(x) for x in f)) for aid, f in agents), key=lambda p: p[0])
    dims = {len(f) for _, f in ordered}
    if len(dims) > 1:
        raise ScenarioError("DIMENSION_MISMATCH", f"feature lengths differ: {sorted(dims)}")
    sums: list[list[float]] = []
    sizes: list[int] = []
    centroids: list[tuple[float, ...]] = []
    assignments = {}
    for aid, f in ordered:
        best, best_d = None, None
        for cid, c in enumerate(centroids):
            d = math.dist(f, c)
            if d <= tau and (best_d is None or d < best_d):
                best, best_d = cid, d
        if best is None:
            best = len(centroids)
            sums.append(list(f))
            sizes.append(1)
            centroids.append(f)
        else:
            sums[best] = [s + x for s, x in zip(sums[best], f)]
            sizes[best] += 1
            centroids[best] = tuple(s / sizes[best] for s in sums[best])
        assignments[aid] = best
    return Clustering(assignments, tuple(centroids))


def group_families(clustering: Clustering, manufacturers: Mapping[str, str]) -> dict[str, list[int]]:
    """Map each manufacturer family to the clusters whose members it mostly makes."""
    families: dict[str, list[int]] = {}
    for cid in range(clustering.count):
        votes = Counter(manufacturers[a] for a in clustering.members(cid))
        if not votes:
            continue
        top = max(votes.values())
        winner = min(m for m, v in votes.items() if v == top)
        families.setdefault(winner, []).append(cid)
    return dict(sorted(families.items()))


def purity(clustering: Clustering, labels: Mapping[str, object]) -> float:
    """Fraction of agents sharing the majority true label of their cluster."""
    total = len(clustering.assignments)
    if total == 0:
        return 1.0
    hits = 0
    for cid in range(clustering.count):
        votes = Counter(labels[a] for a in clustering.members(cid))
        hits += max(votes.values(), default=0)
    return hits / total
