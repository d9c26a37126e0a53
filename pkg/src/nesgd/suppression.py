"""Niche suppression: cluster the combined population and damp crowded spots.

The 2m parents+offspring are clustered agglomeratively on genome distance
(square root of the Hamming count) down to m clusters; in every cluster
larger than 3 the single weakest member has its fitness scaled by 1e-2 so a
crowded region of genome space loses selection pressure.

Cluster distances are evaluated with ``math.fsum`` (correctly rounded,
order-independent), so candidate pairs whose pairwise-distance multisets are
equal compare exactly equal and the lexicographic tie rule is what decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError, StateError
from .genome import Genome

SUPPRESSION_FACTOR = 1e-2
CROWDING_SIZE_THRESHOLD = 3

LINKAGES = ("average", "single", "complete")


@dataclass
class ClusterSet:
    """Disjoint clusters covering indices 0..size-1; members sorted."""

    clusters: list[list[int]]

    @property
    def q(self) -> int:
        return len(self.clusters)

    def covered(self) -> list[int]:
        out: list[int] = []
        for c in self.clusters:
            out.extend(c)
        return sorted(out)


def hamming_distance(g1: Genome, g2: Genome) -> float:
    """sqrt of the number of differing bits (squared bit differences summed)."""
    if len(g1) != len(g2):
        raise ShapeError(f"genome lengths differ: {len(g1)} vs {len(g2)}")
    differing = sum(a != b for a, b in zip(g1.bits, g2.bits))
    return math.sqrt(differing)


def build_distance_matrix(genomes: "list[Genome]") -> np.ndarray:
    """Symmetric zero-diagonal matrix of pairwise genome distances."""
    if len(genomes) < 2:
        raise ConfigurationError("need at least 2 genomes")
    size = len(genomes)
    matrix = np.zeros((size, size), dtype=np.float64)
    for i in range(size):
        for j in range(i + 1, size):
            d = hamming_distance(genomes[i], genomes[j])
            matrix[i, j] = d
            matrix[j, i] = d
    return matrix


def _cluster_distance(a: list[int], b: list[int], matrix: np.ndarray, linkage: str) -> float:
    pair_distances = [matrix[i, j] for i in a for j in b]
    if linkage == "average":
        return math.fsum(pair_distances) / (len(a) * len(b))
    if linkage == "single":
        return min(pair_distances)
    if linkage == "complete":
        return max(pair_distances)
    raise ConfigurationError(f"unknown linkage {linkage!r}, expected one of {LINKAGES}")


def agglomerate(matrix: np.ndarray, target_clusters: int, linkage: str = "average") -> ClusterSet:
    """Merge singletons bottom-up until exactly ``target_clusters`` remain.

    The closest pair under the linkage merges first; exact ties break to the
    lexicographically smallest (i, j) position pair. The merged cluster stays
    at position i and later clusters shift down, mirroring how the working
    set is renumbered after each merge.
    """
    size = matrix.shape[0]
    if matrix.shape != (size, size):
        raise ShapeError(f"distance matrix must be square, got {matrix.shape}")
    if target_clusters < 1:
        raise ConfigurationError("target cluster count must be >= 1")
    if target_clusters > size:
        raise ConfigurationError(
            f"target cluster count {target_clusters} exceeds population size {size}"
        )
    if linkage not in LINKAGES:
        raise ConfigurationError(f"unknown linkage {linkage!r}, expected one of {LINKAGES}")

    clusters = [[i] for i in range(size)]
    while len(clusters) > target_clusters:
        best = None
        best_pair = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                d = _cluster_distance(clusters[i], clusters[j], matrix, linkage)
                if best is None or d < best:
                    best = d
                    best_pair = (i, j)
        i, j = best_pair
        clusters[i] = sorted(clusters[i] + clusters[j])
        del clusters[j]
    return ClusterSet([sorted(c) for c in clusters])


def suppress(
    cluster_set: ClusterSet,
    raw_fitnesses: "np.ndarray | list[float]",
    factor: float = SUPPRESSION_FACTOR,
    size_threshold: int = CROWDING_SIZE_THRESHOLD,
) -> np.ndarray:
    """Scale the weakest member of each crowded cluster by ``factor``.

    In every cluster with more than ``size_threshold`` members exactly one
    member — the minimum raw fitness, ties to the lowest index — gets
    ``adjusted = raw * factor``; everyone else keeps their raw value.
    """
    raw = np.asarray(raw_fitnesses, dtype=np.float64)
    if cluster_set.covered() != list(range(raw.size)):
        raise StateError(
            f"clusters cover {cluster_set.covered()} but fitness has {raw.size} entries"
        )
    adjusted = raw.copy()
    for cluster in cluster_set.clusters:
        if len(cluster) > size_threshold:
            weakest = min(cluster, key=lambda idx: (raw[idx], idx))
            adjusted[weakest] = raw[weakest] * factor
    return adjusted
