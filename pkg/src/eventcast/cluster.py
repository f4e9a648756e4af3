"""Agglomerative hierarchical clustering (average linkage, Euclidean).

Used to order locations by news-profile similarity: the similarity ranking
for a query point is the order in which the other points join its cluster
as the merge sequence replays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dendrogram:
    """Merge sequence from agglomerative clustering.

    Leaves are 0..n-1; merge step k creates cluster id n+k from the two
    recorded cluster ids.  Average linkage keeps merge distances
    non-decreasing, which join_order relies on.
    """

    n_leaves: int
    merges: list[tuple[int, int, float]]
    method: str = "average"
    metric: str = "euclidean"
    leaf_distances: np.ndarray = field(default=None, repr=False)


def _pairwise_euclidean(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def hier_cluster(points) -> Dendrogram:
    """Average-linkage agglomerative clustering on Euclidean distances.

    Ties on merge distance break toward the lexicographically smallest
    (cluster_a, cluster_b) id pair so the merge sequence is deterministic.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("hier_cluster requires >= 2 points of equal dimension")
    n = pts.shape[0]
    dist = _pairwise_euclidean(pts)

    # active cluster id -> (size, row in the working distance matrix)
    work = dist.copy()
    np.fill_diagonal(work, np.inf)
    ids = list(range(n))
    sizes = {i: 1 for i in range(n)}
    merges: list[tuple[int, int, float]] = []
    next_id = n

    while len(ids) > 1:
        best = (np.inf, None, None)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                d = work[i, j]
                if d < best[0]:
                    best = (d, i, j)
        d, i, j = best
        a, b = ids[i], ids[j]
        if a > b:
            a, b = b, a
        merges.append((a, b, float(d)))

        # Lance-Williams update for average linkage
        na, nb = sizes[ids[i]], sizes[ids[j]]
        merged_row = (na * work[i, :] + nb * work[j, :]) / (na + nb)
        work[i, :] = merged_row
        work[:, i] = merged_row
        work[i, i] = np.inf
        keep = [k for k in range(len(ids)) if k != j]
        work = work[np.ix_(keep, keep)]
        sizes[next_id] = na + nb
        ids[i] = next_id
        del ids[j]
        next_id += 1

    return Dendrogram(n_leaves=n, merges=merges, leaf_distances=dist)


def join_order(dend: Dendrogram, query: int) -> list[int]:
    """Other leaves in the order they join the query leaf's cluster.

    When one merge brings several leaves at once they are sub-ordered by
    direct distance to the query (closest first), then by leaf index.
    """
    if not 0 <= query < dend.n_leaves:
        raise ValueError("query must be a leaf index")
    members = {i: [i] for i in range(dend.n_leaves)}
    cluster_of = {i: i for i in range(dend.n_leaves)}
    order: list[int] = []
    next_id = dend.n_leaves
    for a, b, _d in dend.merges:
        qc = cluster_of[query]
        if qc == a:
            incoming = members[b]
        elif qc == b:
            incoming = members[a]
        else:
            incoming = None
        if incoming is not None:
            ranked = sorted(incoming,
                           key=lambda leaf: (dend.leaf_distances[query, leaf], leaf))
            order.extend(ranked)
        merged = members[a] + members[b]
        members[next_id] = merged
        for leaf in merged:
            cluster_of[leaf] = next_id
        next_id += 1
    return order
