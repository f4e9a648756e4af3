"""Gini decision trees on flat arrays, compiled with numba.

Trees are grown unpruned: a node splits only while some candidate split
strictly reduces weighted Gini impurity.  Candidate thresholds are
midpoints between consecutive distinct values; ties on impurity resolve
to the lowest feature index, then the lowest threshold, because features
and thresholds are scanned ascending and only strict improvements win.

The grow kernel carries its own counter-based RNG so a tree is a pure
function of (X, y, seed) no matter which thread runs it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    # splitmix64 step; state is a length-1 uint64 array
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _rand_below(state, n):
    return np.int64(_next_u64(state) % np.uint64(n))


@njit(cache=True, nogil=True)
def _grow(X, y, seed, subspace, max_depth, bootstrap):
    n_total = X.shape[0]
    m = X.shape[1]
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed

    idx = np.empty(n_total, dtype=np.int64)
    if bootstrap:
        for i in range(n_total):
            idx[i] = _rand_below(state, n_total)
    else:
        for i in range(n_total):
            idx[i] = i

    cap = 2 * n_total + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    leaf_p1 = np.zeros(cap, dtype=np.float64)

    perm = np.empty(m, dtype=np.int64)
    scratch = np.empty(n_total, dtype=np.int64)

    # stack entries: (segment lo, segment hi, node id, depth)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_id = np.empty(cap, dtype=np.int64)
    stack_dp = np.empty(cap, dtype=np.int64)
    top = 0
    stack_lo[0] = 0
    stack_hi[0] = n_total
    stack_id[0] = 0
    stack_dp[0] = 0
    n_nodes = 1

    while top >= 0:
        lo = stack_lo[top]
        hi = stack_hi[top]
        nid = stack_id[top]
        depth = stack_dp[top]
        top -= 1

        n_node = hi - lo
        pos = 0
        for i in range(lo, hi):
            pos += y[idx[i]]
        p1 = pos / n_node
        leaf_p1[nid] = p1
        if pos == 0 or pos == n_node or (max_depth >= 0 and depth >= max_depth):
            continue

        # fresh uniform feature subset per node, reported ascending
        for i in range(m):
            perm[i] = i
        k = subspace if subspace < m else m
        for i in range(k):
            j = i + _rand_below(state, m - i)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        chosen = np.sort(perm[:k])

        # any split beats staying a mixed leaf: zero-decrease splits are
        # accepted (a node only stops when pure or feature-constant),
        # otherwise patterns like XOR would never get their first cut
        best_metric = np.inf
        best_feat = np.int64(-1)
        best_thr = 0.0
        for c in range(k):
            f = chosen[c]
            vals = np.empty(n_node, dtype=np.float64)
            labs = np.empty(n_node, dtype=np.int64)
            for i in range(n_node):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals, kind="mergesort")
            for i in range(n_node):
                labs[i] = y[idx[lo + order[i]]]
            sv = vals[order]
            pos_left = 0
            for i in range(n_node - 1):
                pos_left += labs[i]
                if sv[i + 1] <= sv[i]:
                    continue
                thr = 0.5 * (sv[i] + sv[i + 1])
                if not (sv[i] < thr < sv[i + 1]):
                    continue  # midpoint collapsed onto a sample value
                nl = i + 1
                nr = n_node - nl
                pl = pos_left / nl
                pr = (pos - pos_left) / nr
                gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
                gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
                w = (nl * gl + nr * gr) / n_node
                if w < best_metric:
                    best_metric = w
                    best_feat = f
                    best_thr = thr
        if best_feat < 0:
            continue

        # stable partition of the segment around the chosen threshold
        nl = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                scratch[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if X[idx[i], best_feat] > best_thr:
                scratch[nr] = idx[i]
                nr += 1
        for i in range(n_node):
            idx[lo + i] = scratch[i]

        feature[nid] = best_feat
        threshold[nid] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[nid] = lid
        right[nid] = rid
        top += 1
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_id[top] = rid
        stack_dp[top] = depth + 1
        top += 1
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_id[top] = lid
        stack_dp[top] = depth + 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], leaf_p1[:n_nodes])


@njit(cache=True, nogil=True)
def _predict(X, feature, threshold, left, right, leaf_p1):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        nid = 0
        while feature[nid] >= 0:
            if X[i, feature[nid]] <= threshold[nid]:
                nid = left[nid]
            else:
                nid = right[nid]
        out[i] = leaf_p1[nid]
    return out


def gini(labels) -> float:
    """Gini impurity 1 - p0^2 - p1^2 of a binary label multiset."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("gini of an empty multiset is undefined")
    p1 = float(np.mean(y == 1))
    p0 = 1.0 - p1
    return 1.0 - p0 * p0 - p1 * p1


@dataclass(frozen=True)
class DecisionTree:
    """Flat-array binary tree; internal nodes have feature >= 0."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_p1: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            nid, d = stack.pop()
            if self.feature[nid] < 0:
                best = max(best, d)
            else:
                stack.append((int(self.left[nid]), d + 1))
                stack.append((int(self.right[nid]), d + 1))
        return best

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        return _predict(X, self.feature, self.threshold, self.left,
                        self.right, self.leaf_p1)


def tree_train(X, y, subspace_size=None, seed=0, max_depth=-1,
               bootstrap=False) -> DecisionTree:
    """Grow one tree.  subspace_size=None means all features every node."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64))
    if X.ndim != 2 or y.shape[0] != X.shape[0]:
        raise ValueError("X must be 2-d with one label per row")
    if X.shape[0] < 1:
        raise ValueError("cannot grow a tree from zero rows")
    sub = X.shape[1] if subspace_size is None else int(subspace_size)
    if sub < 1:
        raise ValueError("subspace size must be >= 1")
    parts = _grow(X, y, np.uint64(seed), sub, max_depth, bootstrap)
    return DecisionTree(*parts)
