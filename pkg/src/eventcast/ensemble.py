"""Tree ensembles and minority oversampling.

The forest averages leaf class-1 probabilities over bootstrapped Gini
trees.  The booster is the resampling variant: each round draws a fresh
bootstrap from the evolving instance distribution, fits a depth-1 stump
to it, and scores the stump's weighted error on the full set.  SMOTE
interpolates new minority rows between nearest minority neighbors.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .trees import DecisionTree, tree_train

# error floor when a stump is perfect; caps alpha at ~11.51
ADA_EPSILON_FLOOR = 1e-10


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0  # minority:majority after oversampling

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.target_ratio <= 0:
            raise ValueError("target_ratio must be positive")


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    tree_seeds: np.ndarray
    subspace: int
    bootstrap: bool = True

    @property
    def estimators(self) -> int:
        return len(self.trees)


@dataclass
class BoostModel:
    stumps: list[tuple[DecisionTree, float]]
    iterations: int
    discarded: int = 0
    # one row per retained round: (eps, alpha, weight sum after update,
    # misclassified mass after update); lets callers audit the update
    history: list[tuple[float, float, float, float]] = field(
        default_factory=list)


def ada_alpha(eps: float) -> float:
    """Stump weight for error eps, floored so a perfect stump stays finite."""
    eps_c = max(float(eps), ADA_EPSILON_FLOOR)
    return 0.5 * math.log((1.0 - eps_c) / eps_c)


def default_subspace(m: int) -> int:
    return int(math.ceil(math.sqrt(m)))


def rf_train(X, y, estimators, seed, subspace=None, bootstrap=True,
             workers=1) -> ForestModel:
    """Train a forest; identical output for any worker count.

    Each tree's randomness comes only from its own 64-bit seed, so the
    thread that happens to run it cannot change the result.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64))
    if estimators < 1:
        raise ValueError("need at least one estimator")
    sub = default_subspace(X.shape[1]) if subspace is None else int(subspace)
    seeds = np.random.SeedSequence(seed).generate_state(estimators,
                                                        dtype=np.uint64)

    def grow(s):
        return tree_train(X, y, subspace_size=sub, seed=int(s),
                          bootstrap=bootstrap)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return ForestModel(trees=trees, tree_seeds=seeds, subspace=sub,
                       bootstrap=bootstrap)


def rf_predict(model: ForestModel, X) -> np.ndarray:
    """Mean of per-tree leaf probabilities, accumulated in tree order."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    acc = np.zeros(X.shape[0])
    for tree in model.trees:
        acc += tree.predict_proba(X)
    return acc / len(model.trees)


def ada_train(X, y, iterations, seed) -> BoostModel:
    """Resampling AdaBoost with decision stumps.

    Rounds whose stump scores weighted error >= 0.5 on the full set are
    discarded; the distribution is left as-is and the next round draws a
    fresh bootstrap.  A perfect stump has its error floored at
    ADA_EPSILON_FLOOR so alpha stays finite.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64))
    n = X.shape[0]
    if n < 1 or iterations < 1:
        raise ValueError("need rows and at least one iteration")
    y_pm = np.where(y == 1, 1.0, -1.0)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = np.full(n, 1.0 / n)
    stumps: list[tuple[DecisionTree, float]] = []
    history: list[tuple[float, float, float, float]] = []
    discarded = 0
    for _ in range(iterations):
        sample = rng.choice(n, size=n, replace=True, p=w)
        stump = tree_train(X[sample], y[sample], subspace_size=X.shape[1],
                           seed=0, max_depth=1)
        h = np.where(stump.predict_proba(X) >= 0.5, 1.0, -1.0)
        eps = float(np.sum(w[h != y_pm]))
        if eps >= 0.5:
            discarded += 1
            continue
        alpha = ada_alpha(eps)
        w = w * np.exp(-alpha * y_pm * h)
        w = w / w.sum()
        stumps.append((stump, alpha))
        history.append((eps, alpha, float(w.sum()),
                        float(np.sum(w[h != y_pm]))))
    return BoostModel(stumps=stumps, iterations=iterations,
                      discarded=discarded, history=history)


def ada_predict(model: BoostModel, X) -> np.ndarray:
    """Logistic of the alpha-normalized vote margin, in (0,1)."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if not model.stumps:
        return np.full(X.shape[0], 0.5)
    margin = np.zeros(X.shape[0])
    total = 0.0
    for stump, alpha in model.stumps:
        h = np.where(stump.predict_proba(X) >= 0.5, 1.0, -1.0)
        margin += alpha * h
        total += alpha
    return 1.0 / (1.0 + np.exp(-margin / total))


def smote_sample(X_minority, n_new, k=5, rng=None):
    """Interpolate n_new synthetic minority rows.

    Each row is x_i + u (x_nn - x_i) with u ~ Uniform[0,1] and x_nn one
    of x_i's k nearest minority neighbors (Euclidean; k shrinks to
    |minority| - 1 when the class is small).  Returns (rows, parents)
    where parents[r] = (i, nn) indices into X_minority.
    """
    X = np.asarray(X_minority, dtype=float)
    n_min = X.shape[0]
    if n_min < 2:
        raise ValueError("SMOTE needs at least two minority rows")
    if n_new < 0:
        raise ValueError("n_new must be >= 0")
    if rng is None:
        rng = np.random.default_rng()
    k_eff = min(int(k), n_min - 1)
    if k_eff < 1:
        raise ValueError("k must be >= 1")

    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    neighbors = np.argsort(dist, axis=1, kind="mergesort")[:, :k_eff]

    rows = np.empty((n_new, X.shape[1]))
    parents = np.empty((n_new, 2), dtype=np.int64)
    for r in range(n_new):
        i = int(rng.integers(n_min))
        nn = int(neighbors[i, int(rng.integers(k_eff))])
        u = rng.random()
        rows[r] = X[i] + u * (X[nn] - X[i])
        parents[r] = (i, nn)
    return rows, parents


def smote_balance(X, y, config: SmoteConfig = SmoteConfig(), rng=None):
    """Oversample the minority class toward the target ratio.

    Returns (X_out, y_out, parents) where parents holds, per synthetic
    row, the two source row indices in the caller's coordinates.  When
    the classes already meet the ratio the inputs come back unchanged.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
    want = int(round(config.target_ratio * majority.size)) - minority.size
    if want <= 0:
        return X, np.asarray(y, dtype=np.int64), np.empty((0, 2), dtype=np.int64)
    rows, parents = smote_sample(X[minority], want, k=config.k_neighbors,
                                 rng=rng)
    X_out = np.vstack([X, rows])
    y_out = np.concatenate([np.asarray(y, dtype=np.int64),
                            np.full(want, int(y[minority[0]]), dtype=np.int64)])
    return X_out, y_out, minority[parents]
