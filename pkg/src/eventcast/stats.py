"""Statistical primitives: two-sample K-S test, rank statistics, H-test,
and tie-aware ranking metrics.

Conventions that matter downstream are explicit here and tagged in reports:
the K-S p-value is the asymptotic Kolmogorov tail at sqrt(ne)*D with
ne = n1*n2/(n1+n2); the area under the precision-recall curve is average
precision computed by a stable rank walk (ties kept in original order).
Statistics that are undefined for an input (single-class labels, zero rank
variance, all-tied H-test) raise UndefinedStatisticError so callers can
apply their own skip policy instead of receiving a silent 0.5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UndefinedStatisticError(ValueError):
    """The requested statistic has no defined value for this input."""


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


@dataclass(frozen=True)
class KsResult:
    d: float
    p: float


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov survival function Q(lam).

    Q(lam) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2).  For small lam the
    alternating series converges slowly, so the theta-transformed CDF series
    is used instead; both branches are accurate to well below 1e-10 absolute.
    """
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # P(lam) = sqrt(2 pi)/lam * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 lam^2))
        q = math.pi * math.pi / (8.0 * lam * lam)
        total = 0.0
        for k in range(1, 30):
            term = math.exp(-((2 * k - 1) ** 2) * q)
            total += term
            if term < 1e-18 * max(total, 1.0):
                break
        p_cdf = math.sqrt(2.0 * math.pi) / lam * total
        return min(max(1.0 - p_cdf, 0.0), 1.0)
    total = 0.0
    sign = 1.0
    for k in range(1, 200):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        sign = -sign
        if term < 1e-16:
            break
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(a, b) -> KsResult:
    """Two-sample K-S test: D over the merged support plus asymptotic p.

    D is the exact supremum of |F_a - F_b|; p = Q(sqrt(ne) * D) with
    ne = n1*n2/(n1+n2), clamped into (0, 1].
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample requires non-empty samples")
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    support = np.concatenate([a_sorted, b_sorted])
    cdf_a = np.searchsorted(a_sorted, support, side="right") / a.size
    cdf_b = np.searchsorted(b_sorted, support, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = a.size * b.size / (a.size + b.size)
    p = kolmogorov_sf(math.sqrt(ne) * d)
    p = min(max(p, np.finfo(float).tiny), 1.0)
    return KsResult(d=d, p=p)


# ---------------------------------------------------------------------------
# Rank helpers


def rankdata(values) -> np.ndarray:
    """Mid-ranks (1-based); tied values share the average of their ranks."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size, dtype=float)
    sorted_v = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman's rank correlation: Pearson correlation of mid-ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("spearman requires two equal-length vectors, n >= 2")
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if denom == 0.0:
        raise UndefinedStatisticError("zero rank variance")
    return float(np.dot(rx, ry)) / denom


# ---------------------------------------------------------------------------
# Kruskal-Wallis H-test


@dataclass(frozen=True)
class HTestResult:
    h: float
    p: float
    group_count: int


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail of the chi-square distribution via the regularized
    upper incomplete gamma function Q(dof/2, x/2).

    Uses the closed forms Q(1/2, y) = erfc(sqrt(y)) and Q(1, y) = exp(-y)
    plus the recurrence Q(s+1, y) = Q(s, y) + y^s e^-y / Gamma(s+1), which
    handles every integer dof without external special-function libraries.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if x <= 0.0:
        return 1.0
    y = 0.5 * x
    if dof % 2 == 0:
        q = math.exp(-y)
        s = 1.0
    else:
        q = math.erfc(math.sqrt(y))
        s = 0.5
    while s + 1.0 <= dof / 2.0 + 1e-9:
        log_term = s * math.log(y) - y - math.lgamma(s + 1.0)
        q += math.exp(log_term)
        s += 1.0
    return min(max(q, 0.0), 1.0)


def kruskal_wallis(groups) -> HTestResult:
    """Kruskal-Wallis H with tie correction; p from the chi-square tail."""
    samples = [np.asarray(g, dtype=float) for g in groups]
    if len(samples) < 2 or any(g.size == 0 for g in samples):
        raise ValueError("kruskal_wallis requires >= 2 non-empty groups")
    pooled = np.concatenate(samples)
    n = pooled.size
    if n < 3:
        raise ValueError("kruskal_wallis requires >= 3 total observations")
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for g in samples:
        r = ranks[start:start + g.size]
        h += r.sum() ** 2 / g.size
        start += g.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    # tie correction: 1 - sum(t^3 - t) / (n^3 - n)
    _, counts = np.unique(pooled, return_counts=True)
    ties = float(np.sum(counts.astype(float) ** 3 - counts))
    correction = 1.0 - ties / (n ** 3 - n)
    if correction == 0.0:
        raise UndefinedStatisticError("all observations identical")
    h /= correction
    h = max(h, 0.0)
    return HTestResult(h=h, p=chi2_sf(h, len(samples) - 1),
                       group_count=len(samples))


# ---------------------------------------------------------------------------
# Ranking metrics


def auroc(scores, labels) -> float:
    """Rank-based area under the ROC curve with half credit for ties.

    Equals P(s_pos > s_neg) + 0.5 * P(s_pos = s_neg) over all
    positive/negative pairs, and matches the trapezoidal ROC area exactly.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedStatisticError("auroc needs both classes present")
    ranks = rankdata(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


AUPRC_CONVENTION = "average_precision_stable_order"


def auprc(scores, labels) -> float:
    """Average precision by a stable rank walk.

    Instances are visited in descending score; tied scores keep their
    original order (mergesort stability).  AP is the mean of precision at
    each positive's rank.  The convention tag AUPRC_CONVENTION is embedded
    in serialized reports.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise UndefinedStatisticError("auprc needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    hits = np.asarray(labels)[order] == 1
    ranks = np.arange(1, scores.size + 1, dtype=float)
    precision_at_hit = np.cumsum(hits)[hits] / ranks[hits]
    return float(np.sum(precision_at_hit)) / n_pos
