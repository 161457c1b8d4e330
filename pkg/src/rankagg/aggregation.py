"""Structure functions: maps from batches of preference judgments to
aggregate structures (score vectors or matrices).

Covered strategies: adjacency averaging, empirical log-odds (both the
skew-symmetric matrix and the per-item score variants), Thurstone-Mosteller
least squares on a masked comparison graph, Borda count, Ammar-Shah win
probabilities, the principal-eigenvector method for reciprocal matrices,
and the cascade-model maximum likelihood estimator for click data.

Every function here is pure and reentrant; callers may parallelize across
queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .core import (
    AdjacencyPreference,
    ClickRecord,
    ComparisonPreference,
    ScoreStructure,
    SkewSymmetricAggregate,
)

__all__ = [
    "average_adjacency",
    "btl_log_odds",
    "thurstone_mosteller_scores",
    "borda_scores",
    "ammar_shah_scores",
    "eigenvector_scores",
    "cascade_mle",
    "CascadeMLEResult",
    "empirical_log_odds_scores",
    "comparison_counts",
    "PowerIterationError",
]


def average_adjacency(prefs: Sequence[AdjacencyPreference]) -> AdjacencyPreference:
    """Entrywise mean of a batch of adjacency judgments."""
    prefs = list(prefs)
    if not prefs:
        raise ValueError("no judgments")
    m = prefs[0].m
    if any(p.m != m for p in prefs):
        raise ValueError("adjacency judgments disagree on item count")
    total = np.zeros((m, m))
    for p in prefs:
        total += p.weights
    return AdjacencyPreference(total / len(prefs))


def comparison_counts(comparisons: Iterable[ComparisonPreference], m: int) -> np.ndarray:
    """m x m matrix of win counts: entry (i, j) counts comparisons i > j."""
    counts = np.zeros((m, m))
    for c in comparisons:
        if c.winner >= m or c.loser >= m:
            raise ValueError(f"comparison ({c.winner}, {c.loser}) references item >= m={m}")
        counts[c.winner, c.loser] += 1
    return counts


def btl_log_odds(
    comparisons: Sequence[ComparisonPreference], m: int, c: float = 1.0
) -> SkewSymmetricAggregate:
    """Skew-symmetric aggregate of smoothed empirical log-odds ratios.

    Entry (j, l) is ``log((P(j>l) + c) / (P(j<l) + c))`` where P is the
    empirical distribution over the whole comparison list and ``c > 0``
    smooths unobserved directions.  Pairs never observed are masked out
    (entry forced to 0, mask 0).
    """
    if c <= 0:
        raise ValueError("smoothing constant c must be positive")
    comparisons = list(comparisons)
    counts = comparison_counts(comparisons, m)
    n = len(comparisons)
    a = np.zeros((m, m))
    mask = np.eye(m)
    for j in range(m):
        for l in range(j + 1, m):
            if counts[j, l] == 0 and counts[l, j] == 0:
                continue
            mask[j, l] = mask[l, j] = 1
            p_win = counts[j, l] / n
            p_lose = counts[l, j] / n
            val = math.log((p_win + c) / (p_lose + c))
            a[j, l] = val
            a[l, j] = -val
    return SkewSymmetricAggregate(a, mask)


def _mask_graph_connected(mask: np.ndarray) -> bool:
    """BFS connectivity of the off-diagonal mask graph."""
    m = mask.shape[0]
    if m == 1:
        return True
    seen = np.zeros(m, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in range(m):
            if j != i and mask[i, j] and not seen[j]:
                seen[j] = True
                stack.append(j)
    return bool(seen.all())


def thurstone_mosteller_scores(agg: SkewSymmetricAggregate) -> ScoreStructure:
    """Least-squares scores fitting ``s_i - s_j ~ A_ij`` on observed pairs.

    Minimizes ``(1/4) || mask o (A - (s 1' - 1 s')) ||_F^2`` subject to
    ``sum(s) = 0``; the stationarity condition is ``(D - mask) s = (mask o A) 1``
    with ``D = diag(mask 1)``, an unnormalized graph Laplacian system solved
    via eigendecomposition pseudoinverse (item counts are small, so dense
    eigendecomposition is the simplest adequate tool).

    Raises if the observed-pair graph is disconnected: the pseudoinverse
    would silently center each component separately.
    """
    mask = agg.mask.copy()
    np.fill_diagonal(mask, 0)
    if not _mask_graph_connected(agg.mask):
        raise ValueError("comparison graph disconnected")
    degrees = mask.sum(axis=1)
    laplacian = np.diag(degrees) - mask
    rhs = (agg.mask * agg.a).sum(axis=1)
    eigvals, eigvecs = np.linalg.eigh(laplacian)
    # Connected graph: exactly one zero eigenvalue (the all-ones direction).
    cutoff = max(eigvals.max(), 1.0) * 1e-12
    inv = np.zeros_like(eigvals)
    inv[eigvals > cutoff] = 1.0 / eigvals[eigvals > cutoff]
    s = eigvecs @ (inv * (eigvecs.T @ rhs))
    return ScoreStructure(s)


def borda_scores(agg: SkewSymmetricAggregate) -> ScoreStructure:
    """Borda count: row sums of the skew-symmetric aggregate."""
    return ScoreStructure(agg.a.sum(axis=1))


def ammar_shah_scores(comparisons: Sequence[ComparisonPreference], m: int) -> ScoreStructure:
    """Estimated probability of winning against a uniformly random opponent.

    ``s_j = (1/(m-1)) sum_{l != j} P(j beats l)`` with P the per-pair
    empirical win frequency.  Pairs never observed contribute 0, which keeps
    the estimator total (never-compared items simply earn nothing).
    """
    if m < 2:
        raise ValueError("need at least two items")
    counts = comparison_counts(comparisons, m)
    s = np.zeros(m)
    for j in range(m):
        for l in range(m):
            if l == j:
                continue
            total = counts[j, l] + counts[l, j]
            if total > 0:
                s[j] += counts[j, l] / total
    return ScoreStructure(s / (m - 1))


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


def eigenvector_scores(
    reciprocal: np.ndarray, tol: float = 1e-12, max_iter: int = 10000
) -> ScoreStructure:
    """Perron vector of a positive reciprocal matrix, normalized to sum 1.

    The input must satisfy ``A_ij > 0`` and ``A_ij * A_ji = 1`` (within
    1e-9).  Power iteration starts from the uniform vector; positivity
    guarantees convergence to the dominant eigenvector.
    """
    a = np.asarray(reciprocal, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("reciprocal matrix must be square")
    if np.any(a <= 0):
        raise ValueError("reciprocal matrix entries must be positive")
    if np.max(np.abs(a * a.T - 1.0)) > 1e-9:
        raise ValueError("matrix is not reciprocal: A_ij * A_ji != 1")
    m = a.shape[0]
    x = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        y = a @ x
        y /= y.sum()
        if np.max(np.abs(y - x)) < tol:
            return ScoreStructure(y)
        x = y
    raise PowerIterationError(
        f"power iteration did not converge in {max_iter} iterations", x
    )


@dataclass(frozen=True)
class CascadeMLEResult:
    """Cascade-model MLE output.

    ``probabilities`` holds the estimated satisfaction probability per item
    (0 for never-examined items); ``examinations`` and ``clicks`` are the
    underlying count tables.  Items with ``examinations == 0`` carry no
    information and downstream consumers must not read their 0 as evidence.
    """

    probabilities: ScoreStructure
    examinations: np.ndarray
    clicks: np.ndarray

    @property
    def unexamined(self) -> np.ndarray:
        return self.examinations == 0


def cascade_mle(records: Sequence[ClickRecord], m: int) -> CascadeMLEResult:
    """Closed-form MLE of cascade satisfaction probabilities.

    Under the cascade model a session examines positions 1..c (c the click
    position, or the whole list when nothing is clicked).  The MLE of item
    l's satisfaction probability is clicks(l) / examinations(l).
    """
    exams = np.zeros(m)
    clicks = np.zeros(m)
    for r in records:
        if any(i >= m for i in r.presented):
            raise ValueError(f"click record references item >= m={m}")
        last_examined = min(r.clicked_position, len(r.presented))
        for pos in range(last_examined):
            exams[r.presented[pos]] += 1
        if r.clicked:
            clicks[r.presented[r.clicked_position - 1]] += 1
    with np.errstate(invalid="ignore"):
        p = np.where(exams > 0, clicks / np.maximum(exams, 1), 0.0)
    return CascadeMLEResult(ScoreStructure(p), exams, clicks)


def log_odds_from_counts(counts: np.ndarray, c: float = 1.0) -> ScoreStructure:
    """Per-item average log-odds scores from a win-count matrix.

    For each observed pair the contribution to item i is
    ``log(wins_ij / wins_ji)``; when a direction has zero observations the
    smoothing constant c is added to both counts.  Unobserved pairs
    contribute 0.
    """
    if c < 0:
        raise ValueError("smoothing constant c must be nonnegative")
    m = counts.shape[0]
    if m < 2:
        raise ValueError("need at least two items")
    s = np.zeros(m)
    for i in range(m):
        for j in range(i + 1, m):
            w, l = counts[i, j], counts[j, i]
            if w == 0 and l == 0:
                continue
            if min(w, l) == 0:
                if c == 0:
                    raise ValueError("infinite log-odds; supply smoothing")
                val = math.log((w + c) / (l + c))
            else:
                val = math.log(w / l)
            s[i] += val
            s[j] -= val
    return ScoreStructure(s / (m - 1))


def empirical_log_odds_scores(
    comparisons: Sequence[ComparisonPreference], m: int, c: float = 1.0
) -> ScoreStructure:
    """Average empirical log-odds of each item beating the others.

    ``s_i = (1/(m-1)) sum_{j != i} log(P(j < i) / P(j > i))`` over observed
    pairs; see :func:`log_odds_from_counts` for the smoothing convention.
    """
    return log_odds_from_counts(comparison_counts(comparisons, m), c)
