"""Domain types shared across the package, plus ordering utilities.

Preference judgments come in three flavours (weighted adjacency matrices,
ordered comparison pairs, click records), aggregates come in two (score
vectors, skew-symmetric matrices with an observation mask), and finite
mixtures of aggregates are represented by :class:`LimitLaw`.

All types are immutable after construction: numpy arrays are copied and
marked read-only, so instances are safe to share across threads.  All
operations in this module are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "AdjacencyPreference",
    "ComparisonPreference",
    "ClickRecord",
    "ScoreStructure",
    "SkewSymmetricAggregate",
    "DifferenceGraph",
    "LimitLaw",
    "Query",
    "QueryDataset",
    "LinearScorer",
    "PreferenceJudgment",
    "Structure",
    "rank_permutation",
    "same_ordering",
    "structure_item_count",
]

SKEW_TOL = 1e-12
PROB_TOL = 1e-12


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AdjacencyPreference:
    """Weighted directed preference graph: ``weights[i, j]`` is the strength
    with which item i is preferred to item j."""

    weights: np.ndarray

    def __post_init__(self):
        w = _readonly(self.weights)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency weights must be square, got shape {w.shape}")
        if w.shape[0] < 1:
            raise ValueError("need at least one item")
        if not np.all(np.isfinite(w)):
            raise ValueError("adjacency weights must be finite")
        if np.any(w < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("adjacency diagonal must be zero")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ComparisonPreference:
    """A single ordered comparison: ``winner`` preferred to ``loser``."""

    winner: int
    loser: int

    def __post_init__(self):
        if self.winner == self.loser:
            raise ValueError("winner and loser must differ")
        if self.winner < 0 or self.loser < 0:
            raise ValueError("item indices must be nonnegative")


@dataclass(frozen=True)
class ClickRecord:
    """One presentation-and-click session.

    ``presented`` lists item indices in display order; ``clicked_position``
    is 1-based, with ``len(presented) + 1`` meaning no click.
    """

    presented: tuple
    clicked_position: int

    def __post_init__(self):
        pres = tuple(int(i) for i in self.presented)
        if len(set(pres)) != len(pres):
            raise ValueError("presented items must be distinct")
        if any(i < 0 for i in pres):
            raise ValueError("item indices must be nonnegative")
        if not 1 <= self.clicked_position <= len(pres) + 1:
            raise ValueError(
                f"clicked_position {self.clicked_position} outside "
                f"[1, {len(pres) + 1}]"
            )
        object.__setattr__(self, "presented", pres)

    @property
    def clicked(self) -> bool:
        return self.clicked_position <= len(self.presented)


@dataclass(frozen=True)
class ScoreStructure:
    """A vector of per-item relevance scores."""

    scores: np.ndarray

    def __post_init__(self):
        s = _readonly(self.scores)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("scores must be a nonempty vector")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)

    @property
    def m(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class SkewSymmetricAggregate:
    """Skew-symmetric comparison aggregate with an observation mask.

    ``a[i, j]`` encodes the extent to which item i is preferred to item j;
    ``mask[i, j] = 1`` iff preference information was observed for the pair
    (diagonal always 1).  Entries outside the mask must be zero.
    """

    a: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        a = _readonly(self.a)
        mask = _readonly(self.mask)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != mask.shape:
            raise ValueError("a and mask must be square matrices of equal shape")
        if np.max(np.abs(a + a.T)) > SKEW_TOL:
            raise ValueError("matrix is not skew-symmetric within tolerance")
        if not np.array_equal(mask, mask.T):
            raise ValueError("mask must be symmetric")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("mask entries must be 0 or 1")
        if np.any(np.diag(mask) != 1):
            raise ValueError("mask diagonal must be 1")
        if np.any(a[mask == 0] != 0):
            raise ValueError("entries outside the mask must be zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "mask", mask)

    @property
    def m(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class DifferenceGraph:
    """Directed graph with edge weights ``max(s_ij - s_ji, 0)``."""

    diff: np.ndarray

    def __post_init__(self):
        d = _readonly(self.diff)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("diff must be square")
        if np.any(d < 0):
            raise ValueError("difference weights must be nonnegative")
        if np.any(np.minimum(d, d.T) != 0):
            raise ValueError("at most one direction per pair may be positive")
        object.__setattr__(self, "diff", d)

    @property
    def m(self) -> int:
        return self.diff.shape[0]

    def edges(self):
        """Yield (i, j, weight) for every positive edge."""
        m = self.m
        for i in range(m):
            for j in range(m):
                if self.diff[i, j] > 0:
                    yield i, j, float(self.diff[i, j])


PreferenceJudgment = Union[AdjacencyPreference, ComparisonPreference, ClickRecord]
Structure = Union[ScoreStructure, AdjacencyPreference, SkewSymmetricAggregate]


def structure_item_count(structure) -> int:
    """Number of items a structure (or judgment) refers to."""
    if hasattr(structure, "m"):
        return structure.m
    if isinstance(structure, ComparisonPreference):
        return max(structure.winner, structure.loser) + 1
    raise TypeError(f"cannot determine item count of {type(structure).__name__}")


@dataclass(frozen=True)
class LimitLaw:
    """Finite-support distribution over structures.

    Used for exact conditional-risk computation: expectations reduce to
    weighted sums over the support.
    """

    support: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        probs = _readonly(self.probabilities)
        if len(support) == 0:
            raise ValueError("support must be nonempty")
        if probs.ndim != 1 or probs.size != len(support):
            raise ValueError("probabilities must match support length")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        ms = {structure_item_count(s) for s in support}
        if len(ms) != 1:
            raise ValueError(f"support structures disagree on item count: {sorted(ms)}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", probs)

    @property
    def m(self) -> int:
        return structure_item_count(self.support[0])

    @classmethod
    def point_mass(cls, structure) -> "LimitLaw":
        return cls((structure,), np.array([1.0]))


def _check_judgment_items(judgment, m: int) -> None:
    if isinstance(judgment, ComparisonPreference):
        if judgment.winner >= m or judgment.loser >= m:
            raise ValueError(f"comparison references item >= m={m}")
    elif isinstance(judgment, ClickRecord):
        if any(i >= m for i in judgment.presented):
            raise ValueError(f"click record references item >= m={m}")
    elif isinstance(judgment, AdjacencyPreference):
        if judgment.m != m:
            raise ValueError(f"adjacency judgment has m={judgment.m}, expected {m}")
    else:
        raise TypeError(f"unsupported judgment type {type(judgment).__name__}")


@dataclass(frozen=True)
class Query:
    """One query: a feature matrix (m items x d features), the preference
    judgments observed for it, and optionally true relevances."""

    query_id: int
    features: np.ndarray
    judgments: tuple = ()
    relevances: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = _readonly(self.features)
        if feats.ndim != 2:
            raise ValueError("features must be an m x d matrix")
        judgments = tuple(self.judgments)
        m = feats.shape[0]
        for j in judgments:
            _check_judgment_items(j, m)
        rel = self.relevances
        if rel is not None:
            rel = _readonly(rel)
            if rel.shape != (m,):
                raise ValueError("relevances must be a length-m vector")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "judgments", judgments)
        object.__setattr__(self, "relevances", rel)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class QueryDataset:
    """An ordered collection of queries with a shared feature dimension."""

    queries: tuple

    def __post_init__(self):
        queries = tuple(self.queries)
        dims = {q.d for q in queries}
        if len(dims) > 1:
            raise ValueError(f"feature dimension differs across queries: {sorted(dims)}")
        object.__setattr__(self, "queries", queries)

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    @property
    def d(self) -> int:
        if not self.queries:
            raise ValueError("empty dataset has no feature dimension")
        return self.queries[0].d

    @property
    def total_judgments(self) -> int:
        return sum(len(q.judgments) for q in self.queries)

    def with_judgments(self, judgments_per_query: Sequence[Sequence]) -> "QueryDataset":
        """Return a copy with each query's judgments replaced."""
        if len(judgments_per_query) != len(self.queries):
            raise ValueError("judgment list length must match query count")
        new = tuple(
            Query(q.query_id, q.features, tuple(js), q.relevances)
            for q, js in zip(self.queries, judgments_per_query)
        )
        return QueryDataset(new)


@dataclass(frozen=True)
class LinearScorer:
    """Linear scoring model: item i of query q scores ``<theta, x_i^q>``."""

    theta: np.ndarray

    def __post_init__(self):
        t = _readonly(self.theta)
        if t.ndim != 1:
            raise ValueError("theta must be a vector")
        if not np.all(np.isfinite(t)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", t)

    def scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.theta


def rank_permutation(alpha) -> np.ndarray:
    """Ranks (1-based, 1 = best) of a stable descending sort of ``alpha``.

    Ties are broken by item index: among equal scores the lower index
    receives the better rank.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("empty scores")
    if not np.all(np.isfinite(a)):
        raise ValueError("scores must be finite")
    order = np.argsort(-a, kind="stable")
    ranks = np.empty(a.size, dtype=int)
    ranks[order] = np.arange(1, a.size + 1)
    return ranks


def ranked_items(alpha) -> np.ndarray:
    """Item indices sorted from best to worst (inverse of rank_permutation)."""
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("empty scores")
    return np.argsort(-a, kind="stable")


def same_ordering(alpha, beta) -> bool:
    """True iff every pair of coordinates compares the same way in both vectors
    (ties included)."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    sa = np.sign(a[:, None] - a[None, :])
    sb = np.sign(b[:, None] - b[None, :])
    return bool(np.array_equal(sa, sb))
