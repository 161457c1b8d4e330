"""rankagg: learning query-indexed ranking functions from partial
preference data via aggregation and subset-averaged risk minimization."""

from .core import (
    AdjacencyPreference,
    ClickRecord,
    ComparisonPreference,
    LimitLaw,
    LinearScorer,
    Query,
    QueryDataset,
    ScoreStructure,
    SkewSymmetricAggregate,
    DifferenceGraph,
    rank_permutation,
    same_ordering,
)

__version__ = "0.1.0"
