"""Synthetic preference data generators and the LETOR text format.

Generators own their RNG state through explicit seeds or caller-provided
``numpy.random.Generator`` objects; independent instances may run in
parallel.  The LETOR reader/writer handles the standard
``<rel> qid:<id> <fid>:<val> ... [# comment]`` line format with 1-based
feature ids densified to the maximum id seen in the file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    ClickRecord,
    ComparisonPreference,
    Query,
    QueryDataset,
    ScoreStructure,
)

__all__ = [
    "btl_win_probability",
    "btl_pair_sampler",
    "limiting_score",
    "cascade_session_sampler",
    "power_law_query_sampler",
    "synthetic_ranking_problem",
    "letor_parse",
    "letor_serialize",
    "FiniteJudgmentLaw",
    "MultinomialPreferenceGenerator",
]


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def btl_win_probability(r_i: float, r_j: float) -> float:
    """P(i beats j) = exp(r_i - r_j) / (1 + exp(r_i - r_j))."""
    gap = r_i - r_j
    if gap >= 0:
        return 1.0 / (1.0 + math.exp(-gap))
    e = math.exp(gap)
    return e / (1.0 + e)


def btl_pair_sampler(
    relevances, n_pairs: int, seed: Union[int, np.random.Generator]
) -> List[ComparisonPreference]:
    """Sample ordered comparisons: a uniform unordered pair, oriented by the
    logistic choice model on the relevance gap."""
    r = np.asarray(relevances, dtype=float)
    m = r.size
    if m < 2:
        raise ValueError("need at least two items")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pairs = np.array([(i, j) for i in range(m) for j in range(i + 1, m)])
    choice = rng.integers(0, len(pairs), size=n_pairs)
    i = pairs[choice, 0]
    j = pairs[choice, 1]
    gaps = r[i] - r[j]
    p_i_wins = np.empty(n_pairs)
    pos = gaps >= 0
    p_i_wins[pos] = 1.0 / (1.0 + np.exp(-gaps[pos]))
    e = np.exp(gaps[~pos])
    p_i_wins[~pos] = e / (1.0 + e)
    i_wins = rng.random(n_pairs) < p_i_wins
    return [
        ComparisonPreference(int(i[t]), int(j[t]))
        if i_wins[t]
        else ComparisonPreference(int(j[t]), int(i[t]))
        for t in range(n_pairs)
    ]


def limiting_score(relevances) -> ScoreStructure:
    """Large-sample limit of the average empirical log-odds score under the
    logistic choice model.

    Computed through the guarded softplus difference
    ``log(1+e^{r_i-r_j}) - log(1+e^{r_j-r_i})``; analytically each term
    collapses to ``r_i - r_j``, which the tests exploit as an independent
    identity check.
    """
    r = np.asarray(relevances, dtype=float)
    m = r.size
    if m < 2:
        raise ValueError("need at least two items")
    gaps = r[:, None] - r[None, :]
    terms = _softplus(gaps) - _softplus(-gaps)
    np.fill_diagonal(terms, 0.0)
    return ScoreStructure(terms.sum(axis=1) / (m - 1))


def cascade_session_sampler(
    p,
    presented: Sequence[int],
    n_sessions: int,
    seed: Union[int, np.random.Generator],
) -> List[ClickRecord]:
    """Simulate cascade sessions: scan the presented list in order, click a
    position with the item's satisfaction probability, stop at the first
    click; no click is recorded as position len(presented) + 1."""
    probs = np.asarray(p, dtype=float)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("satisfaction probabilities must lie in [0, 1]")
    pres = tuple(int(i) for i in presented)
    if any(i >= probs.size for i in pres):
        raise ValueError("presented item outside probability vector")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    slate_p = probs[list(pres)]
    hits = rng.random((n_sessions, len(pres))) < slate_p[None, :]
    any_hit = hits.any(axis=1)
    first = np.where(any_hit, hits.argmax(axis=1) + 1, len(pres) + 1)
    return [ClickRecord(pres, int(c)) for c in first]


def power_law_query_sampler(
    beta: float, num_queries: int, n_draws: int, seed: Union[int, np.random.Generator]
) -> List[int]:
    """Multinomial draws of query ids 1..Q with p_q proportional to
    q^(-beta-1)."""
    if num_queries < 1:
        raise ValueError("need at least one query")
    if beta <= 0:
        raise ValueError("beta must be positive")
    q = np.arange(1, num_queries + 1, dtype=float)
    probs = q ** (-beta - 1.0)
    probs /= probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [int(x) + 1 for x in rng.choice(num_queries, size=n_draws, p=probs)]


def synthetic_ranking_problem(
    m: int,
    d: int,
    num_queries: int,
    noise_sd: float = 0.0,
    seed: Union[int, np.random.Generator] = 0,
    theta_scale: float = 1.0,
) -> Tuple[QueryDataset, np.ndarray]:
    """Random linear ranking problem: Gaussian features, true relevances
    ``<theta*, x_i>`` plus optional Gaussian noise.  No judgments attached;
    pair or click samplers add those."""
    if d < 1:
        raise ValueError("need at least one feature")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta_star = rng.normal(size=d) * theta_scale / math.sqrt(d)
    queries = []
    for qid in range(1, num_queries + 1):
        feats = rng.normal(size=(m, d))
        rel = feats @ theta_star
        if noise_sd > 0:
            rel = rel + noise_sd * rng.normal(size=m)
        queries.append(Query(qid, feats, (), rel))
    return QueryDataset(tuple(queries)), theta_star


class LetorParseError(ValueError):
    """Malformed LETOR input; message carries the 1-based line number."""


def letor_parse(source: Union[str, IO[str], Iterable[str]]) -> QueryDataset:
    """Parse LETOR/SVMlight-with-qid text into a dataset.

    Lines look like ``2 qid:17 1:0.5 3:1.0 # comment``; feature ids are
    1-based and densified to the maximum id seen anywhere in the input, with
    missing ids zero-filled.  Queries keep first-appearance order.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]

    per_query: dict = {}
    order: List[int] = []
    max_fid = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 2 or not tokens[1].startswith("qid:"):
            raise LetorParseError(f"line {lineno}: expected '<rel> qid:<id> ...'")
        try:
            rel = float(tokens[0])
        except ValueError:
            raise LetorParseError(f"line {lineno}: non-numeric relevance {tokens[0]!r}") from None
        try:
            qid = int(tokens[1][4:])
        except ValueError:
            raise LetorParseError(f"line {lineno}: non-integer qid {tokens[1][4:]!r}") from None
        feats = {}
        for tok in tokens[2:]:
            fid_str, _, val_str = tok.partition(":")
            if not _:
                raise LetorParseError(f"line {lineno}: malformed feature token {tok!r}")
            try:
                fid = int(fid_str)
                val = float(val_str)
            except ValueError:
                raise LetorParseError(f"line {lineno}: non-numeric feature token {tok!r}") from None
            if fid < 1:
                raise LetorParseError(f"line {lineno}: feature ids are 1-based, got {fid}")
            if fid in feats:
                raise LetorParseError(f"line {lineno}: duplicate feature id {fid}")
            feats[fid] = val
            max_fid = max(max_fid, fid)
        if qid not in per_query:
            per_query[qid] = []
            order.append(qid)
        per_query[qid].append((rel, feats))

    queries = []
    for qid in order:
        rows = per_query[qid]
        mat = np.zeros((len(rows), max_fid))
        rels = np.empty(len(rows))
        for i, (rel, feats) in enumerate(rows):
            rels[i] = rel
            for fid, val in feats.items():
                mat[i, fid - 1] = val
        queries.append(Query(qid, mat, (), rels))
    return QueryDataset(tuple(queries))


def _fmt(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


def letor_serialize(data: QueryDataset, stream: Optional[IO[str]] = None) -> Optional[str]:
    """Write a dataset in LETOR format with explicit ids for every feature
    (zeros included, so the feature dimension round-trips exactly).
    Relevances must be present on every query."""
    out = []
    for q in data:
        if q.relevances is None:
            raise ValueError(f"query {q.query_id} has no relevances to serialize")
        for i in range(q.m):
            feats = " ".join(f"{j + 1}:{_fmt(q.features[i, j])}" for j in range(q.d))
            out.append(f"{_fmt(q.relevances[i])} qid:{q.query_id} {feats}")
    text = "\n".join(out) + ("\n" if out else "")
    if stream is None:
        return text
    stream.write(text)
    return None


@dataclass(frozen=True)
class FiniteJudgmentLaw:
    """A finite distribution over preference judgments for one query."""

    judgments: tuple
    probabilities: tuple

    def __post_init__(self):
        if len(self.judgments) != len(self.probabilities) or not self.judgments:
            raise ValueError("need matching nonempty judgments and probabilities")
        if abs(sum(self.probabilities) - 1.0) > 1e-12 or min(self.probabilities) < 0:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    def sample(self, rng: np.random.Generator):
        idx = rng.choice(len(self.judgments), p=np.asarray(self.probabilities))
        return self.judgments[int(idx)]


@dataclass(frozen=True)
class MultinomialPreferenceGenerator:
    """i.i.d. dataset generator over a fixed finite query population.

    Each of ``n`` draws picks a query by ``query_probs`` and then one
    judgment from that query's finite law; the result is a dataset whose
    per-query batch sizes are multinomial.
    """

    base: QueryDataset
    query_probs: tuple
    judgment_laws: tuple
    n: int

    def __post_init__(self):
        if len(self.base) != len(self.query_probs) or len(self.base) != len(self.judgment_laws):
            raise ValueError("need one probability and one judgment law per query")
        if abs(sum(self.query_probs) - 1.0) > 1e-12 or min(self.query_probs) < 0:
            raise ValueError("query probabilities must be nonnegative and sum to 1")
        if self.n < 1:
            raise ValueError("need at least one draw")

    def sample_dataset(self, rng: np.random.Generator) -> QueryDataset:
        assignments = rng.choice(len(self.base), size=self.n, p=np.asarray(self.query_probs))
        per_query: List[list] = [[] for _ in self.base.queries]
        for q_idx in assignments:
            per_query[int(q_idx)].append(self.judgment_laws[int(q_idx)].sample(rng))
        return self.base.with_judgments(per_query)
