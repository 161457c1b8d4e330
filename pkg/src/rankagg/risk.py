"""Conditional risks, the subset-averaged (U-statistic) empirical risk, its
Monte Carlo population counterpart, and brute-force conditional minimizers.

The empirical risk averages a surrogate over all k-subsets of each query's
judgment batch, weighting queries by their empirical frequency.  Exact
enumeration is used while the subset count stays under a cap; beyond it a
seeded uniform sample of subsets substitutes.  Batches smaller than k fall
back to a single term over the whole batch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np

from .core import LimitLaw, LinearScorer, QueryDataset

__all__ = [
    "UStatConfig",
    "conditional_risk",
    "u_statistic_empirical_risk",
    "population_u_risk_mc",
    "bayes_conditional_minimizers",
    "suboptimality_H",
    "SuboptimalityWitness",
    "representative_scores",
    "all_orderings",
]

BRUTE_FORCE_MAX_ITEMS = 7
ARGMIN_TOL = 1e-12


@dataclass(frozen=True)
class UStatConfig:
    """Evaluation policy for the subset-averaged risk.

    ``k`` is the aggregation order; when a query batch has more than
    ``enumeration_cap`` k-subsets, ``mc_samples`` uniform subsets (from
    ``seed``) estimate the inner average instead.
    """

    k: int
    enumeration_cap: int = 10_000
    mc_samples: int = 2_000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("aggregation order k must be >= 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")


def conditional_risk(alpha, law: LimitLaw, loss) -> float:
    """Expected loss of ``alpha`` under a finite-support structure law."""
    return float(
        sum(p * loss(alpha, s) for p, s in zip(law.probabilities, law.support))
    )


def _mean_over_subsets(
    alpha, judgments: Sequence, cfg: UStatConfig, surrogate, structure_fn, rng
) -> float:
    n_q = len(judgments)
    if n_q <= cfg.k:
        return float(surrogate(alpha, structure_fn(list(judgments))))
    n_subsets = math.comb(n_q, cfg.k)
    if n_subsets <= cfg.enumeration_cap:
        total = 0.0
        for subset in itertools.combinations(range(n_q), cfg.k):
            total += surrogate(alpha, structure_fn([judgments[i] for i in subset]))
        return total / n_subsets
    total = 0.0
    for _ in range(cfg.mc_samples):
        idx = rng.choice(n_q, size=cfg.k, replace=False)
        idx.sort()
        total += surrogate(alpha, structure_fn([judgments[i] for i in idx]))
    return total / cfg.mc_samples


def u_statistic_empirical_risk(
    scorer: LinearScorer,
    data: QueryDataset,
    cfg: UStatConfig,
    surrogate,
    structure_fn: Callable[[list], object],
) -> float:
    """Subset-averaged empirical surrogate risk of a linear scorer.

    ``(1/n) sum_q n_q * mean over k-subsets S of B(q) of
    surrogate(f(q), structure_fn(S))``; queries with fewer than k judgments
    contribute a single whole-batch term.  Deterministic given ``cfg.seed``
    (queries are processed in stored order).
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    n = data.total_judgments
    if n == 0:
        raise ValueError("dataset has no judgments")
    rng = np.random.default_rng(cfg.seed)
    total = 0.0
    for query in data:
        n_q = len(query.judgments)
        if n_q == 0:
            continue
        alpha = scorer.scores(query.features)
        mean_term = _mean_over_subsets(alpha, query.judgments, cfg, surrogate, structure_fn, rng)
        total += n_q * mean_term
    return total / n


def population_u_risk_mc(
    scorer: LinearScorer,
    generator,
    k: int,
    surrogate,
    structure_fn,
    reps: int,
    seed: int = 0,
    enumeration_cap: int = 10_000,
    mc_samples: int = 2_000,
) -> Tuple[float, float]:
    """Monte Carlo estimate (mean, stderr) of the expected empirical risk.

    ``generator.sample_dataset(rng)`` must produce one i.i.d. dataset per
    call; each replicate evaluates the empirical risk on a fresh dataset,
    so the mean estimates the population quantity the empirical risk is
    unbiased for.
    """
    if reps < 2:
        raise ValueError("need at least two replicates for a standard error")
    rng = np.random.default_rng(seed)
    values = np.empty(reps)
    for r in range(reps):
        data = generator.sample_dataset(rng)
        cfg = UStatConfig(
            k=k,
            enumeration_cap=enumeration_cap,
            mc_samples=mc_samples,
            seed=int(rng.integers(0, 2**63 - 1)),
        )
        values[r] = u_statistic_empirical_risk(scorer, data, cfg, surrogate, structure_fn)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(reps))
    return mean, stderr


def all_orderings(m: int):
    """All strict orderings of m items, best-first tuples."""
    return itertools.permutations(range(m))


def representative_scores(ordering: Sequence[int]) -> np.ndarray:
    """Score vector (m, m-1, ..., 1) realizing the given best-first ordering."""
    m = len(ordering)
    alpha = np.empty(m)
    for rank_pos, item in enumerate(ordering):
        alpha[item] = float(m - rank_pos)
    return alpha


def bayes_conditional_minimizers(
    law: LimitLaw, loss, m: int | None = None
) -> Tuple[float, List[Tuple[int, ...]]]:
    """Exact minimum conditional risk over strict orderings, by brute force.

    The loss must declare ``ordering_only = True`` (its value depends on the
    scores only through the induced ordering), so evaluating one
    representative score vector per permutation is exhaustive.  Returns the
    minimal risk and every ordering attaining it (ties within 1e-12).
    """
    if m is None:
        m = law.m
    if m > BRUTE_FORCE_MAX_ITEMS:
        raise ValueError(f"brute force cap: m={m} > {BRUTE_FORCE_MAX_ITEMS}")
    if m != law.m:
        raise ValueError(f"law item count {law.m} != requested m {m}")
    if not getattr(loss, "ordering_only", False):
        raise ValueError("loss must declare ordering_only=True for brute force")
    evaluated = [
        (conditional_risk(representative_scores(o), law, loss), o)
        for o in all_orderings(m)
    ]
    best = min(r for r, _ in evaluated)
    argmin = [o for r, o in evaluated if r <= best + ARGMIN_TOL]
    return best, argmin


@dataclass(frozen=True)
class SuboptimalityWitness:
    """A certificate that some target-suboptimal score vector is nearly
    surrogate-optimal.

    ``value`` is the smallest surrogate-suboptimality found among grid
    points whose target suboptimality is at least epsilon; a value near 0
    witnesses local inconsistency of the surrogate on this law.
    """

    value: float
    witness: np.ndarray
    target_gap: float
    surrogate_reference: float
    target_reference: float


def suboptimality_H(
    epsilon: float,
    law: LimitLaw,
    loss,
    surrogate,
    alpha_grid: Sequence[np.ndarray],
    refine_steps: int = 2000,
) -> SuboptimalityWitness:
    """Witness-based estimate of the surrogate suboptimality at target level
    ``epsilon``.

    The target reference is the exact brute-force minimum when the loss is
    an ordering function (and otherwise the grid minimum); the surrogate
    reference is the grid minimum improved by a short gradient-descent
    refinement from the best grid point.  The reported value upper-bounds
    the true suboptimality function at ``epsilon`` up to the accuracy of
    that reference, which is the direction needed to certify inconsistency.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = [np.asarray(a, dtype=float) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha_grid must be nonempty")

    if getattr(loss, "ordering_only", False) and law.m <= BRUTE_FORCE_MAX_ITEMS:
        target_ref, _ = bayes_conditional_minimizers(law, loss)
    else:
        target_ref = min(conditional_risk(a, law, loss) for a in grid)

    surr_values = [conditional_risk(a, law, surrogate) for a in grid]
    surr_ref = min(surr_values)
    best_idx = int(np.argmin(surr_values))
    surr_ref = min(surr_ref, _refine_surrogate_min(grid[best_idx], law, surrogate, refine_steps))

    qualifying = [
        (sv, a)
        for sv, a in zip(surr_values, grid)
        if conditional_risk(a, law, loss) - target_ref >= epsilon
    ]
    if not qualifying:
        raise ValueError("epsilon too large for instance: no grid point qualifies")
    gaps = [(sv - surr_ref, a) for sv, a in qualifying]
    value, witness = min(gaps, key=lambda t: t[0])
    return SuboptimalityWitness(
        value=max(float(value), 0.0),
        witness=witness,
        target_gap=conditional_risk(witness, law, loss) - target_ref,
        surrogate_reference=float(surr_ref),
        target_reference=float(target_ref),
    )


def _refine_surrogate_min(alpha0: np.ndarray, law: LimitLaw, surrogate, steps: int) -> float:
    """Plain diminishing-step subgradient descent on the conditional
    surrogate risk, used only to tighten the reference minimum."""
    a = np.array(alpha0, dtype=float)
    best = conditional_risk(a, law, surrogate)
    scale = max(1.0, float(np.max(np.abs(a))))
    for t in range(1, steps + 1):
        grad = np.zeros_like(a)
        for p, s in zip(law.probabilities, law.support):
            _, g = surrogate.value_and_grad(a, s)
            grad += p * g
        gnorm = np.linalg.norm(grad)
        if gnorm == 0:
            break
        a = a - (scale / math.sqrt(t)) * grad / gnorm
        a = a - a.mean()
        val = conditional_risk(a, law, surrogate)
        if val < best:
            best = val
    return best
