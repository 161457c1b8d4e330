"""Composite proximal stochastic gradient descent on the subset-averaged
empirical risk.

Each iteration samples a query proportionally to its judgment count, then a
uniform k-subset of its batch, aggregates the subset into a structure, and
takes a proximal step.  With the ridge penalty (lambda/2)||theta||^2 the
proximal update has the closed form ``theta <- (theta - eta * g) / (1 + eta
* lambda)``; with lambda = 0 it is plain SGD.  The loop is sequential by
construction; run independent seeds in parallel instead.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .core import LinearScorer, QueryDataset
from .risk import UStatConfig

__all__ = [
    "StepSchedule",
    "TrainReport",
    "prox_sgd_train",
    "sample_term",
    "NonFiniteGradientError",
]

MOVING_AVERAGE_WINDOW = 100
CHECKPOINT_EVERY = 100


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step sizes: c/t (strongly convex regime) or c/sqrt(t)."""

    kind: str
    c: float

    def __post_init__(self):
        if self.kind not in ("inv_t", "inv_sqrt_t"):
            raise ValueError("schedule kind must be 'inv_t' or 'inv_sqrt_t'")
        if self.c <= 0:
            raise ValueError("step scale must be positive")

    def eta(self, t: int) -> float:
        if self.kind == "inv_t":
            return self.c / t
        return self.c / math.sqrt(t)


@dataclass(frozen=True)
class TrainReport:
    """Training output: averaged and final parameters plus a loss trace.

    ``gap_trace`` holds (iteration, moving average of the last 100 sampled
    losses) pairs, one per checkpoint; the moving average is an unbiased
    estimate of an upper bound on the empirical risk along the trajectory.
    """

    theta_avg: np.ndarray
    theta_last: np.ndarray
    gap_trace: Tuple[Tuple[int, float], ...]
    iterations: int
    seed: int


class NonFiniteGradientError(RuntimeError):
    """Raised when a sampled gradient is not finite."""

    def __init__(self, iteration: int, query_id, subset):
        super().__init__(
            f"non-finite gradient at iteration {iteration} "
            f"(query {query_id}, judgment subset {subset})"
        )
        self.iteration = iteration
        self.query_id = query_id
        self.subset = subset


class _TermSampler:
    """Samples (query, k-subset) pairs: queries with probability n_q / n,
    then a uniform k-subset of the query's batch (the whole batch when it
    has fewer than k judgments)."""

    def __init__(self, data: QueryDataset, k: int):
        if len(data) == 0:
            raise ValueError("empty dataset")
        sizes = [len(q.judgments) for q in data]
        if sum(sizes) == 0:
            raise ValueError("dataset has no judgments")
        self.k = k
        # query_of_slot maps a uniform judgment slot to its query index,
        # which realizes the n_q / n marginal exactly
        self.query_of_slot = np.repeat(np.arange(len(data)), sizes)
        self.sizes = sizes

    def sample(self, rng: np.random.Generator) -> Tuple[int, Tuple[int, ...]]:
        slot = int(rng.integers(0, self.query_of_slot.size))
        q = int(self.query_of_slot[slot])
        n_q = self.sizes[q]
        if n_q <= self.k:
            return q, tuple(range(n_q))
        idx = rng.choice(n_q, size=self.k, replace=False)
        idx.sort()
        return q, tuple(int(i) for i in idx)


def sample_term(
    data: QueryDataset, cfg: UStatConfig, rng: np.random.Generator
) -> Tuple[int, Tuple[int, ...]]:
    """One draw of (query index, judgment-index subset); the marginal
    probability of each pair is (n_q / n) / C(n_q, k)."""
    return _TermSampler(data, cfg.k).sample(rng)


def prox_sgd_train(
    data: QueryDataset,
    cfg: UStatConfig,
    surrogate,
    structure_fn: Callable[[list], object],
    lam: float,
    schedule: StepSchedule,
    iterations: int,
    seed: int,
    theta0: Optional[np.ndarray] = None,
) -> TrainReport:
    """Minimize the subset-averaged surrogate risk plus (lam/2)||theta||^2.

    Deterministic given the seed.  Returns both the running average of the
    post-update iterates (the estimator of record) and the final iterate.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    sampler = _TermSampler(data, cfg.k)
    rng = np.random.default_rng(seed)
    d = data.d
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=float)
    theta_avg = np.zeros_like(theta)
    window: deque = deque(maxlen=MOVING_AVERAGE_WINDOW)
    trace: List[Tuple[int, float]] = []
    queries = data.queries

    for t in range(1, iterations + 1):
        q_idx, subset = sampler.sample(rng)
        query = queries[q_idx]
        structure = structure_fn([query.judgments[i] for i in subset])
        alpha = query.features @ theta
        value, grad_alpha = surrogate.value_and_grad(alpha, structure)
        grad = query.features.T @ grad_alpha
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(t, query.query_id, subset)
        eta = schedule.eta(t)
        theta = (theta - eta * grad) / (1.0 + eta * lam)
        theta_avg += (theta - theta_avg) / t
        window.append(value)
        if t % CHECKPOINT_EVERY == 0:
            trace.append((t, float(np.mean(window))))

    return TrainReport(
        theta_avg=theta_avg,
        theta_last=theta,
        gap_trace=tuple(trace),
        iterations=iterations,
        seed=seed,
    )
