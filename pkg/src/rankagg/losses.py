"""Target ranking losses and convex surrogate losses.

Target losses map (score vector, structure) to [0, 1]-ish penalties and are
generally discontinuous in the scores; surrogates are convex in the scores
and report subgradients so they can drive stochastic optimization.

Loss objects are immutable and carry no state between calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import AdjacencyPreference, ComparisonPreference, ScoreStructure, rank_permutation

__all__ = [
    "GainFunction",
    "DiscountFunction",
    "ConvexPhi",
    "PairwiseEdgeLoss",
    "NDCGLoss",
    "ERRLoss",
    "ndcg_normalizer",
    "PairwisePhiSurrogate",
    "MarginSurrogate",
    "DifferenceSurrogate",
    "RegressionSurrogate",
    "BTLLogisticSurrogate",
    "ZhangSurrogate",
]


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}), stable for large |x|
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class GainFunction:
    """Monotone map from structure scores to gains.

    Kinds: ``exp2minus1`` (2^s - 1), ``exp2`` (2^s, strictly positive, handy
    for zero-centered scores), ``identity``, ``clamped01`` (clip of
    (2^s - 1) / 2^s_max into [0, 1]), and ``custom`` (caller-supplied
    nondecreasing callable or lookup table).
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, s) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)

    @classmethod
    def exp2_minus_one(cls) -> "GainFunction":
        return cls("exp2minus1", lambda s: np.exp2(s) - 1.0)

    @classmethod
    def exp2(cls) -> "GainFunction":
        return cls("exp2", np.exp2)

    @classmethod
    def identity(cls) -> "GainFunction":
        return cls("identity", lambda s: s)

    @classmethod
    def clamped01(cls, s_max: float = 4.0) -> "GainFunction":
        denom = 2.0 ** s_max
        return cls("clamped01", lambda s: np.clip((np.exp2(s) - 1.0) / denom, 0.0, 1.0))

    @classmethod
    def custom(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "GainFunction":
        return cls("custom", fn)

    @classmethod
    def from_table(cls, table: dict) -> "GainFunction":
        """Lookup-table gain over discrete grades; must be nondecreasing."""
        keys = sorted(table)
        vals = [table[k] for k in keys]
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("gain table must be nondecreasing in the grade")
        mapping = {float(k): float(v) for k, v in table.items()}

        def lookup(s):
            flat = np.atleast_1d(s)
            out = np.array([mapping[float(v)] for v in flat], dtype=float)
            return out if np.ndim(s) else out[0]

        return cls("custom", lookup)

    @classmethod
    def by_name(cls, name: str, s_max: float = 4.0) -> "GainFunction":
        factories = {
            "exp2minus1": cls.exp2_minus_one,
            "exp2": cls.exp2,
            "identity": cls.identity,
            "clamped01": lambda: cls.clamped01(s_max),
        }
        if name not in factories:
            raise ValueError(f"unknown gain {name!r}; choose from {sorted(factories)}")
        return factories[name]()


@dataclass(frozen=True)
class DiscountFunction:
    """Increasing rank-discount function F over 1-based ranks.

    ``inverse(ranks)`` returns 1/F with 0 wherever F is infinite (the
    precision-at-k cutoff).
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, ranks) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(ranks, dtype=float)), dtype=float)

    def inverse(self, ranks) -> np.ndarray:
        vals = self(ranks)
        out = np.zeros_like(vals)
        finite = np.isfinite(vals)
        out[finite] = 1.0 / vals[finite]
        return out

    @classmethod
    def log1p(cls) -> "DiscountFunction":
        return cls("log1p", lambda j: np.log1p(j))

    @classmethod
    def identity(cls) -> "DiscountFunction":
        return cls("identity", lambda j: j)

    @classmethod
    def precision_at_k(cls, k: int) -> "DiscountFunction":
        if k < 1:
            raise ValueError("cutoff k must be >= 1")
        return cls(f"precision_at_{k}", lambda j: np.where(j <= k, 1.0, np.inf))

    @classmethod
    def by_name(cls, name: str, k: int = 10) -> "DiscountFunction":
        if name == "log1p":
            return cls.log1p()
        if name == "identity":
            return cls.identity()
        if name == "precision_at_k":
            return cls.precision_at_k(k)
        raise ValueError(f"unknown discount {name!r}")


@dataclass(frozen=True)
class ConvexPhi:
    """Convex, nonincreasing scalar penalty with a subgradient.

    ``differentiable`` is False only for the hinge (kink at t = 1); every
    kind is differentiable at 0 with derivative < 0.
    """

    kind: str
    value_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    differentiable: bool = True

    def value(self, t) -> np.ndarray:
        return np.asarray(self.value_fn(np.asarray(t, dtype=float)), dtype=float)

    def subgradient(self, t) -> np.ndarray:
        return np.asarray(self.grad_fn(np.asarray(t, dtype=float)), dtype=float)

    def __call__(self, t) -> np.ndarray:
        return self.value(t)

    @classmethod
    def hinge(cls) -> "ConvexPhi":
        return cls(
            "hinge",
            lambda t: np.maximum(1.0 - t, 0.0),
            lambda t: np.where(t < 1.0, -1.0, 0.0),
            differentiable=False,
        )

    @classmethod
    def logistic(cls) -> "ConvexPhi":
        return cls("logistic", lambda t: _softplus(-t), lambda t: -_sigmoid(-t))

    @classmethod
    def exponential(cls) -> "ConvexPhi":
        # exponent clipped to keep values finite on wild iterates
        return cls(
            "exponential",
            lambda t: np.exp(np.minimum(-t, 700.0)),
            lambda t: -np.exp(np.minimum(-t, 700.0)),
        )

    @classmethod
    def squared_hinge(cls) -> "ConvexPhi":
        return cls(
            "squared",
            lambda t: np.maximum(1.0 - t, 0.0) ** 2,
            lambda t: -2.0 * np.maximum(1.0 - t, 0.0),
        )

    @classmethod
    def by_name(cls, name: str) -> "ConvexPhi":
        factories = {
            "hinge": cls.hinge,
            "logistic": cls.logistic,
            "exponential": cls.exponential,
            "squared": cls.squared_hinge,
        }
        if name not in factories:
            raise ValueError(f"unknown phi {name!r}; choose from {sorted(factories)}")
        return factories[name]()


def _scores_of(structure) -> np.ndarray:
    if isinstance(structure, ScoreStructure):
        return structure.scores
    return np.asarray(structure, dtype=float)


def ndcg_normalizer(gains: np.ndarray, discount: DiscountFunction) -> float:
    """Best achievable discounted gain sum: sort gains descending and pair
    them with ranks 1, 2, ... (rearrangement inequality, valid for any
    increasing discount)."""
    g = np.sort(np.asarray(gains, dtype=float))[::-1]
    inv = discount.inverse(np.arange(1, g.size + 1))
    return float(g @ inv)


@dataclass(frozen=True)
class PairwiseEdgeLoss:
    """Per-pair misordering penalty against a weighted adjacency structure.

    Charges ``Y_ij`` when the scores fail to put i above j; the tie case is
    charged only once, on the lower-index direction.  Among strict score
    vectors the value depends only on the induced ordering, and no tied
    vector beats every strict one, so brute force over strict orderings
    recovers the exact minimum.
    """

    ordering_only = True

    def __call__(self, alpha, structure) -> float:
        y = structure.weights if isinstance(structure, AdjacencyPreference) else np.asarray(structure, float)
        a = np.asarray(alpha, dtype=float)
        if a.size != y.shape[0]:
            raise ValueError(f"scores length {a.size} != item count {y.shape[0]}")
        diffs = a[:, None] - a[None, :]
        upper = np.triu(np.ones_like(y, dtype=bool), 1)
        lower = np.tril(np.ones_like(y, dtype=bool), -1)
        loss = y[upper & (diffs <= 0)].sum() + y[lower & (diffs < 0)].sum()
        return float(loss)


@dataclass(frozen=True)
class NDCGLoss:
    """Normalized discounted cumulative gain loss: 1 - DCG(alpha) / ideal DCG.

    Gains must be nonnegative (this is what keeps the loss inside [0, 1]);
    all-zero gains define the loss as 0, since no ordering is better than
    any other.  Depends on the scores only through their rank permutation.
    """

    gain: GainFunction
    discount: DiscountFunction

    ordering_only = True

    def __call__(self, alpha, structure) -> float:
        s = _scores_of(structure)
        gains = self.gain(s)
        if not np.all(np.isfinite(gains)):
            raise ValueError("gains must be finite")
        if np.any(gains < 0):
            raise ValueError("NDCG gains must be nonnegative")
        if np.all(gains == 0):
            return 0.0
        z = ndcg_normalizer(gains, self.discount)
        if z <= 0:
            raise ValueError("degenerate gains: nonpositive normalizer")
        ranks = rank_permutation(alpha)
        if ranks.size != gains.size:
            raise ValueError("scores and structure disagree on item count")
        achieved = float(gains @ self.discount.inverse(ranks))
        return 1.0 - achieved / z


@dataclass(frozen=True)
class ERRLoss:
    """Expected-reciprocal-rank style cascade loss.

    The gain of each item is its standalone satisfaction probability, so
    gains must land in [0, 1]; the discount must satisfy F(1) >= 1 to keep
    the loss in [0, 1].  Depends on the scores only through their ranking.
    """

    gain: GainFunction
    discount: DiscountFunction

    ordering_only = True

    def __post_init__(self):
        if float(self.discount(np.array([1.0]))[0]) < 1.0:
            raise ValueError("ERR needs a discount with F(1) >= 1")

    def __call__(self, alpha, structure) -> float:
        s = _scores_of(structure)
        probs = self.gain(s)
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("ERR gains must lie in [0, 1]")
        ranks = rank_permutation(alpha)
        if ranks.size != probs.size:
            raise ValueError("scores and structure disagree on item count")
        by_rank = np.empty_like(probs)
        by_rank[ranks - 1] = probs  # by_rank[r-1] = prob of item placed at rank r
        inv_f = self.discount.inverse(np.arange(1, probs.size + 1))
        survive = np.concatenate(([1.0], np.cumprod(1.0 - by_rank[:-1])))
        return 1.0 - float(np.sum(inv_f * by_rank * survive))


def _pairwise_value_grad(weights: np.ndarray, alpha: np.ndarray, phi: ConvexPhi, shifts=None):
    """Value and subgradient of ``sum w_ij phi(alpha_i - alpha_j - shift_ij)``."""
    diffs = alpha[:, None] - alpha[None, :]
    if shifts is not None:
        diffs = diffs - shifts
    np.fill_diagonal(diffs, 0.0)
    active = weights != 0
    vals = np.zeros_like(weights)
    slopes = np.zeros_like(weights)
    vals[active] = phi.value(diffs[active])
    slopes[active] = phi.subgradient(diffs[active])
    contrib = weights * slopes
    value = float((weights * vals).sum())
    grad = contrib.sum(axis=1) - contrib.sum(axis=0)
    return value, grad


def _check_alpha(alpha, m: int) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if a.shape != (m,):
        raise ValueError(f"scores must have length {m}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PairwisePhiSurrogate:
    """Edge-wise convex surrogate ``sum_ij h(Y_ij) phi(alpha_i - alpha_j)``.

    This is the classical pairwise surrogate, kept as the inconsistent
    baseline; h must vanish at 0 so absent edges cost nothing.
    """

    phi: ConvexPhi
    h: Callable[[np.ndarray], np.ndarray] = field(default=lambda y: y)

    def __post_init__(self):
        if float(np.asarray(self.h(np.zeros(1)))[0]) != 0.0:
            raise ValueError("penalty map h must satisfy h(0) = 0")

    def _weights(self, structure) -> np.ndarray:
        y = structure.weights if isinstance(structure, AdjacencyPreference) else np.asarray(structure, float)
        w = np.asarray(self.h(y), dtype=float)
        np.fill_diagonal(w, 0.0)
        return w

    def value_and_grad(self, alpha, structure):
        w = self._weights(structure)
        a = _check_alpha(alpha, w.shape[0])
        return _pairwise_value_grad(w, a, self.phi)

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]


@dataclass(frozen=True)
class MarginSurrogate:
    """Margin surrogate ``sum_{Y_ij > 0} phi(alpha_i - alpha_j - h(Y_ij))``:
    each observed edge demands separation by an edge-dependent margin.
    Second inconsistent baseline."""

    phi: ConvexPhi
    h: Callable[[np.ndarray], np.ndarray] = field(default=lambda y: y)

    def _terms(self, structure):
        y = structure.weights if isinstance(structure, AdjacencyPreference) else np.asarray(structure, float)
        present = (y > 0).astype(float)
        shifts = np.zeros_like(y)
        if present.any():
            shifts[y > 0] = np.asarray(self.h(y[y > 0]), dtype=float)
        return present, shifts

    def value_and_grad(self, alpha, structure):
        present, shifts = self._terms(structure)
        a = _check_alpha(alpha, present.shape[0])
        return _pairwise_value_grad(present, a, self.phi, shifts)

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]


@dataclass(frozen=True)
class DifferenceSurrogate:
    """Aggregate-difference surrogate ``sum_ij [s_ij - s_ji]_+ phi(alpha_i - alpha_j)``.

    The coefficient on a pair is nonzero in at most one direction, which is
    what distinguishes this loss from the pairwise baseline and makes it
    order-consistent whenever the mean preference graph is acyclic.
    Requires a nonincreasing phi with negative slope at 0.
    """

    phi: ConvexPhi

    def __post_init__(self):
        if float(self.phi.subgradient(np.zeros(1))[0]) >= 0:
            raise ValueError("difference surrogate needs phi'(0) < 0")

    def _weights(self, structure) -> np.ndarray:
        y = structure.weights if isinstance(structure, AdjacencyPreference) else np.asarray(structure, float)
        return np.maximum(y - y.T, 0.0)

    def value_and_grad(self, alpha, structure):
        w = self._weights(structure)
        a = _check_alpha(alpha, w.shape[0])
        return _pairwise_value_grad(w, a, self.phi)

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]


@dataclass(frozen=True)
class RegressionSurrogate:
    """Least-squares surrogate with normalized-gain regression targets:
    ``(1/2m) sum_j (alpha_j - G(s_j)/Z(s))^2``, with Z the ideal discounted
    gain sum of the structure.  Consistent for the NDCG family because its
    minimizer reproduces the normalized gains exactly."""

    gain: GainFunction
    discount: DiscountFunction = field(default_factory=DiscountFunction.log1p)

    def labels(self, structure) -> np.ndarray:
        s = _scores_of(structure)
        gains = self.gain(s)
        z = ndcg_normalizer(gains, self.discount)
        if z <= 0:
            raise ValueError("degenerate gains")
        return gains / z

    def value_and_grad(self, alpha, structure):
        y = self.labels(structure)
        a = _check_alpha(alpha, y.size)
        resid = a - y
        m = y.size
        return float(resid @ resid) / (2 * m), resid / m

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]


@dataclass(frozen=True)
class BTLLogisticSurrogate:
    """Pairwise logistic loss ``log(1 + exp(alpha_loser - alpha_winner))``
    on a single ordered comparison; overflow-guarded."""

    def value_and_grad(self, alpha, structure):
        if not isinstance(structure, ComparisonPreference):
            raise TypeError("logistic surrogate consumes a single comparison")
        a = np.asarray(alpha, dtype=float)
        i, j = structure.winner, structure.loser
        if max(i, j) >= a.size:
            raise ValueError("comparison references an item beyond the score vector")
        gap = a[j] - a[i]
        value = float(_softplus(np.array([gap]))[0])
        sig = float(_sigmoid(np.array([gap]))[0])
        grad = np.zeros_like(a)
        grad[j] = sig
        grad[i] = -sig
        return value, grad

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]


@dataclass(frozen=True)
class ZhangSurrogate:
    """Gain-weighted one-vs-all surrogate
    ``sum_j (G(s_j)/Z) sum_l phi(alpha_l - alpha_j)``.

    With a rank discount, Z is the ideal discounted gain sum (the NDCG
    normalizer); without one, Z = 1, matching the cascade-loss variant.
    Consistent for order-preservation when phi is nonincreasing,
    differentiable, and has phi'(0) < 0.
    """

    gain: GainFunction
    phi: ConvexPhi
    discount: Optional[DiscountFunction] = None

    def __post_init__(self):
        if not self.phi.differentiable:
            raise ValueError("this surrogate needs a differentiable phi")
        if float(self.phi.subgradient(np.zeros(1))[0]) >= 0:
            raise ValueError("this surrogate needs phi'(0) < 0")

    def _coeffs(self, structure) -> np.ndarray:
        gains = self.gain(_scores_of(structure))
        if self.discount is None:
            return gains
        z = ndcg_normalizer(gains, self.discount)
        if z <= 0:
            raise ValueError("degenerate gains")
        return gains / z

    def value_and_grad(self, alpha, structure):
        c = self._coeffs(structure)
        a = _check_alpha(alpha, c.size)
        diffs = a[:, None] - a[None, :]  # diffs[l, j] = alpha_l - alpha_j
        vals = self.phi.value(diffs)
        slopes = self.phi.subgradient(diffs)
        value = float((vals * c[None, :]).sum())
        # d/da_x: sum_j c_j phi'(a_x - a_j) - c_x sum_l phi'(a_l - a_x)
        grad = (slopes * c[None, :]).sum(axis=1) - c * slopes.sum(axis=0)
        return value, grad

    def __call__(self, alpha, structure) -> float:
        return self.value_and_grad(alpha, structure)[0]
