"""Pairwise logistic LambdaRank loss with NDCG and value-gap pair weights.

Gains follow the ground-truth rank: the item ranked ``r`` of ``D`` gets gain
exponent ``D - r``, so the best item contributes ``2**(D-1) - 1``.  Keep
``D`` around 30 or below; gains grow exponentially.  Discounts use log base 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

ValueDelta = Callable[[np.ndarray, np.ndarray], np.ndarray]


def abs_value_gap(vi: np.ndarray, vj: np.ndarray) -> np.ndarray:
    return np.abs(vi - vj)


@dataclass(frozen=True, eq=False)
class RankedRequest:
    ad_ids: np.ndarray
    scores: np.ndarray
    true_rank: np.ndarray  # permutation of 1..D, 1 = best
    values: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ad_ids, dtype=np.int64)
        s = np.asarray(self.scores, dtype=np.float64)
        r = np.asarray(self.true_rank, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        d = s.size
        if not (ids.shape == s.shape == r.shape == v.shape == (d,)):
            raise ValueError("request fields must be 1-D and of equal length")
        if d < 2:
            raise ValueError(f"a request needs at least 2 items, got {d}")
        if not np.array_equal(np.sort(r), np.arange(1, d + 1)):
            raise ValueError("true ranks must be a permutation of 1..D")
        if np.any(v < 0):
            raise ValueError("values must be non-negative")
        for name, arr in (("ad_ids", ids), ("scores", s), ("true_rank", r), ("values", v)):
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.scores.size

    def with_scores(self, scores) -> "RankedRequest":
        return RankedRequest(self.ad_ids, scores, self.true_rank, self.values)

    @property
    def gain_exponents(self) -> np.ndarray:
        return len(self) - self.true_rank

    def model_order(self) -> np.ndarray:
        """Item indices sorted by score, best first; ties keep input order."""
        return np.argsort(-self.scores, kind="stable")

    def model_positions(self) -> np.ndarray:
        """1-based position of each item in the model's ranking."""
        pos = np.empty(len(self), dtype=np.int64)
        pos[self.model_order()] = np.arange(1, len(self) + 1)
        return pos


@dataclass(frozen=True)
class LossConfig:
    combine_op: str = "multiply"
    use_value: bool = True
    value_delta: Optional[ValueDelta] = field(default=None, compare=False)
    log_base: int = 2

    def __post_init__(self):
        if self.combine_op not in ("multiply", "add"):
            raise ValueError(f"combine_op must be 'multiply' or 'add', got {self.combine_op!r}")
        if self.log_base != 2:
            raise ValueError("only log base 2 is supported")


def _discount(positions) -> np.ndarray:
    return 1.0 / np.log2(np.asarray(positions, dtype=np.float64) + 1.0)


def dcg(gain_exponents: Sequence[float]) -> float:
    """``sum_i (2**p_i - 1) / log2(i + 1)`` over 1-based positions ``i``."""
    p = np.asarray(gain_exponents, dtype=np.float64)
    if p.size == 0:
        raise ValueError("dcg needs at least one position")
    return float(np.sum((np.exp2(p) - 1.0) * _discount(np.arange(1, p.size + 1))))


def max_dcg(request: RankedRequest) -> float:
    return dcg(np.sort(request.gain_exponents)[::-1])


def ndcg(request: RankedRequest) -> float:
    best = max_dcg(request)
    if best == 0.0:
        return 1.0
    return dcg(request.gain_exponents[request.model_order()]) / best


def delta_ndcg(request: RankedRequest, i: int, j: int) -> float:
    """NDCG change from swapping the items at 1-based model positions ``i`` and ``j``."""
    d = len(request)
    if i == j:
        raise ValueError("positions must differ")
    if not (1 <= i <= d and 1 <= j <= d):
        raise ValueError(f"positions must be in [1, {d}]")
    best = max_dcg(request)
    if best == 0.0:
        return 0.0
    gains = request.gain_exponents[request.model_order()]
    swapped = gains.copy()
    swapped[i - 1], swapped[j - 1] = gains[j - 1], gains[i - 1]
    return abs(dcg(gains) - dcg(swapped)) / best


def pair_delta_ndcg(request: RankedRequest) -> np.ndarray:
    """``|dNDCG|`` for swapping every item pair, indexed by item (not position)."""
    best = max_dcg(request)
    if best == 0.0:
        return np.zeros((len(request), len(request)))
    gain = np.exp2(request.gain_exponents.astype(np.float64)) - 1.0
    disc = _discount(request.model_positions())
    return np.abs(np.subtract.outer(gain, gain) * np.subtract.outer(disc, disc)) / best


def pair_weights(request: RankedRequest, cfg: LossConfig) -> np.ndarray:
    w = pair_delta_ndcg(request)
    if not cfg.use_value:
        return w
    delta = cfg.value_delta or abs_value_gap
    v = request.values
    dv = np.abs(np.asarray(delta(v[:, None], v[None, :]), dtype=np.float64))
    return w * dv if cfg.combine_op == "multiply" else w + dv


def lambdarank_loss(
    request: RankedRequest, cfg: LossConfig = LossConfig()
) -> Tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the model scores.

    Pairs are every ``(i, j)`` where ``i`` outranks ``j`` in the ground truth.
    Pair weights are held fixed when differentiating, as LambdaRank does.
    """
    weights = pair_weights(request, cfg)
    r = request.true_rank
    i_idx, j_idx = np.nonzero(r[:, None] < r[None, :])
    w = weights[i_idx, j_idx]
    margin = request.scores[i_idx] - request.scores[j_idx]
    loss = float(np.sum(np.logaddexp(0.0, -margin) * w))
    # d/d margin of log(1 + e^-margin) = -sigmoid(-margin)
    pull = np.exp(-np.logaddexp(0.0, margin)) * w
    grad = np.zeros(len(request))
    np.subtract.at(grad, i_idx, pull)
    np.add.at(grad, j_idx, pull)
    return loss, grad


def finite_difference_grad(
    request: RankedRequest, cfg: LossConfig = LossConfig(), step: float = 1e-5
) -> np.ndarray:
    """Central differences of :func:`lambdarank_loss` in each score."""
    grad = np.empty(len(request))
    base = request.scores
    for k in range(len(request)):
        up = base.copy()
        down = base.copy()
        up[k] += step
        down[k] -= step
        grad[k] = (
            lambdarank_loss(request.with_scores(up), cfg)[0]
            - lambdarank_loss(request.with_scores(down), cfg)[0]
        ) / (2 * step)
    return grad


def grad_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)
