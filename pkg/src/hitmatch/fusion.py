"""Full retrieval score: extended dual-tower inner product plus the HitMatch term."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import QueryVector, as_embedding
from .index import GroupedIndex
from .query import hitmatch_scores


def field_matrix(fields) -> np.ndarray:
    """Stack per-field embeddings into an ``(n_fields, d_f)`` array."""
    arr = np.asarray(fields, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
    if arr.ndim != 2:
        raise ValueError(f"fields must share one dimensionality, got shape {arr.shape}")
    return arr


def ipnn_project(x, W) -> np.ndarray:
    x = as_embedding(x)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != x.size:
        raise ValueError(f"projection of shape {W.shape} cannot act on length-{x.size} input")
    return W @ x


def field_sum_projection(n_fields: int, dim: int) -> np.ndarray:
    """``[I I ... I]``: maps a concatenation of ``n_fields`` embeddings to their sum."""
    return np.tile(np.eye(dim), (1, n_fields))


def pairwise_field_inner_sum(u_fields, v_fields) -> float:
    """``sum_{i,j} <u_i, v_j>`` by explicit double loop."""
    u = field_matrix(u_fields)
    v = field_matrix(v_fields)
    if len(u) == 0 or len(v) == 0:
        return 0.0
    if u.shape[1] != v.shape[1]:
        raise ValueError(f"field dims differ: {u.shape[1]} vs {v.shape[1]}")
    total = 0.0
    for ui in u:
        for vj in v:
            total += float(ui @ vj)
    return total


def extended_tower_score(h_u, u_tilde, h_a, v_tilde) -> float:
    left = np.concatenate([as_embedding(h_u), as_embedding(u_tilde)])
    right = np.concatenate([as_embedding(h_a), as_embedding(v_tilde)])
    if left.size != right.size:
        raise ValueError(f"extended towers differ in length: {left.size} vs {right.size}")
    return float(left @ right)


@dataclass(frozen=True, eq=False)
class AdTowerTable:
    """Per-ad extended embeddings ``[h_a, v~]``, one row per ad."""

    rows: np.ndarray  # (N, dim), float32 or float64

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise ValueError("tower table must be 2-D")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("tower table contains non-finite values")

    @property
    def num_ads(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AdTowerTable):
            return NotImplemented
        return self.rows.dtype == other.rows.dtype and np.array_equal(self.rows, other.rows)

    @classmethod
    def from_parts(cls, h_a, v_fields, W_v) -> "AdTowerTable":
        """Build rows ``[h_a, W_v @ concat(v_fields)]``.

        ``h_a``: ``(N, d_tower)``; ``v_fields``: ``(N, m, d_f)``; ``W_v``: ``(d_ipnn, m * d_f)``.
        """
        h_a = np.asarray(h_a, dtype=np.float64)
        v = np.asarray(v_fields, dtype=np.float64)
        flat = v.reshape(v.shape[0], -1)
        W_v = np.asarray(W_v, dtype=np.float64)
        if W_v.shape[1] != flat.shape[1]:
            raise ValueError(f"projection of shape {W_v.shape} cannot act on {flat.shape[1]} inputs")
        return cls(np.hstack([h_a, flat @ W_v.T]))


def user_tower(h_u, u_fields, W_u) -> np.ndarray:
    """``[h_u, W_u @ concat(u_fields)]``."""
    flat = field_matrix(u_fields).ravel()
    return np.concatenate([as_embedding(h_u), ipnn_project(flat, W_u)])


def tower_scores(ads: AdTowerTable, h_u_ext) -> np.ndarray:
    h = as_embedding(h_u_ext)
    if h.size != ads.dim:
        raise ValueError(f"user tower length {h.size} does not match table dim {ads.dim}")
    return ads.rows.astype(np.float64, copy=False) @ h


def fused_scores(
    ads: AdTowerTable,
    h_u_ext,
    idx: GroupedIndex,
    q: QueryVector,
    workers: int | None = None,
) -> np.ndarray:
    if ads.num_ads != idx.num_ads:
        raise ValueError(f"tower table has {ads.num_ads} ads but index has {idx.num_ads}")
    scores = hitmatch_scores(idx, q, workers=workers)
    scores += tower_scores(ads, h_u_ext)
    return scores


def top_k(scores, k: int) -> List[Tuple[int, float]]:
    """The ``k`` best ``(ad, score)`` pairs, highest first; ties go to the lower ad id."""
    scores = np.asarray(scores)
    n = scores.size
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k < n:
        # everything strictly above the k-th value is in; fill the rest by ad id
        kth = np.partition(scores, n - k)[n - k]
        above = np.flatnonzero(scores > kth)
        ties = np.flatnonzero(scores == kth)[: k - above.size]
        cand = np.concatenate([above, ties])
    else:
        cand = np.arange(n)
    order = np.lexsort((cand, -scores[cand]))
    picked = cand[order]
    return [(int(a), float(scores[a])) for a in picked]
