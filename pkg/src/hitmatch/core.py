"""Shared domain types: the binary ad/feature matrix, sparse queries, embeddings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

# ad ids are split into a 24-bit header and an 8-bit residual, so 32 bits is the ceiling
MAX_IDS = 1 << 32


class BoundsError(ValueError):
    """An id falls outside the declared matrix shape."""


@dataclass(frozen=True, eq=False)
class BinaryInteractionMatrix:
    """The N x M binary matrix L, held as a sorted, deduplicated entry list.

    ``features[k], ads[k]`` is the k-th stored pair; pairs are ordered by
    feature id, then ad id.  This is the column-major (feature-major) order
    every index and oracle in the package consumes.
    """

    num_ads: int
    num_features: int
    features: np.ndarray  # uint32
    ads: np.ndarray  # uint32

    def __len__(self) -> int:
        return int(self.features.size)

    @property
    def nnz(self) -> int:
        return len(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryInteractionMatrix):
            return NotImplemented
        return (
            self.num_ads == other.num_ads
            and self.num_features == other.num_features
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.ads, other.ads)
        )

    def entry_set(self) -> set:
        """Entries as a Python set of ``(feature, ad)`` tuples.  Small matrices only."""
        return set(zip(self.features.tolist(), self.ads.tolist()))

    def column_populations(self) -> np.ndarray:
        return np.bincount(self.features, minlength=self.num_features)

    def to_dense(self) -> np.ndarray:
        """Boolean ``(num_ads, num_features)`` array; refuses anything over 5e7 cells."""
        if self.num_ads * self.num_features > 50_000_000:
            raise MemoryError(
                f"dense view of {self.num_ads}x{self.num_features} matrix is too large"
            )
        dense = np.zeros((self.num_ads, self.num_features), dtype=bool)
        dense[self.ads, self.features] = True
        return dense


def _check_shape(n: int, m: int) -> None:
    if n < 0 or m < 0:
        raise ValueError(f"matrix shape must be non-negative, got N={n}, M={m}")
    if n > MAX_IDS or m > MAX_IDS:
        raise ValueError(f"matrix shape exceeds 32-bit ids: N={n}, M={m}")


def matrix_from_arrays(n: int, m: int, features, ads) -> BinaryInteractionMatrix:
    """Vectorised constructor: bounds-check, deduplicate and sort parallel id arrays."""
    _check_shape(n, m)
    features = np.asarray(features)
    ads = np.asarray(ads)
    if features.shape != ads.shape or features.ndim != 1:
        raise ValueError("features and ads must be 1-D arrays of equal length")
    if features.size:
        if features.dtype.kind not in "iu" or ads.dtype.kind not in "iu":
            raise TypeError("ids must be integers")
        bad = (features < 0) | (features >= m) | (ads < 0) | (ads >= n)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise BoundsError(
                f"pair (feature={int(features[k])}, ad={int(ads[k])}) "
                f"out of bounds for N={n}, M={m}"
            )
    keys = features.astype(np.uint64) * np.uint64(max(n, 1)) + ads.astype(np.uint64)
    keys = np.unique(keys)
    width = np.uint64(max(n, 1))
    return BinaryInteractionMatrix(
        num_ads=n,
        num_features=m,
        features=(keys // width).astype(np.uint32),
        ads=(keys % width).astype(np.uint32),
    )


def matrix_from_entries(
    n: int, m: int, pairs: Iterable[Tuple[int, int]]
) -> BinaryInteractionMatrix:
    """Build L from ``(feature, ad)`` pairs; duplicates collapse silently."""
    arr = np.array(list(pairs), dtype=np.int64).reshape(-1, 2)
    return matrix_from_arrays(n, m, arr[:, 0], arr[:, 1])


@dataclass(frozen=True, eq=False)
class QueryVector:
    """Sparse query: strictly increasing feature ids with pre-multiplied weights."""

    features: np.ndarray  # int64
    weights: np.ndarray  # float64

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.int64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if f.ndim != 1 or f.shape != w.shape:
            raise ValueError("features and weights must be 1-D arrays of equal length")
        if f.size and (f[0] < 0 or np.any(np.diff(f) <= 0)):
            raise ValueError("query feature ids must be non-negative and strictly increasing")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, pairs) -> "QueryVector":
        """Accepts a dict ``{feature: weight}`` or ``(feature, weight)`` pairs in any order."""
        items = sorted(pairs.items() if isinstance(pairs, dict) else pairs)
        if not items:
            return cls(np.empty(0, np.int64), np.empty(0, np.float64))
        f, w = zip(*items)
        return cls(np.array(f, dtype=np.int64), np.array(w, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.features.size)

    def scaled(self, alpha: float) -> "QueryVector":
        return QueryVector(self.features, self.weights * alpha)

    def check_bounds(self, m: int) -> None:
        if self.features.size and self.features[-1] >= m:
            raise BoundsError(
                f"query feature {int(self.features[-1])} out of range for M={m}"
            )

    def dense(self, m: int) -> np.ndarray:
        self.check_bounds(m)
        out = np.zeros(m, dtype=np.float64)
        out[self.features] = self.weights
        return out


def score_vector(n: int) -> np.ndarray:
    """A zeroed per-ad score accumulator."""
    return np.zeros(n, dtype=np.float64)


def as_embedding(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("embedding contains non-finite values")
    return v
