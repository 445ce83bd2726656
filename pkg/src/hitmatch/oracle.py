"""Reference scorers.

Two independent routes to ``scores[a] = sum_i w_i * L[a, i]``:

* a dense route over the boolean matrix (small shapes only), and
* a compressed-sparse-column gather that visits only the queried columns.

Both add contributions feature-major, ascending feature then ascending ad,
so they agree bit for bit.  The CSC gather is also the general sparse
baseline the benchmark compares the inverted index against, and
``spmv_scores`` is the full-matrix scan a generic SpMV library performs when
handed the query as a dense length-M vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numba
import numpy as np

from .core import BinaryInteractionMatrix, QueryVector


@dataclass(frozen=True, eq=False)
class CscMatrix:
    num_ads: int
    num_features: int
    col_offsets: np.ndarray  # int64, length M + 1
    row_ids: np.ndarray  # uint32, length nnz

    @property
    def nnz(self) -> int:
        return int(self.row_ids.size)

    def column(self, i: int) -> np.ndarray:
        return self.row_ids[self.col_offsets[i] : self.col_offsets[i + 1]]

    def to_matrix(self) -> BinaryInteractionMatrix:
        pops = np.diff(self.col_offsets)
        feats = np.repeat(np.arange(self.num_features, dtype=np.uint32), pops)
        return BinaryInteractionMatrix(
            self.num_ads, self.num_features, feats, self.row_ids.copy()
        )


def csc_from_matrix(L: BinaryInteractionMatrix) -> CscMatrix:
    # L is stored feature-major, so the row ids are already in CSC order
    offsets = np.zeros(L.num_features + 1, dtype=np.int64)
    np.cumsum(L.column_populations(), out=offsets[1:])
    return CscMatrix(L.num_ads, L.num_features, offsets, L.ads)


@numba.njit(cache=True, nogil=True)
def _csc_gather(col_offsets, row_ids, features, weights, out):
    out[:] = 0.0
    for j in range(features.size):
        w = weights[j]
        f = features[j]
        for e in range(col_offsets[f], col_offsets[f + 1]):
            out[row_ids[e]] += w


@numba.njit(cache=True, nogil=True)
def _spmv(col_offsets, row_ids, dense_weights, out):
    out[:] = 0.0
    for f in range(dense_weights.size):
        w = dense_weights[f]
        for e in range(col_offsets[f], col_offsets[f + 1]):
            out[row_ids[e]] += w


def _dense_scores(L: BinaryInteractionMatrix, q: QueryVector) -> np.ndarray:
    dense = L.to_dense()
    scores = np.zeros(L.num_ads, dtype=np.float64)
    for f, w in zip(q.features.tolist(), q.weights.tolist()):
        # absent entries add an exact 0.0, so the order matches the gather route
        scores += np.where(dense[:, f], w, 0.0)
    return scores


def oracle_scores(
    L: Union[BinaryInteractionMatrix, CscMatrix],
    q: QueryVector,
    method: str = "csc",
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Score every ad against ``q``.

    ``method="dense"`` walks the materialised boolean matrix and only works
    for small shapes; ``method="csc"`` gathers the queried columns.
    """
    q.check_bounds(L.num_features)
    if method == "dense":
        if isinstance(L, CscMatrix):
            L = L.to_matrix()
        return _dense_scores(L, q)
    if method != "csc":
        raise ValueError(f"unknown oracle method {method!r}")
    csc = L if isinstance(L, CscMatrix) else csc_from_matrix(L)
    if out is None:
        out = np.empty(csc.num_ads, dtype=np.float64)
    _csc_gather(csc.col_offsets, csc.row_ids, q.features, q.weights, out)
    return out


def spmv_scores(
    csc: CscMatrix, q: QueryVector, out: np.ndarray | None = None
) -> np.ndarray:
    """Full sparse matrix-vector product with the query densified to length M.

    Touches every stored entry regardless of how sparse the query is; this is
    the "dense scan" benchmark baseline.
    """
    dense_w = q.dense(csc.num_features)
    if out is None:
        out = np.empty(csc.num_ads, dtype=np.float64)
    _spmv(csc.col_offsets, csc.row_ids, dense_w, out)
    return out
