"""Seeded synthetic workloads.

Feature popularity follows a Zipf-like law ``p_i ~ (i + 1) ** -skew``; the
same law drives which features queries pick, so popular (long) columns are
also the ones queried most.  Everything here is a pure function of the spec.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from .core import BinaryInteractionMatrix, QueryVector, matrix_from_arrays
from .fusion import AdTowerTable
from .rank_loss import RankedRequest


@dataclass(frozen=True)
class WorkloadSpec:
    num_ads: int = 1_000_000
    num_features: int = 100_000
    nnz: int = 16_000_000
    skew: float = 0.8
    num_queries: int = 1000
    query_nnz: int = 50
    integer_weights: bool = False
    seed: int = 7

    def __post_init__(self):
        for name in ("num_ads", "num_features", "num_queries", "query_nnz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.nnz < 0:
            raise ValueError("nnz must be non-negative")
        if self.skew < 0:
            raise ValueError("skew must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


def feature_popularity(num_features: int, skew: float) -> np.ndarray:
    p = np.arange(1, num_features + 1, dtype=np.float64) ** -skew
    return p / p.sum()


def _rng(spec: WorkloadSpec, stream: int) -> np.random.Generator:
    # independent streams so changing the query count leaves L untouched
    return np.random.default_rng([spec.seed, stream])


def generate_matrix(spec: WorkloadSpec) -> BinaryInteractionMatrix:
    n, m, nnz = spec.num_ads, spec.num_features, spec.nnz
    cells = n * m
    if nnz > cells:
        raise ValueError(f"nnz={nnz} exceeds N*M={cells}")
    rng = _rng(spec, 0)
    p = feature_popularity(m, spec.skew)
    if nnz == cells:
        keys = np.arange(cells, dtype=np.int64)
    elif 4 * nnz >= cells:
        # dense regime: weighted sampling without replacement over all cells
        cell_p = np.repeat(p / n, n)
        keys = np.sort(rng.choice(cells, size=nnz, replace=False, p=cell_p))
    else:
        keys = np.empty(0, dtype=np.int64)
        while keys.size < nnz:
            need = nnz - keys.size
            draw = need + need // 8 + 16
            f = rng.choice(m, size=draw, p=p).astype(np.int64)
            a = rng.integers(0, n, size=draw, dtype=np.int64)
            fresh = np.unique(f * n + a)
            fresh = fresh[~np.isin(fresh, keys, assume_unique=True)]
            if fresh.size > need:
                fresh = np.sort(rng.choice(fresh, size=need, replace=False))
            keys = np.union1d(keys, fresh)
    return matrix_from_arrays(n, m, keys // n, keys % n)


def generate_queries(spec: WorkloadSpec) -> List[QueryVector]:
    if spec.query_nnz > spec.num_features:
        raise ValueError("query_nnz exceeds num_features")
    rng = _rng(spec, 1)
    p = feature_popularity(spec.num_features, spec.skew)
    queries = []
    for _ in range(spec.num_queries):
        feats = np.sort(rng.choice(spec.num_features, size=spec.query_nnz, replace=False, p=p))
        if spec.integer_weights:
            w = rng.integers(1, 17, size=feats.size).astype(np.float64)
        else:
            w = rng.uniform(0.0, 1.0, size=feats.size)
        queries.append(QueryVector(feats, w))
    return queries


def generate_tower_table(num_ads: int, dim: int, seed: int = 7) -> AdTowerTable:
    rng = np.random.default_rng([seed, 2])
    return AdTowerTable(rng.standard_normal((num_ads, dim)).astype(np.float32))


def generate_requests(
    count: int, length: int = 30, num_ads: int = 1_000_000, seed: int = 7
) -> List[RankedRequest]:
    """Random ranked requests with well-separated scores and eCPM-like values."""
    if length < 2:
        raise ValueError("requests need at least 2 items")
    rng = np.random.default_rng([seed, 3])
    out = []
    for _ in range(count):
        ads = rng.choice(num_ads, size=length, replace=False)
        # spacing keeps finite-difference probes from reordering items
        scores = rng.permutation(length) * 0.25 + rng.uniform(0, 0.1, size=length)
        ranks = rng.permutation(length) + 1
        values = np.round(rng.lognormal(0.0, 1.0, size=length), 6)
        out.append(RankedRequest(ads, scores, ranks, values))
    return out
