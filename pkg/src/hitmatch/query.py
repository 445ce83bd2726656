"""Query kernel over a :class:`~hitmatch.index.GroupedIndex`.

Per group, the blocks owned by each queried feature form one contiguous
segment.  Segment lengths are turned into offsets with an exclusive scan, the
concatenated block range is cut into equal lane shares, and every lane adds
its features' weights into the shared score vector.  Because all blocks in a
group are padded to the same size, equal block counts mean equal work.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numba
import numpy as np
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic

from .core import QueryVector
from .index import NUM_GROUPS, GroupedIndex


def default_workers() -> int:
    return os.cpu_count() or 1


def exclusive_scan(lengths: Sequence[int]) -> np.ndarray:
    """Work-efficient (up-sweep / down-sweep) exclusive prefix sum.

    Each sweep level is a single vectorised step, mirroring the data-parallel
    tree a device scan would run.
    """
    x = np.asarray(lengths, dtype=np.int64)
    n = x.size
    if n == 0:
        return np.empty(0, dtype=np.int64)
    size = 1 << (n - 1).bit_length()
    tree = np.zeros(size, dtype=np.int64)
    tree[:n] = x
    step = 1
    while step < size:
        tree[2 * step - 1 :: 2 * step] += tree[step - 1 :: 2 * step]
        step *= 2
    tree[-1] = 0
    while step > 1:
        half = step // 2
        left = tree[half - 1 :: step].copy()
        tree[half - 1 :: step] = tree[step - 1 :: step]
        tree[step - 1 :: step] += left
        step = half
    return tree[:n]


@dataclass(frozen=True)
class GroupPlan:
    key_lengths: np.ndarray  # blocks per queried feature
    key_segments: np.ndarray  # exclusive scan of key_lengths
    key_starts: np.ndarray  # absolute index of each feature's first block
    total_blocks: int


@dataclass(frozen=True)
class WorkPlan:
    features: np.ndarray
    weights: np.ndarray
    groups: Tuple[GroupPlan, ...]

    @property
    def total_blocks(self) -> int:
        return sum(g.total_blocks for g in self.groups)


def plan_query(idx: GroupedIndex, q: QueryVector) -> WorkPlan:
    q.check_bounds(idx.num_features)
    groups = []
    for g in range(NUM_GROUPS):
        keys = idx.key_offsets[g]
        starts = keys[q.features].astype(np.int64)
        lengths = keys[q.features + 1].astype(np.int64) - starts
        segs = exclusive_scan(lengths)
        total = int(segs[-1] + lengths[-1]) if lengths.size else 0
        groups.append(GroupPlan(lengths, segs, starts, total))
    return WorkPlan(q.features, q.weights, tuple(groups))


@dataclass(frozen=True)
class Assignment:
    """Lane shares per group.

    For group ``g``, lane ``i`` owns items ``lane_bounds[g][i]:lane_bounds[g][i+1]``
    of ``item_features[g]`` / ``item_blocks[g]``.
    """

    lanes: int
    lane_bounds: Tuple[np.ndarray, ...]
    item_features: Tuple[np.ndarray, ...]  # feature id owning each item
    item_blocks: Tuple[np.ndarray, ...]  # absolute block index in the group

    def lane_items(self, g: int, lane: int) -> List[Tuple[int, int]]:
        lo, hi = self.lane_bounds[g][lane], self.lane_bounds[g][lane + 1]
        return list(zip(self.item_features[g][lo:hi].tolist(), self.item_blocks[g][lo:hi].tolist()))

    def lane_loads(self, g: int) -> np.ndarray:
        return np.diff(self.lane_bounds[g])


def lane_bounds(total: int, lanes: int) -> np.ndarray:
    return np.arange(lanes + 1, dtype=np.int64) * total // lanes


def load_balance_search(key_segments: np.ndarray, total: int) -> np.ndarray:
    """Owning segment of every item in ``range(total)``.

    Empty segments share a start with their successor and are skipped by
    taking the last segment whose start is <= the item.
    """
    items = np.arange(total, dtype=np.int64)
    return np.searchsorted(key_segments, items, side="right") - 1


def balanced_assignment(plan: WorkPlan, lanes: int) -> Assignment:
    if lanes < 1:
        raise ValueError(f"lanes must be >= 1, got {lanes}")
    bounds, feats, blocks = [], [], []
    for gp in plan.groups:
        seg = load_balance_search(gp.key_segments, gp.total_blocks)
        rank = np.arange(gp.total_blocks, dtype=np.int64) - gp.key_segments[seg]
        bounds.append(lane_bounds(gp.total_blocks, lanes))
        feats.append(plan.features[seg])
        blocks.append(gp.key_starts[seg] + rank)
    return Assignment(lanes, tuple(bounds), tuple(feats), tuple(blocks))


@intrinsic
def _atomic_add(typingctx, arr, idx, val):
    sig = types.void(arr, idx, val)

    def codegen(context, builder, sig, args):
        aryty = sig.args[0]
        ary = context.make_array(aryty)(context, builder, args[0])
        ptr = cgutils.get_item_pointer(context, builder, aryty, ary, [args[1]], wraparound=False)
        builder.atomic_rmw("fadd", ptr, args[2], "monotonic")
        return context.get_dummy_value()

    return sig, codegen


@numba.njit(inline="always")
def _add_blocks(hdrs, vals, g, b, e, w, out):
    # ad index is formed unsigned so numba skips negative-index wraparound
    if g == 0:
        for k in range(b, e):
            out[np.uint64(hdrs[k] & 0xFFFFFF00) + vals[k]] += w
    elif g == 1:
        for k in range(b, e):
            base = np.uint64(hdrs[k] & 0xFFFFFF00)
            out[base + vals[2 * k]] += w
            out[base + vals[2 * k + 1]] += w
    else:
        size = 1 << g
        for k in range(b, e):
            h = hdrs[k]
            base = np.uint64(h & 0xFFFFFF00)
            o = k * size
            for s in range(np.int64(h & 0xFF) + 1):
                out[base + vals[o + s]] += w


@numba.njit(inline="always")
def _atomic_add_blocks(hdrs, vals, g, b, e, w, out):
    size = 1 << g
    for k in range(b, e):
        h = hdrs[k]
        base = np.uint64(h & 0xFFFFFF00)
        o = k * size
        for s in range(np.int64(h & 0xFF) + 1):
            _atomic_add(out, base + np.uint64(vals[o + s]), w)


@numba.njit(cache=True, nogil=True)
def _hitmatch_single_lane(keys, hdrs, vals, features, weights, group_mask, out):
    out[:] = 0.0
    for g in range(NUM_GROUPS):
        if not group_mask[g]:
            continue
        kg = keys[g]
        hg = hdrs[g]
        vg = vals[g]
        for j in range(features.size):
            f = features[j]
            _add_blocks(hg, vg, g, np.int64(kg[f]), np.int64(kg[f + 1]), weights[j], out)


@numba.njit(cache=True, parallel=True)
def _hitmatch_lanes(keys, hdrs, vals, features, weights, group_mask, lanes, out):
    out[:] = 0.0
    nq = features.size
    starts = np.zeros((NUM_GROUPS, nq), np.int64)
    segs = np.zeros((NUM_GROUPS, nq + 1), np.int64)
    for g in range(NUM_GROUPS):
        kg = keys[g]
        for j in range(nq):
            f = features[j]
            starts[g, j] = kg[f]
            segs[g, j + 1] = segs[g, j] + np.int64(kg[f + 1]) - np.int64(kg[f])
    for t in numba.prange(NUM_GROUPS * lanes):
        g = t // lanes
        lane = t % lanes
        if not group_mask[g]:
            continue
        total = segs[g, nq]
        lo = total * lane // lanes
        hi = total * (lane + 1) // lanes
        if lo >= hi:
            continue
        # merge-path style search for the segment holding item `lo`
        j = np.searchsorted(segs[g, :nq], lo, side="right") - 1
        item = lo
        while item < hi:
            seg_end = segs[g, j + 1]
            stop = min(hi, seg_end)
            if stop > item:
                b = starts[g, j] + item - segs[g, j]
                _atomic_add_blocks(hdrs[g], vals[g], g, b, b + stop - item, weights[j], out)
                item = stop
            j += 1


_ALL_GROUPS = np.ones(NUM_GROUPS, dtype=np.bool_)


def _group_mask(groups: Iterable[int] | None) -> np.ndarray:
    if groups is None:
        return _ALL_GROUPS
    mask = np.zeros(NUM_GROUPS, dtype=np.bool_)
    mask[list(groups)] = True
    return mask


def hitmatch_scores(
    idx: GroupedIndex,
    q: QueryVector,
    workers: int | None = None,
    out: np.ndarray | None = None,
    groups: Iterable[int] | None = None,
) -> np.ndarray:
    """``scores[a] = sum of q's weights over features a carries``.

    ``workers`` is the number of balanced lanes per group (default: CPU
    count).  A single lane accumulates with plain adds; several lanes share the
    output through atomic adds, so float results may differ in the last bits
    between lane counts.  ``groups`` restricts the scan to a subset of block
    groups and exists for diagnostics.
    """
    q.check_bounds(idx.num_features)
    lanes = default_workers() if workers is None else int(workers)
    if lanes < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if out is None:
        out = np.empty(idx.num_ads, dtype=np.float64)
    elif out.shape != (idx.num_ads,) or out.dtype != np.float64:
        raise ValueError("out must be a float64 array of length num_ads")
    mask = _group_mask(groups)
    if lanes == 1:
        _hitmatch_single_lane(idx.key_offsets, idx.headers, idx.values, q.features, q.weights, mask, out)
    else:
        _hitmatch_lanes(idx.key_offsets, idx.headers, idx.values, q.features, q.weights, mask, lanes, out)
    return out


def hitmatch_scores_batch(
    idx: GroupedIndex, queries: Sequence[QueryVector], workers: int | None = None
) -> np.ndarray:
    """Score several queries; row ``r`` equals ``hitmatch_scores(idx, queries[r])``."""
    out = np.empty((len(queries), idx.num_ads), dtype=np.float64)
    for r, q in enumerate(queries):
        hitmatch_scores(idx, q, workers=workers, out=out[r])
    return out
