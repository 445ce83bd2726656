"""Block-compressed inverted index over the columns of L.

Each column (feature) is cut into blocks of ads that share the high 24 bits
of their id.  A block stores one 32-bit header word and one byte per ad.
Blocks holding ``n`` ads land in group ``ceil(log2 n)`` and are padded to
``2**g`` bytes, so every block inside a group costs the same to scan.

Header word layout: ``(h << 8) | (n - 1)``.  Keeping the population in the
low byte lets the query kernel stop at the last real residual; pad bytes are
written as zero but are never read back as ads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numba
import numpy as np

from .core import BinaryInteractionMatrix, matrix_from_arrays

NUM_GROUPS = 9
BLOCK_BITS = 8
BLOCK_SPAN = 1 << BLOCK_BITS
MAX_HEADER = (1 << 24) - 1


class IndexCorruptError(ValueError):
    pass


def split_ad_id(v: int) -> Tuple[int, int]:
    """``v -> (v // 256, v % 256)``."""
    if not 0 <= v < 1 << 32:
        raise ValueError(f"ad id {v} does not fit in 32 bits")
    return v >> BLOCK_BITS, v & (BLOCK_SPAN - 1)


def group_of(n: int) -> int:
    if not 1 <= n <= BLOCK_SPAN:
        raise ValueError(f"block population must be in [1, 256], got {n}")
    return (n - 1).bit_length()


def pack_header(h: int, n: int) -> int:
    if not 0 <= h <= MAX_HEADER:
        raise ValueError(f"header {h} does not fit in 24 bits")
    if not 1 <= n <= BLOCK_SPAN:
        raise ValueError(f"block population must be in [1, 256], got {n}")
    return (h << BLOCK_BITS) | (n - 1)


def unpack_header(word: int) -> Tuple[int, int]:
    """Inverse of :func:`pack_header`: ``word -> (h, valid_count)``."""
    word = int(word)
    return word >> BLOCK_BITS, (word & (BLOCK_SPAN - 1)) + 1


@dataclass(frozen=True)
class Block:
    feature_id: int
    header: int
    residuals: Tuple[int, ...]  # padded to 2**group
    valid_count: int

    @property
    def group(self) -> int:
        return group_of(self.valid_count)

    def ads(self) -> List[int]:
        return [self.header * BLOCK_SPAN + r for r in self.residuals[: self.valid_count]]


@dataclass(frozen=True, eq=False)
class GroupedIndex:
    """Struct-of-arrays index: per group, key offsets, header words and residual bytes."""

    num_ads: int
    num_features: int
    key_offsets: Tuple[np.ndarray, ...]  # 9 x uint32[M + 1]
    headers: Tuple[np.ndarray, ...]  # 9 x uint32[blocks_g]
    values: Tuple[np.ndarray, ...]  # 9 x uint8[blocks_g * 2**g]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupedIndex):
            return NotImplemented
        if (self.num_ads, self.num_features) != (other.num_ads, other.num_features):
            return False
        return all(
            np.array_equal(a, b)
            for mine, theirs in (
                (self.key_offsets, other.key_offsets),
                (self.headers, other.headers),
                (self.values, other.values),
            )
            for a, b in zip(mine, theirs)
        )

    def block_count(self, g: int) -> int:
        return int(self.headers[g].size)

    @property
    def total_blocks(self) -> int:
        return sum(h.size for h in self.headers)

    @property
    def nbytes(self) -> int:
        return sum(a.nbytes for arrs in (self.key_offsets, self.headers, self.values) for a in arrs)

    def blocks(self, g: int | None = None) -> Iterator[Block]:
        """Walk blocks in storage order; for inspection and tests, not the hot path."""
        groups = range(NUM_GROUPS) if g is None else (g,)
        for grp in groups:
            size = 1 << grp
            keys = self.key_offsets[grp]
            hdrs = self.headers[grp]
            vals = self.values[grp]
            feat_of_block = np.repeat(
                np.arange(self.num_features), np.diff(keys.astype(np.int64))
            )
            for b in range(hdrs.size):
                h, n = unpack_header(hdrs[b])
                yield Block(
                    int(feat_of_block[b]),
                    h,
                    tuple(vals[b * size : (b + 1) * size].tolist()),
                    n,
                )


@numba.njit(cache=True, nogil=True)
def _scan_blocks(features, ads, lo, hi):
    # one pass over sorted entries [lo, hi): block boundaries, populations, header words
    nblk = 0
    prev_f = -1
    prev_h = -1
    for e in range(lo, hi):
        f = np.int64(features[e])
        h = np.int64(ads[e]) >> 8
        if f != prev_f or h != prev_h:
            nblk += 1
            prev_f = f
            prev_h = h
    starts = np.empty(nblk, np.int64)
    counts = np.empty(nblk, np.int64)
    feats = np.empty(nblk, np.int64)
    words = np.empty(nblk, np.uint32)
    groups = np.empty(nblk, np.uint8)
    b = -1
    prev_f = -1
    prev_h = -1
    for e in range(lo, hi):
        f = np.int64(features[e])
        h = np.int64(ads[e]) >> 8
        if f != prev_f or h != prev_h:
            b += 1
            starts[b] = e
            counts[b] = 0
            feats[b] = f
            prev_f = f
            prev_h = h
        counts[b] += 1
    for b in range(nblk):
        n = counts[b]
        g = 0
        while (1 << g) < n:
            g += 1
        groups[b] = g
        h = np.int64(ads[starts[b]]) >> 8
        words[b] = np.uint32((h << 8) | (n - 1))
    return starts, counts, feats, words, groups


@numba.njit(cache=True, nogil=True)
def _fill_values(ads, starts, counts, size, out):
    for b in range(starts.size):
        s = starts[b]
        o = b * size
        for t in range(counts[b]):
            out[o + t] = np.uint8(ads[s + t] & 0xFF)


def _feature_chunks(features: np.ndarray, workers: int) -> List[Tuple[int, int]]:
    # cut the entry list into contiguous runs that never split a feature
    nnz = features.size
    if workers <= 1 or nnz == 0:
        return [(0, nnz)]
    cuts = [0]
    for w in range(1, workers):
        target = nnz * w // workers
        f = features[target]
        cut = int(np.searchsorted(features, f, side="left"))
        if cut > cuts[-1]:
            cuts.append(cut)
    cuts.append(nnz)
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def build_index(L: BinaryInteractionMatrix, workers: int | None = None) -> GroupedIndex:
    """Compress L into a :class:`GroupedIndex`.

    Entries are split across ``workers`` at feature boundaries, scanned into
    blocks independently and concatenated in feature order, so the output is
    byte-identical for any worker count.
    """
    if L.num_ads > 1 << 32:
        raise ValueError("ad ids must fit in 32 bits")
    workers = workers or os.cpu_count() or 1
    m = L.num_features
    chunks = _feature_chunks(L.features, workers)

    def scan(chunk):
        return _scan_blocks(L.features, L.ads, chunk[0], chunk[1])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(scan, chunks))
        if parts:
            starts, counts, feats, words, groups = (
                np.concatenate([p[i] for p in parts]) for i in range(5)
            )
        else:
            starts = counts = feats = np.empty(0, np.int64)
            words = np.empty(0, np.uint32)
            groups = np.empty(0, np.uint8)

        def materialise(g):
            sel = np.flatnonzero(groups == g)
            size = 1 << g
            keys = np.zeros(m + 1, dtype=np.uint32)
            np.cumsum(np.bincount(feats[sel], minlength=m), out=keys[1:])
            vals = np.zeros(sel.size * size, dtype=np.uint8)
            _fill_values(L.ads, starts[sel], counts[sel], size, vals)
            return keys, words[sel], vals

        per_group = list(pool.map(materialise, range(NUM_GROUPS)))

    return GroupedIndex(
        num_ads=L.num_ads,
        num_features=m,
        key_offsets=tuple(p[0] for p in per_group),
        headers=tuple(p[1] for p in per_group),
        values=tuple(p[2] for p in per_group),
    )


def validate_index(idx: GroupedIndex) -> None:
    """Raise :class:`IndexCorruptError` on any structural inconsistency."""
    m = idx.num_features
    if not (len(idx.key_offsets) == len(idx.headers) == len(idx.values) == NUM_GROUPS):
        raise IndexCorruptError(f"expected {NUM_GROUPS} groups")
    for g in range(NUM_GROUPS):
        keys = idx.key_offsets[g].astype(np.int64)
        hdrs = idx.headers[g]
        vals = idx.values[g]
        size = 1 << g
        if keys.size != m + 1:
            raise IndexCorruptError(f"group {g}: key_offsets has {keys.size} entries, expected {m + 1}")
        if keys[0] != 0:
            raise IndexCorruptError(f"group {g}: key_offsets[0] = {keys[0]}, expected 0")
        drops = np.flatnonzero(np.diff(keys) < 0)
        if drops.size:
            raise IndexCorruptError(f"group {g}: key_offsets decrease at feature {int(drops[0])}")
        if keys[-1] != hdrs.size:
            raise IndexCorruptError(
                f"group {g}: key_offsets end at {keys[-1]} but group holds {hdrs.size} blocks"
            )
        if vals.size != hdrs.size * size:
            raise IndexCorruptError(
                f"group {g}: values has {vals.size} bytes, expected {hdrs.size * size}"
            )
        if not hdrs.size:
            continue
        block_feat = np.repeat(np.arange(m, dtype=np.int64), np.diff(keys))
        h = hdrs.astype(np.int64) >> 8
        same_feat = block_feat[1:] == block_feat[:-1]
        bad = np.flatnonzero(same_feat & (np.diff(h) <= 0))
        if bad.size:
            raise IndexCorruptError(
                f"group {g}, block {int(bad[0]) + 1}: headers not ascending within feature"
            )
        n = (hdrs & 0xFF).astype(np.int64) + 1
        lo = 1 if g == 0 else (1 << (g - 1)) + 1
        bad = np.flatnonzero((n < lo) | (n > size))
        if bad.size:
            b = int(bad[0])
            raise IndexCorruptError(f"group {g}, block {b}: population {n[b]} violates group law")
        lanes = vals.reshape(hdrs.size, size).astype(np.int64)
        valid = np.arange(size) < n[:, None]
        if size > 1:
            steps = np.diff(lanes, axis=1) > 0
            ok = steps | ~valid[:, 1:]
            bad = np.flatnonzero(~ok.all(axis=1))
            if bad.size:
                raise IndexCorruptError(
                    f"group {g}, block {int(bad[0])}: residuals not strictly increasing"
                )
        top = (hdrs.astype(np.int64) >> 8) * BLOCK_SPAN + np.where(valid, lanes, 0).max(axis=1)
        bad = np.flatnonzero(top >= idx.num_ads)
        if bad.size:
            raise IndexCorruptError(
                f"group {g}, block {int(bad[0])}: ad id {int(top[bad[0]])} >= N={idx.num_ads}"
            )


def decode_index(idx: GroupedIndex) -> BinaryInteractionMatrix:
    """Expand the index back into L, skipping pad lanes."""
    validate_index(idx)
    feats, ads = [], []
    for g in range(NUM_GROUPS):
        hdrs = idx.headers[g]
        if not hdrs.size:
            continue
        size = 1 << g
        keys = idx.key_offsets[g].astype(np.int64)
        n = (hdrs & 0xFF).astype(np.int64) + 1
        lanes = idx.values[g].reshape(hdrs.size, size).astype(np.int64)
        valid = np.arange(size) < n[:, None]
        base = (hdrs.astype(np.int64) >> 8) * BLOCK_SPAN
        block_feat = np.repeat(np.arange(idx.num_features, dtype=np.int64), np.diff(keys))
        ads.append((base[:, None] + lanes)[valid])
        feats.append(np.broadcast_to(block_feat[:, None], lanes.shape)[valid])
    if not feats:
        return matrix_from_arrays(
            idx.num_ads, idx.num_features, np.empty(0, np.int64), np.empty(0, np.int64)
        )
    total = sum(a.size for a in ads)
    L = matrix_from_arrays(idx.num_ads, idx.num_features, np.concatenate(feats), np.concatenate(ads))
    if L.nnz != total:
        raise IndexCorruptError(f"{total - L.nnz} (feature, ad) pairs stored more than once")
    return L


def group_populations(idx: GroupedIndex) -> np.ndarray:
    """Number of stored (non-pad) ads per group."""
    return np.array(
        [int(((h & 0xFF).astype(np.int64) + 1).sum()) for h in idx.headers], dtype=np.int64
    )
