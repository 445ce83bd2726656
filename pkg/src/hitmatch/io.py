"""Readers and writers for every on-disk format.  Binary formats are little-endian.

========  ==========================================================================
format    layout
========  ==========================================================================
HMLM      magic, version u32, N u32, M u32, nnz u64, features u32[nnz], ads u32[nnz]
HMIX      magic, version u32, N u32, M u32, then per group g = 0..8:
          block_count u32, key_offsets u32[M+1], headers u32[count],
          values u8[count * 2**g]
HMAT      magic, N u32, dim u32, f32[N * dim] row-major
HMQS      magic, version u32, M u32, count u32, then per query:
          nnz u32, features u32[nnz], weights f64[nnz]
========  ==========================================================================

Text formats: matrix pairs (``ad<TAB>feature`` per line), ranked-request
batches and score CSVs.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .core import BinaryInteractionMatrix, QueryVector, matrix_from_arrays
from .fusion import AdTowerTable
from .index import NUM_GROUPS, GroupedIndex
from .rank_loss import RankedRequest

PathLike = Union[str, Path]

MATRIX_MAGIC = b"HMLM"
INDEX_MAGIC = b"HMIX"
TOWER_MAGIC = b"HMAT"
QUERY_MAGIC = b"HMQS"
VERSION = 1


class FormatError(ValueError):
    pass


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data = memoryview(data)
        self.pos = 0
        self.name = name

    def take(self, nbytes: int, what: str) -> memoryview:
        end = self.pos + nbytes
        if end > len(self.data):
            raise FormatError(
                f"{self.name}: truncated {what} at byte {self.pos}: "
                f"need {nbytes} bytes, {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count, what), dtype=dt).copy()

    def magic(self, expected: bytes) -> None:
        got = bytes(self.take(4, "magic"))
        if got != expected:
            raise FormatError(f"{self.name}: bad magic at byte 0: expected {expected!r}, got {got!r}")

    def version(self) -> None:
        at = self.pos
        v = self.u32("version")
        if v != VERSION:
            raise FormatError(f"{self.name}: unsupported version {v} at byte {at}, expected {VERSION}")

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.name}: {len(self.data) - self.pos} trailing bytes at byte {self.pos}")


def _read(path: PathLike) -> _Reader:
    path = Path(path)
    return _Reader(path.read_bytes(), str(path))


def _u32(*values: int) -> bytes:
    return struct.pack(f"<{len(values)}I", *values)


# -- matrix ---------------------------------------------------------------------------


def matrix_to_bytes(L: BinaryInteractionMatrix) -> bytes:
    return b"".join(
        [
            MATRIX_MAGIC,
            _u32(VERSION, L.num_ads, L.num_features),
            struct.pack("<Q", L.nnz),
            L.features.astype("<u4").tobytes(),
            L.ads.astype("<u4").tobytes(),
        ]
    )


def matrix_from_bytes(data: bytes, name: str = "<matrix>") -> BinaryInteractionMatrix:
    r = _Reader(data, name)
    r.magic(MATRIX_MAGIC)
    r.version()
    n, m = r.u32("N"), r.u32("M")
    nnz = r.u64("nnz")
    feats = r.array("<u4", nnz, "features")
    ads = r.array("<u4", nnz, "ads")
    r.finish()
    L = matrix_from_arrays(n, m, feats, ads)
    if L.nnz != nnz:
        raise FormatError(f"{name}: {nnz - L.nnz} duplicate entries")
    return L


def write_matrix(path: PathLike, L: BinaryInteractionMatrix) -> None:
    Path(path).write_bytes(matrix_to_bytes(L))


def read_matrix(path: PathLike) -> BinaryInteractionMatrix:
    return matrix_from_bytes(Path(path).read_bytes(), str(path))


def write_matrix_text(path: PathLike, L: BinaryInteractionMatrix) -> None:
    with open(path, "w") as fh:
        fh.write(f"# hitmatch-matrix {L.num_ads} {L.num_features}\n")
        for a, f in zip(L.ads.tolist(), L.features.tolist()):
            fh.write(f"{a}\t{f}\n")


def read_matrix_text(
    path: PathLike, num_ads: int | None = None, num_features: int | None = None
) -> BinaryInteractionMatrix:
    """Read ``ad<TAB>feature`` lines.  Shape comes from the header comment,
    the arguments, or (failing both) the largest ids seen."""
    ads, feats = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "hitmatch-matrix":
                    num_ads = num_ads if num_ads is not None else int(parts[1])
                    num_features = num_features if num_features is not None else int(parts[2])
                continue
            try:
                a, f = line.split("\t")
                ads.append(int(a))
                feats.append(int(f))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected 'ad<TAB>feature', got {line!r}")
    if num_ads is None:
        num_ads = max(ads, default=-1) + 1
    if num_features is None:
        num_features = max(feats, default=-1) + 1
    return matrix_from_arrays(
        num_ads, num_features, np.array(feats, dtype=np.int64), np.array(ads, dtype=np.int64)
    )


# -- index snapshot -------------------------------------------------------------------


def index_to_bytes(idx: GroupedIndex) -> bytes:
    parts = [INDEX_MAGIC, _u32(VERSION, idx.num_ads, idx.num_features)]
    for g in range(NUM_GROUPS):
        parts.append(_u32(idx.headers[g].size))
        parts.append(idx.key_offsets[g].astype("<u4").tobytes())
        parts.append(idx.headers[g].astype("<u4").tobytes())
        parts.append(idx.values[g].astype(np.uint8).tobytes())
    return b"".join(parts)


def index_from_bytes(data: bytes, name: str = "<index>") -> GroupedIndex:
    r = _Reader(data, name)
    r.magic(INDEX_MAGIC)
    r.version()
    n, m = r.u32("N"), r.u32("M")
    keys, hdrs, vals = [], [], []
    for g in range(NUM_GROUPS):
        count = r.u32(f"group {g} block_count")
        keys.append(r.array("<u4", m + 1, f"group {g} key_offsets").astype(np.uint32))
        hdrs.append(r.array("<u4", count, f"group {g} headers").astype(np.uint32))
        vals.append(r.array("u1", count << g, f"group {g} values"))
    r.finish()
    return GroupedIndex(n, m, tuple(keys), tuple(hdrs), tuple(vals))


def write_index(path: PathLike, idx: GroupedIndex) -> None:
    Path(path).write_bytes(index_to_bytes(idx))


def read_index(path: PathLike) -> GroupedIndex:
    return index_from_bytes(Path(path).read_bytes(), str(path))


# -- ad tower table -------------------------------------------------------------------


def tower_to_bytes(table: AdTowerTable) -> bytes:
    return TOWER_MAGIC + _u32(table.num_ads, table.dim) + table.rows.astype("<f4").tobytes()


def tower_from_bytes(data: bytes, name: str = "<tower>") -> AdTowerTable:
    r = _Reader(data, name)
    r.magic(TOWER_MAGIC)
    n, dim = r.u32("N"), r.u32("dim")
    rows = r.array("<f4", n * dim, "rows").astype(np.float32).reshape(n, dim)
    r.finish()
    return AdTowerTable(rows)


def write_tower(path: PathLike, table: AdTowerTable) -> None:
    Path(path).write_bytes(tower_to_bytes(table))


def read_tower(path: PathLike) -> AdTowerTable:
    return tower_from_bytes(Path(path).read_bytes(), str(path))


# -- query stream ---------------------------------------------------------------------


def queries_to_bytes(queries: Sequence[QueryVector], num_features: int) -> bytes:
    parts = [QUERY_MAGIC, _u32(VERSION, num_features, len(queries))]
    for q in queries:
        q.check_bounds(num_features)
        parts.append(_u32(len(q)))
        parts.append(q.features.astype("<u4").tobytes())
        parts.append(q.weights.astype("<f8").tobytes())
    return b"".join(parts)


def queries_from_bytes(data: bytes, name: str = "<queries>") -> Tuple[List[QueryVector], int]:
    """Returns ``(queries, num_features)``."""
    r = _Reader(data, name)
    r.magic(QUERY_MAGIC)
    r.version()
    m, count = r.u32("M"), r.u32("count")
    queries = []
    for k in range(count):
        nnz = r.u32(f"query {k} nnz")
        f = r.array("<u4", nnz, f"query {k} features").astype(np.int64)
        w = r.array("<f8", nnz, f"query {k} weights").astype(np.float64)
        q = QueryVector(f, w)
        q.check_bounds(m)
        queries.append(q)
    r.finish()
    return queries, m


def write_queries(path: PathLike, queries: Sequence[QueryVector], num_features: int) -> None:
    Path(path).write_bytes(queries_to_bytes(queries, num_features))


def read_queries(path: PathLike) -> Tuple[List[QueryVector], int]:
    return queries_from_bytes(Path(path).read_bytes(), str(path))


# -- ranked requests ------------------------------------------------------------------


def write_requests(path: PathLike, requests: Iterable[RankedRequest]) -> None:
    with open(path, "w") as fh:
        for req in requests:
            fh.write(f"{len(req)}\n")
            for a, s, r, v in zip(req.ad_ids, req.scores, req.true_rank, req.values):
                fh.write(f"{int(a)} {float(s)!r} {int(r)} {float(v)!r}\n")


def read_requests(path: PathLike) -> List[RankedRequest]:
    with open(path) as fh:
        lines = [(n, ln.split()) for n, ln in enumerate(fh, 1) if ln.strip()]
    out = []
    k = 0
    while k < len(lines):
        lineno, head = lines[k]
        if len(head) != 1:
            raise FormatError(f"{path}:{lineno}: expected request length, got {' '.join(head)!r}")
        d = int(head[0])
        body = lines[k + 1 : k + 1 + d]
        if len(body) != d:
            raise FormatError(f"{path}:{lineno}: request declares {d} items, file ends after {len(body)}")
        rows = []
        for ln, parts in body:
            if len(parts) != 4:
                raise FormatError(f"{path}:{ln}: expected 'ad_id score true_rank value'")
            rows.append((int(parts[0]), float(parts[1]), int(parts[2]), float(parts[3])))
        ads, scores, ranks, values = zip(*rows)
        out.append(RankedRequest(np.array(ads), np.array(scores), np.array(ranks), np.array(values)))
        k += 1 + d
    return out


# -- score dumps ----------------------------------------------------------------------


def write_scores_csv(path: PathLike, rows: Iterable[Tuple[int, int, float]]) -> None:
    """Rows of ``(query, ad, score)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["query", "ad", "score"])
        for q, a, s in rows:
            w.writerow([int(q), int(a), repr(float(s))])


def read_scores_csv(path: PathLike) -> List[Tuple[int, int, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["query", "ad", "score"]:
            raise FormatError(f"{path}: unexpected header {header}")
        return [(int(q), int(a), float(s)) for q, a, s in reader]
