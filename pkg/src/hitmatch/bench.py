"""Throughput/latency harness comparing the inverted index with sparse baselines."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np

from .core import BinaryInteractionMatrix, QueryVector
from .index import build_index
from .oracle import csc_from_matrix, oracle_scores, spmv_scores
from .query import hitmatch_scores

CSV_COLUMNS = ("method", "preprocess_ms", "qps", "p50_us", "p99_us")
METHODS = ("indexed", "csc", "dense")
AMORTIZE_OVER = (10_000, 100_000)


@dataclass
class BenchReport:
    method: str
    preprocess_ms: float
    qps: float
    p50_us: float
    p99_us: float
    cold_qps: float
    queries: int
    passes: int
    workload: Dict = field(default_factory=dict)

    @property
    def mean_latency_us(self) -> float:
        return 1e6 / self.qps

    def amortized_overhead_us(self, num_queries: int) -> float:
        return self.preprocess_ms * 1e3 / num_queries

    def csv_row(self) -> List[str]:
        return [
            self.method,
            f"{self.preprocess_ms:.3f}",
            f"{self.qps:.2f}",
            f"{self.p50_us:.1f}",
            f"{self.p99_us:.1f}",
        ]


def _prepare(method: str, L: BinaryInteractionMatrix, workers: int | None):
    t0 = time.perf_counter()
    if method == "indexed":
        idx = build_index(L, workers=workers)
        elapsed = time.perf_counter() - t0

        def run(q, out):
            hitmatch_scores(idx, q, workers=workers, out=out)

    elif method in ("csc", "dense"):
        csc = csc_from_matrix(L)
        elapsed = time.perf_counter() - t0
        if method == "csc":

            def run(q, out):
                oracle_scores(csc, q, out=out)

        else:

            def run(q, out):
                spmv_scores(csc, q, out=out)

    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return elapsed * 1e3, run


def _timed_pass(run: Callable, queries: Sequence[QueryVector], out: np.ndarray):
    lat = np.empty(len(queries), dtype=np.float64)
    start = time.perf_counter()
    for k, q in enumerate(queries):
        t = time.perf_counter_ns()
        run(q, out)
        lat[k] = (time.perf_counter_ns() - t) / 1e3
    return time.perf_counter() - start, lat


def bench_method(
    method: str,
    L: BinaryInteractionMatrix,
    queries: Sequence[QueryVector],
    iters: int = 1,
    workers: int | None = None,
    workload: Dict | None = None,
) -> BenchReport:
    """Preprocess, run one cold pass (reported separately), then ``iters`` timed passes."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not queries:
        raise ValueError("no queries to benchmark")
    prep_ms, run = _prepare(method, L, workers)
    out = np.empty(L.num_ads, dtype=np.float64)
    run(queries[0], out)  # jit compile, not timed
    cold_s, _ = _timed_pass(run, queries, out)
    total_s = 0.0
    lats = []
    for _ in range(iters):
        s, lat = _timed_pass(run, queries, out)
        total_s += s
        lats.append(lat)
    lat = np.concatenate(lats)
    return BenchReport(
        method=method,
        preprocess_ms=prep_ms,
        qps=len(queries) * iters / total_s,
        p50_us=float(np.percentile(lat, 50)),
        p99_us=float(np.percentile(lat, 99)),
        cold_qps=len(queries) / cold_s,
        queries=len(queries),
        passes=iters,
        workload=dict(workload or {}),
    )


def run_bench(
    L: BinaryInteractionMatrix,
    queries: Sequence[QueryVector],
    methods: Sequence[str] = ("indexed", "csc"),
    iters: int = 1,
    workers: int | None = None,
    workload: Dict | None = None,
) -> List[BenchReport]:
    return [bench_method(m, L, queries, iters, workers, workload) for m in methods]


def reports_to_csv(reports: Sequence[BenchReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def summary_lines(reports: Sequence[BenchReport]) -> List[str]:
    lines = []
    for r in reports:
        lines.append(
            f"{r.method:>8}: warm {r.qps:10.2f} q/s  cold {r.cold_qps:10.2f} q/s  "
            f"p50 {r.p50_us:9.1f} us  p99 {r.p99_us:9.1f} us  preprocess {r.preprocess_ms:9.2f} ms"
        )
        for n in AMORTIZE_OVER:
            over = r.amortized_overhead_us(n)
            lines.append(
                f"{'':>10}preprocess amortized over {n:>6} queries: {over:8.3f} us/query "
                f"({100 * over / r.mean_latency_us:.3f}% of mean latency)"
            )
    by = {r.method: r for r in reports}
    if "indexed" in by:
        for base in ("csc", "dense"):
            if base in by:
                lines.append(f"indexed / {base} QPS: {by['indexed'].qps / by[base].qps:.2f}x")
    return lines
