"""Command-line entry point: ``hitmatch {gen,build,query,verify,bench,losscheck}``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as hio
from .bench import METHODS, reports_to_csv, run_bench, summary_lines
from .fusion import top_k
from .index import IndexCorruptError, build_index, decode_index, validate_index
from .oracle import csc_from_matrix, oracle_scores
from .query import hitmatch_scores
from .rank_loss import LossConfig, finite_difference_grad, grad_relative_error, lambdarank_loss
from .workload import WorkloadSpec, generate_matrix, generate_queries, generate_requests


def _load_matrix(path: str):
    if Path(path).suffix in (".txt", ".tsv"):
        return hio.read_matrix_text(path)
    return hio.read_matrix(path)


def cmd_gen(args) -> int:
    spec = WorkloadSpec(
        num_ads=args.ads,
        num_features=args.features,
        nnz=args.nnz,
        skew=args.skew,
        num_queries=args.queries,
        query_nnz=args.qnnz,
        integer_weights=args.int_weights,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    L = generate_matrix(spec)
    queries = generate_queries(spec)
    hio.write_matrix(out / "matrix.hmlm", L)
    hio.write_queries(out / "queries.hmqs", queries, spec.num_features)
    if args.requests:
        reqs = generate_requests(args.requests, args.request_len, spec.num_ads, spec.seed)
        hio.write_requests(out / "requests.txt", reqs)
    (out / "workload.json").write_text(json.dumps(spec.as_dict(), indent=2) + "\n")
    pops = L.column_populations()
    print(
        f"wrote {out}: N={L.num_ads} M={L.num_features} nnz={L.nnz} "
        f"queries={len(queries)}x{spec.query_nnz} max column={int(pops.max(initial=0))} "
        f"in {time.perf_counter() - t0:.1f}s"
    )
    return 0


def cmd_build(args) -> int:
    L = _load_matrix(args.matrix)
    t0 = time.perf_counter()
    idx = build_index(L, workers=args.workers)
    ms = (time.perf_counter() - t0) * 1e3
    hio.write_index(args.out, idx)
    counts = " ".join(str(idx.block_count(g)) for g in range(9))
    print(f"built index for nnz={L.nnz}: blocks per group [{counts}], {idx.nbytes} bytes")
    print(f"build_ms={ms:.2f}")
    return 0


def cmd_query(args) -> int:
    idx = hio.read_index(args.index)
    queries, _ = hio.read_queries(args.queries)
    k = min(args.k, idx.num_ads)
    rows = []
    out = np.empty(idx.num_ads)
    for qi, q in enumerate(queries):
        hitmatch_scores(idx, q, workers=args.workers, out=out)
        rows.extend((qi, a, s) for a, s in top_k(out, k))
    if args.out:
        hio.write_scores_csv(args.out, rows)
    else:
        print("query,ad,score")
        for qi, a, s in rows:
            print(f"{qi},{a},{s!r}")
    return 0


def cmd_verify(args) -> int:
    L = _load_matrix(args.matrix)
    idx = hio.read_index(args.index)
    queries, _ = hio.read_queries(args.queries)
    try:
        validate_index(idx)
    except IndexCorruptError as exc:
        print(f"FAIL: corrupt index: {exc}")
        return 1
    if (idx.num_ads, idx.num_features) != (L.num_ads, L.num_features):
        print(f"FAIL: index shape {idx.num_ads}x{idx.num_features} != matrix {L.num_ads}x{L.num_features}")
        return 1
    csc = csc_from_matrix(L)
    max_abs = max_rel = 0.0
    worst = None
    got = np.empty(L.num_ads)
    want = np.empty(L.num_ads)
    for qi, q in enumerate(queries):
        hitmatch_scores(idx, q, workers=args.workers, out=got)
        oracle_scores(csc, q, out=want)
        err = np.abs(got - want)
        rel = err / np.maximum(np.abs(want), args.atol)
        if err.size:
            max_abs = max(max_abs, float(err.max()))
            max_rel = max(max_rel, float(rel.max()))
        breach = np.flatnonzero(err > np.maximum(args.rtol * np.abs(want), args.atol))
        if breach.size and worst is None:
            worst = (qi, int(breach[0]))
    print(f"queries={len(queries)} max_abs_err={max_abs:.3e} max_rel_err={max_rel:.3e}")
    if worst is not None:
        print(f"FAIL: query {worst[0]} ad {worst[1]} exceeds rtol={args.rtol} atol={args.atol}")
        return 1
    print("PASS")
    return 0


def cmd_bench(args) -> int:
    idx = hio.read_index(args.index)
    queries, _ = hio.read_queries(args.queries)
    L = decode_index(idx)
    workload = {"num_ads": L.num_ads, "num_features": L.num_features, "nnz": L.nnz, "queries": len(queries)}
    methods = list(dict.fromkeys(args.baseline))
    reports = run_bench(L, queries, methods, iters=args.iters, workers=args.workers, workload=workload)
    text = reports_to_csv(reports)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    for line in summary_lines(reports):
        print(line, file=sys.stderr)
    return 0


def cmd_losscheck(args) -> int:
    requests = hio.read_requests(args.requests)
    cfg = LossConfig(combine_op="multiply" if args.op == "mul" else "add", use_value=not args.no_value)
    total = 0.0
    worst = 0.0
    for req in requests:
        loss, grad = lambdarank_loss(req, cfg)
        fd = finite_difference_grad(req, cfg, step=args.step)
        total += loss
        worst = max(worst, grad_relative_error(grad, fd))
    print(f"requests={len(requests)} op={args.op} use_value={cfg.use_value}")
    print(f"total_loss={total:.10g} mean_loss={total / max(len(requests), 1):.10g}")
    print(f"max_grad_rel_err={worst:.3e} (tolerance {args.tol:g})")
    if worst > args.tol:
        print("FAIL")
        return 1
    print("PASS")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hitmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic matrix, query stream and requests")
    p.add_argument("--ads", type=int, required=True)
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--nnz", type=int, required=True)
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--qnnz", type=int, required=True, help="nonzeros per query")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--skew", type=float, default=WorkloadSpec.skew, help="Zipf exponent of feature popularity")
    p.add_argument("--int-weights", action="store_true", help="query weights in {1..16}")
    p.add_argument("--requests", type=int, default=64, help="ranked requests to write (0 to skip)")
    p.add_argument("--request-len", type=int, default=30)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="build an index snapshot from a matrix file")
    p.add_argument("matrix")
    p.add_argument("out")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="top-k ads per query from an index snapshot")
    p.add_argument("index")
    p.add_argument("queries")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="check indexed scores against the CSC oracle")
    p.add_argument("--matrix", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--atol", type=float, default=1e-9)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="QPS and latency of the index against baselines")
    p.add_argument("index")
    p.add_argument("queries")
    p.add_argument("--baseline", nargs="+", choices=METHODS, default=["indexed", "csc"])
    p.add_argument("--iters", type=int, default=1)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--csv", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("losscheck", help="finite-difference check of the ranking loss gradient")
    p.add_argument("requests")
    p.add_argument("--op", choices=("mul", "add"), default="mul")
    p.add_argument("--no-value", action="store_true", help="drop the value-gap pair weight")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_losscheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
