# A scaled-down version of the benchmark, run through the library API.
from hitmatch.bench import reports_to_csv, run_bench, summary_lines
from hitmatch.workload import WorkloadSpec, generate_matrix, generate_queries

spec = WorkloadSpec(num_ads=300_000, num_features=30_000, nnz=4_000_000, num_queries=200, query_nnz=50)
L = generate_matrix(spec)
queries = generate_queries(spec)
print(f"N={L.num_ads} M={L.num_features} nnz={L.nnz} queries={len(queries)}")

reports = run_bench(L, queries, ["indexed", "csc", "dense"], iters=2)
print(reports_to_csv(reports))
for line in summary_lines(reports):
    print(line)

# full size, from a shell:
#   hitmatch gen --ads 1000000 --features 100000 --nnz 16000000 --queries 1000 --qnnz 50 --seed 7 --out work
#   hitmatch build work/matrix.hmlm work/index.hmix
#   hitmatch bench work/index.hmix work/queries.hmqs --baseline indexed csc dense
