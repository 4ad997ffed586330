"""A small Monte-Carlo study from a run configuration.

The same configuration drives the command line ``netid benchmark``. Runs
are seeded individually, so any single run can be reproduced on its own.
"""
import sys
import tempfile

from netid.pipeline import RunConfig, format_config, run_benchmark, write_benchmark

cfg = RunConfig(network="six_node_rb", N=(300, 1078, 3873), M=5, seed=0)
print(format_config(cfg))

res = run_benchmark(cfg, progress=lambda r: print(".", end="", file=sys.stderr, flush=True))
print(file=sys.stderr)
for N, s in res.summary.items():
    print(f"N={N:5d}  mean MSE {s['mean_mse']:.3f}  initial {s['mean_mse_init']:.3f}  "
          f"median iterations {s['median_node_iterations']:g}  failed {s['failed']}")

out = write_benchmark(res, tempfile.mkdtemp())
print("written:", ", ".join(str(p) for p in out.values()))
