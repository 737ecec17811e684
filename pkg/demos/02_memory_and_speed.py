"""Memory and time of the compressed structure on 119-node feeders.

The first feeder has 1586 off-diagonal non-zeros (a trunk with full mutual
coupling, a two-phase lateral and uncoupled branches); the second couples all
three phases on every branch.
"""

from gridflow import bench, build, compress, load_feeder
from gridflow.cli import fixtures_dir
from gridflow.sparse import memory_positions

for name in ("mixed119.json", "radial119.json"):
    feeder = load_feeder(fixtures_dir() / name)
    Y = compress(build(feeder))
    mem = memory_positions(Y)
    dense = (3 * feeder.n_nodes) ** 2
    print(f"{name}: P={Y.nnz}, {mem} memory positions vs {dense} ({100 * mem / dense:.1f}%)")

print()
report = bench.benchmark_feeder(load_feeder(fixtures_dir() / "radial119.json"), trials=200, seed=7)
print(report.to_table())
