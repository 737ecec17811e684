"""A four-node feeder as a rank-4 admittance hypermatrix.

Builds y[i, j, k, m] branch by branch, checks it against the flat 3N x 3N
matrix, and then splits it into the compressed {D, F, M, C, E} structure.
"""

import numpy as np

from gridflow import apply_dense, apply_sparse, build, compress, load_feeder
from gridflow.admittance import check_diagonal_dominance, check_minor_symmetry, to_flat
from gridflow.cli import fixtures_dir
from gridflow.sparse import memory_positions

feeder = load_feeder(fixtures_dir() / "radial4.json")
print(f"{feeder.n_nodes} hyper-nodes, {len(feeder.branches)} branches, slack at node {feeder.slack}")

y = build(feeder)
print("hypermatrix shape:", y.y.shape)
print("flat Y_BUS shape: ", to_flat(y).shape)

# the self block of node 1 collects both of its branches plus their shunts
np.set_printoptions(precision=2, suppress=True, linewidth=110)
print("y[:, :, 1, 1] =")
print(y.y[:, :, 1, 1])

print(f"minor symmetry deviation: {check_minor_symmetry(y):.1e}")
report = check_diagonal_dominance(y)
print(f"smallest |y_iikk| - |row sum| margin: {report.row_sum_margin.min():.3f}")

Y = compress(y)
# on a feeder this small the index arrays outweigh the savings; see 02 for N=119
print(f"\n{Y.nnz} off-diagonal non-zeros, {memory_positions(Y)} memory positions "
      f"against {to_flat(y).size} for the flat matrix")
for name, shape in Y.shapes().items():
    print(f"  {name}: {'x'.join(map(str, shape))}")

# row (phase a, node 1): its entries live in F[C:E] with coordinates in M
c, e = Y.C[0, 1], Y.E[0, 1]
print(f"\nrow (a, 1) holds entries {c}..{e - 1}:")
for p in range(c, e):
    j, m = Y.M[p]
    print(f"  y[a, {'abc'[j]}, 1, {m}] = {Y.F[p]:.2f}")

rng = np.random.default_rng(0)
v = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
gap = np.abs(apply_sparse(Y, v) - apply_dense(y, v)).max()
print(f"\nsparse and dense contractions agree to {gap:.1e}")
