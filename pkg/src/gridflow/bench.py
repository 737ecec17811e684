"""Synthetic radial feeders and the sparse-versus-dense product benchmark."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .admittance import build, to_flat
from .model import Branch, FeederModel, Load
from .sparse import apply_sparse, compress, memory_positions

COUPLINGS = ("full", "diagonal")

SELF_IMPEDANCE = 0.01 + 0.04j
MUTUAL_RATIO = 0.3
MAX_LOAD = 0.01


def _impedance(rng, pattern):
    """Symmetric, diagonally dominant 3x3 series impedance.

    ``pattern`` picks the mutual couplings: "full" (all three pairs),
    "diagonal" (none) or "pair" (phases a-b only).
    """
    z = np.diag(SELF_IMPEDANCE * rng.uniform(0.8, 1.2, size=3))
    scale = MUTUAL_RATIO * SELF_IMPEDANCE
    if pattern == "full":
        pairs = [(0, 1), (0, 2), (1, 2)]
    elif pattern == "pair":
        pairs = [(0, 1)]
    else:
        pairs = []
    for a, b in pairs:
        z[a, b] = z[b, a] = scale * rng.uniform(0.8, 1.2)
    return z


def _load(rng, node):
    mag = MAX_LOAD * rng.uniform(0.2, 1.0, size=3)
    angle = np.arccos(rng.uniform(0.85, 1.0, size=3))
    return Load(node=node, s=mag * np.exp(1j * angle), connection="wye")


def _leaf_loads(rng, n_nodes, parents):
    has_child = np.zeros(n_nodes, dtype=bool)
    has_child[[p for p in parents.values()]] = True
    return [_load(rng, k) for k in range(1, n_nodes) if not has_child[k]]


def generate_radial(n_nodes, seed=0, coupling="full"):
    """Random radial feeder rooted at slack node 0.

    Node ``k`` hangs off a uniformly chosen earlier node; every branch has
    no shunt, and each leaf carries a light wye load (``|s| <= 0.01`` p.u.
    per phase). The same seed always yields the same feeder.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if coupling not in COUPLINGS:
        raise ValueError(f"coupling must be one of {COUPLINGS}, got {coupling!r}")
    rng = np.random.default_rng(seed)
    parents = {k: int(rng.integers(0, k)) for k in range(1, n_nodes)}
    branches = [Branch(p, k, _impedance(rng, coupling)) for k, p in parents.items()]
    return FeederModel(
        n_nodes=n_nodes,
        slack=0,
        branches=branches,
        loads=_leaf_loads(rng, n_nodes, parents),
    )


def generate_mixed(n_nodes, n_full, n_pair, seed=0):
    """Radial feeder mixing fully coupled, two-phase coupled and uncoupled sections.

    Nodes ``0..n_full`` form a fully coupled trunk from the slack. A second
    path of ``n_pair`` branches coupled on phases a-b only hangs off the
    trunk through an uncoupled link, and the remaining nodes attach to random
    earlier nodes through uncoupled branches. Off-diagonal non-zeros then
    number ``6 * n_uncoupled + 18 * n_full + 6 * (n_full + 1)
    + 10 * n_pair + 2 * (n_pair + 1)`` (assuming no exact cancellation).
    """
    needed = n_full + 1 + (n_pair + 1 if n_pair else 0)
    if n_full < 0 or n_pair < 0 or needed > n_nodes:
        raise ValueError(f"{needed} nodes needed for the requested sections, got {n_nodes}")
    rng = np.random.default_rng(seed)
    parents = {}
    patterns = {}
    for k in range(1, n_full + 1):
        parents[k], patterns[k] = k - 1, "full"
    next_node = n_full + 1
    if n_pair:
        parents[next_node] = int(rng.integers(0, n_full + 1))
        patterns[next_node] = "diagonal"
        for k in range(next_node + 1, next_node + n_pair + 1):
            parents[k], patterns[k] = k - 1, "pair"
        next_node += n_pair + 1
    for k in range(next_node, n_nodes):
        parents[k], patterns[k] = int(rng.integers(0, k)), "diagonal"
    branches = [Branch(parents[k], k, _impedance(rng, patterns[k])) for k in sorted(parents)]
    return FeederModel(
        n_nodes=n_nodes,
        slack=0,
        branches=branches,
        loads=_leaf_loads(rng, n_nodes, parents),
    )


@dataclass(frozen=True)
class BenchConfig:
    n_nodes: int = 119
    trials: int = 50
    seed: int = 0
    coupling: str = "full"

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")


@dataclass(frozen=True)
class BenchReport:
    n_nodes: int
    nnz: int
    t_dense_matvec: float
    t_sparse_apply: float
    speedup: float
    mem_dense: int
    mem_sparse: int
    mem_ratio: float
    shapes: dict

    def to_dict(self):
        doc = asdict(self)
        doc["shapes"] = {k: list(v) for k, v in self.shapes.items()}
        return doc

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)

    def to_table(self):
        n = self.n_nodes
        rows = [
            ("Parameter", "Y_BUS (matrix)", "y_ijkm (sparse)"),
            ("Elapsed time [s]", f"{self.t_dense_matvec:.3e}", f"{self.t_sparse_apply:.3e}"),
            ("Array's size", f"{3 * n}x{3 * n}", f"3x3x{n}x{n}"),
            ("Memory positions", str(self.mem_dense), str(self.mem_sparse)),
        ]
        widths = [max(len(r[c]) for r in rows) for c in range(3)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append("")
        lines.append(
            f"speedup={self.speedup:.1f}x mem_dense={self.mem_dense} "
            f"mem_sparse={self.mem_sparse} mem_ratio={self.mem_ratio:.4f}"
        )
        lines.append("")
        lines.append("Member of the structure  size")
        for name in ("M", "D", "F", "C", "E"):
            lines.append(f"{name:<24} {'x'.join(map(str, self.shapes[name]))}")
        return "\n".join(lines)


def _trials(fn, arg, trials):
    fn(arg)  # warm-up, discarded
    times, outputs = [], []
    for _ in range(trials):
        t0 = time.perf_counter_ns()
        out = fn(arg)
        times.append(time.perf_counter_ns() - t0)
        outputs.append(out)
    return times, outputs


def benchmark_feeder(f, trials=50, seed=0, rtol=1e-12, rounds=10):
    """Time the flat ``Y_BUS @ v`` product against the sparse contraction on ``f``.

    Both products run on the same random voltages; every trial's result is
    compared against the first dense product and a mismatch beyond ``rtol``
    (relative to the largest current) aborts with RuntimeError. The trials
    are split into ``rounds`` alternating dense and sparse blocks, each with
    its own warm-up call, and medians are reported.
    """
    y = build(f)
    Y = compress(y)
    ybus = np.ascontiguousarray(to_flat(y))
    rng = np.random.default_rng(seed)
    n = f.n_nodes
    v = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    v_flat = np.ascontiguousarray(v.T.ravel())

    def sparse_product(x):
        return apply_sparse(Y, x)

    # each product timed in its own block so neither runs on a cache the
    # other has just flushed; alternating blocks spread machine noise evenly
    rounds = max(1, min(rounds, trials))
    t_dense, dense_out, t_sparse, sparse_out = [], [], [], []
    for r in range(rounds):
        count = trials // rounds + (r < trials % rounds)
        times, outs = _trials(ybus.dot, v_flat, count)
        t_dense += times
        dense_out += outs
        times, outs = _trials(sparse_product, v, count)
        t_sparse += times
        sparse_out += outs
    reference = dense_out[0]
    scale = np.abs(reference).max()
    for trial, (expected, got) in enumerate(zip(dense_out, sparse_out)):
        err = max(
            np.abs(got.T.ravel() - reference).max(),
            np.abs(expected - reference).max(),
        )
        if err > rtol * scale:
            raise RuntimeError(
                f"trial {trial}: sparse and dense products differ by {err:.3e}; aborted"
            )

    dense = float(np.median(t_dense)) * 1e-9
    sparse = float(np.median(t_sparse)) * 1e-9
    mem_dense = (3 * n) ** 2
    mem_sparse = memory_positions(Y)
    return BenchReport(
        n_nodes=n,
        nnz=Y.nnz,
        t_dense_matvec=dense,
        t_sparse_apply=sparse,
        speedup=dense / sparse,
        mem_dense=mem_dense,
        mem_sparse=mem_sparse,
        mem_ratio=mem_sparse / mem_dense,
        shapes=Y.shapes(),
    )


def run_benchmark(cfg):
    f = generate_radial(cfg.n_nodes, cfg.seed, cfg.coupling)
    return benchmark_feeder(f, trials=cfg.trials, seed=cfg.seed)
