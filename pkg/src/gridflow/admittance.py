"""Rank-4 nodal admittance hypermatrix ``y[i, j, k, m]``.

``i, j`` are phases and ``k, m`` hyper-nodes; nodal currents follow from
voltages by contracting over the repeated pair ``(j, m)``::

    i[i, k] = sum_{j, m} y[i, j, k, m] * v[j, m]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .linalg3 import invert3
from .model import phase_field

__all__ = [
    "DenseAdmittance",
    "DominanceReport",
    "apply_dense",
    "build",
    "check_diagonal_dominance",
    "check_minor_symmetry",
    "invert3",
    "to_flat",
    "from_flat",
]


@dataclass(frozen=True, eq=False)
class DenseAdmittance:
    y: np.ndarray  # (3, 3, N, N) complex

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 4 or y.shape[:2] != (3, 3) or y.shape[2] != y.shape[3]:
            raise ValueError(f"admittance must have shape (3, 3, N, N), got {y.shape}")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def n_nodes(self):
        return self.y.shape[2]


def build(f):
    """Assemble the hypermatrix of feeder ``f`` one branch at a time.

    Every branch adds its series admittance ``g = inv(z)`` to both diagonal
    node blocks (plus the shunt at that end) and subtracts ``g`` from both
    off-diagonal blocks.
    """
    y = np.zeros((3, 3, f.n_nodes, f.n_nodes), dtype=complex)
    for e, br in enumerate(f.branches):
        nx, ny = br.from_node, br.to_node
        try:
            g = invert3(br.z)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"branches[{e}]: {exc}") from exc
        y[:, :, nx, nx] += g + br.b_from
        y[:, :, nx, ny] -= g
        y[:, :, ny, nx] -= g
        y[:, :, ny, ny] += g + br.b_to
    return DenseAdmittance(y)


def to_flat(y):
    """3N x 3N matrix with row/column index ``3 * node + phase``."""
    arr = y.y if isinstance(y, DenseAdmittance) else np.asarray(y)
    n = arr.shape[2]
    return arr.transpose(2, 0, 3, 1).reshape(3 * n, 3 * n)


def from_flat(ybus):
    ybus = np.asarray(ybus, dtype=complex)
    n = ybus.shape[0] // 3
    return DenseAdmittance(ybus.reshape(n, 3, n, 3).transpose(1, 3, 0, 2))


def apply_dense(y, v):
    """Nodal currents ``i[i, k] = y[i, j, k, m] v[j, m]`` from voltages ``v``."""
    v = phase_field(v, y.n_nodes)
    return np.einsum("ijkm,jm->ik", y.y, v)


def check_minor_symmetry(y):
    """Largest deviation from ``y_ijkm = y_jikm`` and ``y_ijkm = y_ijmk``."""
    arr = y.y
    phase = np.abs(arr - arr.transpose(1, 0, 2, 3)).max(initial=0.0)
    node = np.abs(arr - arr.transpose(0, 1, 3, 2)).max(initial=0.0)
    return float(max(phase, node))


@dataclass(frozen=True)
class DominanceReport:
    """Per ``(phase, node)`` row quantities, each of shape (3, N).

    ``diagonal`` is ``|y_iikk|``; ``offdiagonal`` the classical sum of the
    remaining magnitudes in the row; ``row_sum`` is ``|sum_jm y_ijkm|``,
    the contraction of the row with a field of ones.
    """

    diagonal: np.ndarray
    offdiagonal: np.ndarray
    row_sum: np.ndarray

    @property
    def classical_margin(self):
        return self.diagonal - self.offdiagonal

    @property
    def row_sum_margin(self):
        return self.diagonal - self.row_sum

    def weakly_dominant(self, tol=0.0):
        """True when every row satisfies ``|y_iikk| >= |sum_jm y_ijkm| - tol``."""
        return bool(np.all(self.row_sum_margin >= -tol))


def check_diagonal_dominance(y):
    arr = y.y
    n = y.n_nodes
    idx = np.arange(3)
    nodes = np.arange(n)
    diag = np.abs(arr[idx[:, None], idx[:, None], nodes[None, :], nodes[None, :]])
    total = np.abs(arr).sum(axis=(1, 3))
    row_sum = np.abs(arr.sum(axis=(1, 3)))
    return DominanceReport(diagonal=diag, offdiagonal=total - diag, row_sum=row_sum)
