"""Compressed hypermatrix storage ``{D, F, M, C, E}`` and its contraction.

The admittance hypermatrix is split into a scalar diagonal and the rest,
``y_ijkm = D_ik delta_ij delta_km + F_ijkm``. A "row" is one ``(i, k)``
pair; rows are laid out node-major (``k`` outer, phase ``i`` inner) and the
off-diagonal entries of row ``(i, k)`` occupy ``F[C[i, k]:E[i, k]]`` with
their ``(j, m)`` coordinates in ``M``. ``E`` is exclusive, so an empty row
has ``C == E``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse

from .admittance import DenseAdmittance, to_flat
from .errors import CorruptStructureError


@dataclass(frozen=True, eq=False)
class SparseAdmittance:
    n_nodes: int
    D: np.ndarray  # (3, N) complex
    F: np.ndarray  # (P,) complex
    M: np.ndarray  # (P, 2) int64, columns (j, m)
    C: np.ndarray  # (3, N) int64, first entry of row (i, k)
    E: np.ndarray  # (3, N) int64, one past the last entry

    def __post_init__(self):
        n = self.n_nodes
        arrays = {
            "D": (np.complex128, (3, n)),
            "F": (np.complex128, None),
            "M": (np.int64, None),
            "C": (np.int64, (3, n)),
            "E": (np.int64, (3, n)),
        }
        for name, (dtype, shape) in arrays.items():
            arr = np.array(getattr(self, name), dtype=dtype)
            if shape is not None and arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.F.ndim != 1:
            raise ValueError(f"F must be one-dimensional, got shape {self.F.shape}")
        if self.M.shape != (self.F.size, 2):
            raise ValueError(f"M must have shape ({self.F.size}, 2), got {self.M.shape}")
        # bounds are checked here so the compiled kernel never reads out of range
        P = self.F.size
        if np.any(self.C < 0) or np.any(self.C > self.E) or np.any(self.E > P):
            raise CorruptStructureError("row ranges must satisfy 0 <= C <= E <= P")
        if P and (
            self.M[:, 0].min() < 0 or self.M[:, 0].max() > 2
            or self.M[:, 1].min() < 0 or self.M[:, 1].max() >= n
        ):
            raise CorruptStructureError("coordinate out of range in M")
        # private kernel view: node-major row ranges and flat column indices
        # into v.ravel(), as writable unsigned copies (numba dispatches faster
        # on writable arrays and skips wraparound for unsigned indices)
        kernel = (
            self.D.copy(),
            self.F.copy(),
            (self.M[:, 0] * n + self.M[:, 1]).astype(np.uint64),
            self.C.T.ravel().astype(np.uint64),
            self.E.T.ravel().astype(np.uint64),
        )
        object.__setattr__(self, "_kernel", kernel)

    @property
    def nnz(self):
        """Number of stored off-diagonal entries (P)."""
        return self.F.size

    def shapes(self):
        """Member shapes in the layout of the structure table."""
        return {
            "M": tuple(self.M.shape),
            "D": tuple(self.D.shape),
            "F": (1, self.F.size),
            "C": tuple(self.C.shape),
            "E": tuple(self.E.shape),
        }


def compress(y, drop_tol=0.0):
    """Split a dense hypermatrix into ``{D, F, M, C, E}``.

    Off-diagonal entries with magnitude ``<= drop_tol`` are left out; with
    the default 0 only exact zeros are dropped.
    """
    if drop_tol < 0:
        raise ValueError("drop_tol must be non-negative")
    n = y.n_nodes
    flat = to_flat(y)
    D = np.diagonal(flat).reshape(n, 3).T.copy()
    mask = np.abs(flat) > drop_tol
    np.fill_diagonal(mask, False)
    rows, cols = np.nonzero(mask)  # row-major, i.e. node-major rows
    F = flat[rows, cols]
    M = np.column_stack((cols % 3, cols // 3))
    counts = np.bincount(rows, minlength=3 * n)
    ends = np.cumsum(counts)
    E = ends.reshape(n, 3).T
    C = (ends - counts).reshape(n, 3).T
    return SparseAdmittance(n_nodes=n, D=D, F=F, M=M, C=C, E=E)


def check_structure(Y):
    """Raise CorruptStructureError unless the row ranges and coordinates are sound."""
    n, P = Y.n_nodes, Y.nnz
    C = Y.C.T.ravel()  # node-major row order, row = 3 * k + i
    E = Y.E.T.ravel()
    if np.any(C > E):
        raise CorruptStructureError("row range with C > E")
    if C.size and (C[0] != 0 or E[-1] != P or np.any(C[1:] != E[:-1])):
        raise CorruptStructureError("row ranges do not partition the entry list")
    if P and (
        np.any(Y.M[:, 0] < 0) or np.any(Y.M[:, 0] > 2)
        or np.any(Y.M[:, 1] < 0) or np.any(Y.M[:, 1] >= n)
    ):
        raise CorruptStructureError("coordinate out of range in M")
    rows = np.repeat(np.arange(3 * n), E - C)
    cols = 3 * Y.M[:, 1] + Y.M[:, 0]
    if np.any(rows == cols):
        raise CorruptStructureError("diagonal coordinate stored in F")
    keys = rows * (3 * n) + cols
    uniq, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 1):
        row = uniq[counts > 1][0] // (3 * n)
        raise CorruptStructureError(
            f"duplicate coordinates in row (i={row % 3}, k={row // 3})"
        )
    return rows, cols


def decompress(Y):
    """Scatter ``{D, F, M, C, E}`` back into a dense hypermatrix."""
    rows, cols = check_structure(Y)
    n = Y.n_nodes
    flat = np.zeros((3 * n, 3 * n), dtype=complex)
    flat[rows, cols] = Y.F
    idx = np.arange(3 * n)
    flat[idx, idx] = Y.D.T.ravel()
    return DenseAdmittance(flat.reshape(n, 3, n, 3).transpose(1, 3, 0, 2))


@numba.njit(cache=True, fastmath={"contract"})
def _contract(D, F, col, start, stop, v, with_diagonal):
    n = D.shape[1]
    d = D.ravel()
    x = v.ravel()  # x[j * n + m] = v[j, m]
    out = np.empty(3 * n, dtype=np.complex128)
    for k in range(n):
        for i in range(3):
            row = 3 * k + i
            o = i * n + k
            # real and imaginary parts accumulated separately: avoids the
            # NaN-recovery branch of the complex product in the hot loop
            re = 0.0
            im = 0.0
            if with_diagonal:
                a = d[o]
                b = x[o]
                re = a.real * b.real - a.imag * b.imag
                im = a.real * b.imag + a.imag * b.real
            for p in range(start[row], stop[row]):
                a = F[p]
                b = x[col[p]]
                re += a.real * b.real - a.imag * b.imag
                im += a.real * b.imag + a.imag * b.real
            out[o] = complex(re, im)
    return out.reshape(3, n)


def _field(Y, v):
    if not (
        type(v) is np.ndarray and v.dtype == np.complex128 and v.flags.c_contiguous
    ):
        v = np.ascontiguousarray(v, dtype=np.complex128)
    if v.shape != (3, Y.n_nodes):
        raise ValueError(f"phase field must have shape (3, {Y.n_nodes}), got {v.shape}")
    return v


def apply_sparse(Y, v):
    """Nodal currents from voltages using the compressed structure.

    For every row ``(i, k)``: ``D[i, k] * v[i, k]`` plus ``F[p] * v[j, m]``
    over the row's entries ``p`` with ``(j, m) = M[p]``.
    """
    return _contract(*Y._kernel, _field(Y, v), True)


def apply_offdiagonal(Y, v):
    """The ``F`` part of the contraction alone (no ``D * v`` term)."""
    return _contract(*Y._kernel, _field(Y, v), False)


def memory_positions(Y):
    """Stored scalars, one per complex value: ``2P (M) + P (F) + 9N (D, C, E)``."""
    return 3 * Y.nnz + 9 * Y.n_nodes


def to_csr(Y):
    """Flat 3N x 3N scipy CSR matrix (index ``3 * node + phase``)."""
    rows, cols = check_structure(Y)
    n = Y.n_nodes
    idx = np.arange(3 * n)
    data = np.concatenate((Y.D.T.ravel(), Y.F))
    return scipy.sparse.csr_matrix(
        (data, (np.concatenate((idx, rows)), np.concatenate((idx, cols)))),
        shape=(3 * n, 3 * n),
    )


def to_dict(Y):
    def pairs(a):
        return np.stack((a.real, a.imag), axis=-1).tolist()

    return {
        "n_nodes": Y.n_nodes,
        "D": pairs(Y.D),
        "F": pairs(Y.F),
        "M": Y.M.tolist(),
        "C": Y.C.tolist(),
        "E": Y.E.tolist(),
    }


def from_dict(doc):
    def cplx(a):
        a = np.asarray(a, dtype=float)
        if a.size == 0:
            return np.zeros(0, dtype=complex)
        return a[..., 0] + 1j * a[..., 1]

    return SparseAdmittance(
        n_nodes=doc["n_nodes"],
        D=cplx(doc["D"]),
        F=cplx(doc["F"]),
        M=np.asarray(doc["M"], dtype=np.int64).reshape(-1, 2),
        C=doc["C"],
        E=doc["E"],
    )
