"""Constant-power load flow on the compressed admittance hypermatrix.

Two fixed-point maps are available:

``"jacobi"``
    Splits the hypermatrix into its scalar diagonal ``D`` and the rest ``F``
    and updates every non-slack ``(phase, node)`` from the previous iterate,
    ``v <- (i_inj(v) - F v) / D``. Cheap per sweep, but it only contracts
    when the phases are weakly coupled and the feeder is shallow.
``"zbus"`` (default)
    Keeps the network implicit and the loads explicit,
    ``v_N <- Y_NN^-1 (i_inj(v_N) - Y_NS v_S)``, with ``Y_NN`` factorised
    once. Its contraction rate scales with the loading, not the topology.

Load powers are consumption; the current a load injects into the grid is
minus the current it draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .errors import UndervoltageError, ZeroDiagonalError
from .model import phase_field
from .sparse import apply_offdiagonal, apply_sparse, to_csr

# m[i, j] = d v'_i / d v_j: phase-to-neutral -> line-to-line (ab, bc, ca)
TRANSFORM_M = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])
TRANSFORM_M.flags.writeable = False

MIN_VOLTAGE = 1e-6
METHODS = ("zbus", "jacobi")


def line_to_line_voltages(v):
    """``v'[i, m] = sum_j m[i, j] v[j, m]``, i.e. (v_a - v_b, v_b - v_c, v_c - v_a)."""
    return np.tensordot(TRANSFORM_M, np.asarray(v, dtype=complex), axes=1)


def delta_to_line_currents(i_delta):
    """Line currents ``i[j, m] = sum_i m[i, j] i'[i, m]`` from delta leg currents."""
    return np.tensordot(TRANSFORM_M.T, np.asarray(i_delta, dtype=complex), axes=1)


def load_injection(load, v):
    """Per-phase current drawn by ``load`` at voltages ``v`` (shape (3,))."""
    v_node = np.asarray(v, dtype=complex)[:, load.node]
    s = load.s
    if load.connection == "delta":
        v_leg = line_to_line_voltages(v_node)
        _check_voltage(v_leg, s, f"loads at node {load.node} (line-to-line)")
        return delta_to_line_currents(_draw(s, v_leg))
    _check_voltage(v_node, s, f"load at node {load.node}")
    return _draw(s, v_node)


def _draw(s, v):
    out = np.zeros(np.shape(s), dtype=complex)
    on = s != 0
    out[on] = np.conj(s[on] / v[on])
    return out


def _check_voltage(v, s, what):
    low = (s != 0) & (np.abs(v) < MIN_VOLTAGE)
    if np.any(low):
        raise UndervoltageError(f"{what}: voltage magnitude below {MIN_VOLTAGE:g}")


def load_powers(f):
    """Wye and delta constant-power tables, each (3, N), summed per node."""
    s_wye = np.zeros((3, f.n_nodes), dtype=complex)
    s_delta = np.zeros((3, f.n_nodes), dtype=complex)
    for load in f.loads:
        table = s_delta if load.connection == "delta" else s_wye
        table[:, load.node] += load.s
    return s_wye, s_delta


def nodal_injections(f, v, powers=None):
    """Current injected into the grid by all loads, shape (3, N)."""
    s_wye, s_delta = load_powers(f) if powers is None else powers
    v = phase_field(v, f.n_nodes)
    _check_voltage(v, s_wye, "wye load")
    drawn = _draw(s_wye, v)
    if np.any(s_delta):
        v_leg = line_to_line_voltages(v)
        _check_voltage(v_leg, s_delta, "delta load")
        drawn += delta_to_line_currents(_draw(s_delta, v_leg))
    return -drawn


def total_load(f):
    """Total complex power consumed by the constant-power loads."""
    return complex(sum(load.s.sum() for load in f.loads))


def fixed_point_step(Y, v, f, powers=None):
    """One Jacobi sweep of the diagonal/off-diagonal splitting.

    Returns ``(v_next, residual)`` where the residual is the largest voltage
    change over non-slack rows. Slack rows are copied unchanged.
    """
    v = phase_field(v, Y.n_nodes)
    free = np.ones(Y.n_nodes, dtype=bool)
    free[f.slack] = False
    D = Y.D[:, free]
    if np.any(D == 0):
        i, k = np.argwhere(D == 0)[0]
        node = np.flatnonzero(free)[k]
        raise ZeroDiagonalError(f"zero self-admittance at phase {i}, node {node}")
    rhs = nodal_injections(f, v, powers) - apply_offdiagonal(Y, v)
    v_next = v.copy()
    v_next[:, free] = rhs[:, free] / D
    residual = float(np.abs(v_next - v).max(initial=0.0))
    return v_next, residual


class ImplicitStep:
    """``v_N <- Y_NN^-1 (i_inj(v_N) - Y_NS v_S)`` with a cached sparse LU of ``Y_NN``."""

    def __init__(self, Y, f):
        self.f = f
        self.powers = load_powers(f)
        n = Y.n_nodes
        free = np.ones(n, dtype=bool)
        free[f.slack] = False
        self.free_nodes = np.flatnonzero(free)
        rows = (3 * self.free_nodes[:, None] + np.arange(3)).ravel()
        slack_rows = 3 * f.slack + np.arange(3)
        A = to_csr(Y)
        self.lu = scipy.sparse.linalg.splu(A[rows][:, rows].tocsc())
        self.slack_term = A[rows][:, slack_rows] @ f.slack_voltage

    def __call__(self, v):
        inj = nodal_injections(self.f, v, self.powers)
        rhs = inj[:, self.free_nodes].T.ravel() - self.slack_term
        v_next = np.array(v, dtype=complex)
        v_next[:, self.free_nodes] = self.lu.solve(rhs).reshape(-1, 3).T
        residual = float(np.abs(v_next - v).max(initial=0.0))
        return v_next, residual


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    divergence_limit: float = 10.0
    method: str = "zbus"
    balance_tol: float = 1e-10  # |slack injection - load - losses|, p.u.

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.balance_tol > 0:
            raise ValueError("balance_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass(frozen=True, eq=False)
class SolveReport:
    v: np.ndarray
    i: np.ndarray
    losses: complex
    iterations: int
    converged: bool
    status: str  # "converged", "max_iter" or "diverged"
    residual_trace: list = field(default_factory=list)

    def to_dict(self):
        def pairs(a):
            return np.stack((a.real, a.imag), axis=-1).tolist()

        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "losses": [self.losses.real, self.losses.imag],
            "v": pairs(self.v),
            "i": pairs(self.i),
            "residual_trace": list(self.residual_trace),
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


def power_mismatch(Y, f, v):
    """``|slack injection - total load - losses|`` at ``v``.

    Equals the load-side mismatch ``|sum_(k != slack) v_k conj(i_k) + s_load|``.
    """
    i = apply_sparse(Y, v)
    free = np.ones(Y.n_nodes, dtype=bool)
    free[f.slack] = False
    return abs(np.sum(v[:, free] * np.conj(i[:, free])) + total_load(f))


def solve(Y, f, opts=None):
    """Iterate the chosen fixed-point map from a flat start.

    The run converges once a step moves no voltage by more than ``tol`` and
    the power balance closes within ``balance_tol``. Non-convergence is reported in the returned SolveReport (``status`` is
    ``"max_iter"`` or ``"diverged"``) rather than raised. A voltage collapse
    that trips the undervoltage guard counts as divergence.
    """
    opts = opts or SolveOptions()
    if opts.method == "zbus":
        step = ImplicitStep(Y, f)
    else:
        powers = load_powers(f)

        def step(v):
            return fixed_point_step(Y, v, f, powers)

    v = f.flat_start()
    trace = []
    status = "max_iter"
    for _ in range(opts.max_iter):
        try:
            v_next, residual = step(v)
        except UndervoltageError:
            status = "diverged"
            break
        if not np.isfinite(residual) or np.abs(v_next).max() > opts.divergence_limit:
            if np.isfinite(residual):
                trace.append(residual)
            status = "diverged"
            break
        v = v_next
        trace.append(residual)
        if residual <= opts.tol and power_mismatch(Y, f, v) <= opts.balance_tol:
            status = "converged"
            break

    i = apply_sparse(Y, v)
    return SolveReport(
        v=v,
        i=i,
        losses=compute_losses(v, i),
        iterations=len(trace),
        converged=status == "converged",
        status=status,
        residual_trace=trace,
    )


def compute_losses(v, i):
    """Total complex losses ``s_L = sum_ik v_ik conj(i_ik)``."""
    v = phase_field(v)
    i = phase_field(i, v.shape[1])
    return complex(np.sum(v * np.conj(i)))
