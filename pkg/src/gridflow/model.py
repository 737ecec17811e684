"""Feeder description: hyper-nodes, three-phase branches, loads and the slack.

Every electrical quantity is per-unit complex. A nodal quantity such as a
voltage ``v[j, m]`` is held as a ``(3, N)`` complex array indexed by phase
``j`` (0, 1, 2 for a, b, c) and hyper-node ``m``; that array is what the rest
of the package calls a phase field.

The JSON feeder format (version 1) is::

    {"n_nodes": int, "slack": int,
     "slack_voltage": [[re, im] x 3],            # optional
     "branches": [{"from": int, "to": int,
                   "z": 3x3 [re, im], "b_from": 3x3 [re, im], "b_to": 3x3 [re, im]}],
     "loads": [{"node": int, "connection": "wye" | "delta", "s": [[re, im] x 3]}],
     "base": {"kV": number, "MVA": number}}      # optional, informational

Node indices are 0-based. Shunt admittances are already lumped per branch end
(a pi-section's half charging goes in ``b_from`` and ``b_to``). Parallel
branches must be merged before writing the file. Load powers are consumption.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeederSchemaError, FeederSemanticError, FeederSyntaxError
from .linalg3 import is_singular

FORMAT_VERSION = 1
PHASES = ("a", "b", "c")
CONNECTIONS = ("wye", "delta")

_A = np.exp(2j * np.pi / 3)
DEFAULT_SLACK_VOLTAGE = np.array([1.0 + 0j, _A**2, _A])


def _frozen(values, shape, name):
    arr = np.array(values, dtype=complex)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


def phase_field(values, n_nodes=None):
    """Coerce ``values`` to a (3, N) complex array, checking the shape."""
    arr = np.asarray(values, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != 3:
        raise ValueError(f"phase field must have shape (3, N), got {arr.shape}")
    if n_nodes is not None and arr.shape[1] != n_nodes:
        raise ValueError(
            f"phase field has {arr.shape[1]} nodes, expected {n_nodes}"
        )
    return arr


@dataclass(frozen=True, eq=False)
class Branch:
    """Three-phase pi-section between hyper-nodes ``from_node`` and ``to_node``."""

    from_node: int
    to_node: int
    z: np.ndarray
    b_from: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    b_to: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        for name in ("z", "b_from", "b_to"):
            object.__setattr__(self, name, _frozen(getattr(self, name), (3, 3), name))

    def __eq__(self, other):
        if not isinstance(other, Branch):
            return NotImplemented
        return (
            (self.from_node, self.to_node) == (other.from_node, other.to_node)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.b_from, other.b_from)
            and np.array_equal(self.b_to, other.b_to)
        )


@dataclass(frozen=True, eq=False)
class Load:
    """Constant-power load. ``s`` is per phase (wye) or per leg ab, bc, ca (delta)."""

    node: int
    s: np.ndarray
    connection: str = "wye"

    def __post_init__(self):
        object.__setattr__(self, "s", _frozen(self.s, (3,), "s"))

    def __eq__(self, other):
        if not isinstance(other, Load):
            return NotImplemented
        return (
            self.node == other.node
            and self.connection == other.connection
            and np.array_equal(self.s, other.s)
        )


@dataclass(frozen=True, eq=False)
class FeederModel:
    n_nodes: int
    slack: int
    branches: tuple
    loads: tuple = ()
    slack_voltage: np.ndarray = field(default_factory=lambda: DEFAULT_SLACK_VOLTAGE)
    base: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(
            self, "slack_voltage", _frozen(self.slack_voltage, (3,), "slack_voltage")
        )

    def __eq__(self, other):
        if not isinstance(other, FeederModel):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.slack == other.slack
            and np.array_equal(self.slack_voltage, other.slack_voltage)
            and self.branches == other.branches
            and self.loads == other.loads
            and self.base == other.base
        )

    def flat_start(self):
        """Slack voltage replicated at every hyper-node, shape (3, N)."""
        return np.repeat(self.slack_voltage[:, None], self.n_nodes, axis=1)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    path: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


# -- validation -------------------------------------------------------------


def validate_feeder(f):
    """Check a FeederModel against its invariants.

    Returns a list of Diagnostic; errors break an invariant, warnings flag
    legal but unusual data (a non-symmetric series impedance).
    """
    diags = []

    def error(path, msg):
        diags.append(Diagnostic("error", path, msg))

    n = f.n_nodes
    if n < 2:
        error("n_nodes", f"need at least 2 hyper-nodes, got {n}")
    if not 0 <= f.slack < n:
        error("slack", f"slack node {f.slack} out of range [0, {n})")
    if not np.all(np.isfinite(f.slack_voltage)):
        error("slack_voltage", "non-finite value")

    seen = {}
    for e, br in enumerate(f.branches):
        path = f"branches[{e}]"
        ends_ok = True
        for attr, key in (("from_node", "from"), ("to_node", "to")):
            node = getattr(br, attr)
            if not 0 <= node < n:
                error(f"{path}.{key}", f"node {node} out of range [0, {n})")
                ends_ok = False
        if br.from_node == br.to_node:
            error(path, f"branch joins node {br.from_node} to itself")
            ends_ok = False
        if ends_ok:
            pair = frozenset((br.from_node, br.to_node))
            if pair in seen:
                error(path, f"duplicates branches[{seen[pair]}]; merge parallel branches")
            else:
                seen[pair] = e
        for name in ("z", "b_from", "b_to"):
            if not np.all(np.isfinite(getattr(br, name))):
                error(f"{path}.{name}", "non-finite value")
        if np.all(np.isfinite(br.z)):
            if is_singular(br.z):
                error(f"{path}.z", "singular series impedance")
            elif not np.array_equal(br.z, br.z.T):
                diags.append(
                    Diagnostic("warning", f"{path}.z", "non-symmetric impedance")
                )

    for q, load in enumerate(f.loads):
        path = f"loads[{q}]"
        if not 0 <= load.node < n:
            error(f"{path}.node", f"node {load.node} out of range [0, {n})")
        elif load.node == f.slack:
            error(f"{path}.node", "load placed on the slack node")
        if load.connection not in CONNECTIONS:
            error(f"{path}.connection", f"unknown connection {load.connection!r}")
        if not np.all(np.isfinite(load.s)):
            error(f"{path}.s", "non-finite value")

    if n >= 2 and 0 <= f.slack < n:
        unreached = _unreached_nodes(f)
        if unreached:
            shown = ", ".join(map(str, unreached[:10]))
            more = "" if len(unreached) <= 10 else f" (+{len(unreached) - 10} more)"
            error("branches", f"grid is disconnected; unreachable nodes: {shown}{more}")
    return diags


def _unreached_nodes(f):
    adj = [[] for _ in range(f.n_nodes)]
    for br in f.branches:
        if 0 <= br.from_node < f.n_nodes and 0 <= br.to_node < f.n_nodes:
            adj[br.from_node].append(br.to_node)
            adj[br.to_node].append(br.from_node)
    reached = {f.slack}
    queue = deque([f.slack])
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)
    return [k for k in range(f.n_nodes) if k not in reached]


# -- JSON ingestion -----------------------------------------------------------


def _reject_constant(token):
    raise ValueError(f"non-finite number {token} is not allowed")


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise FeederSchemaError("expected an object", path)
    if key not in obj:
        raise FeederSchemaError(f"missing field {key!r}", path or "<root>")
    return obj[key]


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise FeederSchemaError(f"expected an integer, got {value!r}", path)
    return value


def _complex(value, path):
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in value)
    ):
        raise FeederSchemaError(f"expected a [re, im] pair, got {value!r}", path)
    return complex(float(value[0]), float(value[1]))


def _vector3(value, path):
    if not isinstance(value, list) or len(value) != 3:
        raise FeederSchemaError("expected 3 [re, im] pairs", path)
    return np.array([_complex(x, f"{path}[{j}]") for j, x in enumerate(value)])


def _matrix3(value, path):
    if not isinstance(value, list) or len(value) != 3:
        raise FeederSchemaError("expected a 3x3 array of [re, im] pairs", path)
    return np.array([_vector3(row, f"{path}[{i}]") for i, row in enumerate(value)])


_TOP_KEYS = {"n_nodes", "slack", "slack_voltage", "branches", "loads", "base", "name"}


def feeder_from_dict(doc):
    """Build a FeederModel from decoded JSON without running validation."""
    if not isinstance(doc, dict):
        raise FeederSchemaError("top level must be an object")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise FeederSchemaError(f"unknown field {unknown[0]!r}", unknown[0])
    n_nodes = _int(_require(doc, "n_nodes", ""), "n_nodes")
    slack = _int(_require(doc, "slack", ""), "slack")
    if "slack_voltage" in doc:
        slack_voltage = _vector3(doc["slack_voltage"], "slack_voltage")
    else:
        slack_voltage = DEFAULT_SLACK_VOLTAGE

    raw_branches = _require(doc, "branches", "")
    if not isinstance(raw_branches, list):
        raise FeederSchemaError("expected a list", "branches")
    branches = []
    for e, raw in enumerate(raw_branches):
        path = f"branches[{e}]"
        branches.append(
            Branch(
                from_node=_int(_require(raw, "from", path), f"{path}.from"),
                to_node=_int(_require(raw, "to", path), f"{path}.to"),
                z=_matrix3(_require(raw, "z", path), f"{path}.z"),
                b_from=_matrix3(_require(raw, "b_from", path), f"{path}.b_from"),
                b_to=_matrix3(_require(raw, "b_to", path), f"{path}.b_to"),
            )
        )

    raw_loads = doc.get("loads", [])
    if not isinstance(raw_loads, list):
        raise FeederSchemaError("expected a list", "loads")
    loads = []
    for q, raw in enumerate(raw_loads):
        path = f"loads[{q}]"
        connection = _require(raw, "connection", path)
        if connection not in CONNECTIONS:
            raise FeederSchemaError(
                f"connection must be 'wye' or 'delta', got {connection!r}",
                f"{path}.connection",
            )
        loads.append(
            Load(
                node=_int(_require(raw, "node", path), f"{path}.node"),
                s=_vector3(_require(raw, "s", path), f"{path}.s"),
                connection=connection,
            )
        )

    base = doc.get("base")
    if base is not None:
        if not isinstance(base, dict):
            raise FeederSchemaError("expected an object", "base")
        for key, value in base.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise FeederSchemaError("expected a number", f"base.{key}")

    return FeederModel(
        n_nodes=n_nodes,
        slack=slack,
        branches=branches,
        loads=loads,
        slack_voltage=slack_voltage,
        base=base,
    )


def parse_feeder(text):
    """Parse and validate a JSON feeder document.

    Raises FeederSyntaxError for malformed JSON, FeederSchemaError for a
    missing or ill-shaped field, and FeederSemanticError (carrying the
    error diagnostics) when the decoded feeder breaks a model invariant.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise FeederSyntaxError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    except ValueError as exc:
        raise FeederSyntaxError(str(exc)) from exc
    feeder = feeder_from_dict(doc)
    errors = [d for d in validate_feeder(feeder) if d.severity == "error"]
    if errors:
        first = errors[0]
        raise FeederSemanticError(first.message, first.path, diagnostics=errors)
    return feeder


def load_feeder(path):
    return parse_feeder(Path(path).read_text(encoding="utf-8"))


def _pair(c):
    c = complex(c)
    return [c.real, c.imag]


def feeder_to_dict(f):
    doc = {
        "n_nodes": f.n_nodes,
        "slack": f.slack,
        "slack_voltage": [_pair(c) for c in f.slack_voltage],
        "branches": [
            {
                "from": br.from_node,
                "to": br.to_node,
                "z": [[_pair(c) for c in row] for row in br.z],
                "b_from": [[_pair(c) for c in row] for row in br.b_from],
                "b_to": [[_pair(c) for c in row] for row in br.b_to],
            }
            for br in f.branches
        ],
        "loads": [
            {"node": ld.node, "connection": ld.connection, "s": [_pair(c) for c in ld.s]}
            for ld in f.loads
        ],
    }
    if f.base is not None:
        doc["base"] = dict(f.base)
    return doc


def serialize_feeder(f, indent=None):
    """JSON text for ``f``; floats are written with round-trip precision."""
    return json.dumps(feeder_to_dict(f), indent=indent, allow_nan=False)
