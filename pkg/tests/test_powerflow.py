import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from gridflow import bench
from gridflow.admittance import build
from gridflow.errors import UndervoltageError, ZeroDiagonalError
from gridflow.cli import fixtures_dir
from gridflow.model import Branch, FeederModel, Load, load_feeder
from gridflow.powerflow import (
    TRANSFORM_M,
    ImplicitStep,
    SolveOptions,
    compute_losses,
    delta_to_line_currents,
    fixed_point_step,
    line_to_line_voltages,
    load_injection,
    nodal_injections,
    power_mismatch,
    solve,
    total_load,
)
from gridflow.sparse import apply_sparse, compress

Z = 0.01 + 0.1j
S = 0.1 + 0.05j

# receiving-end voltages of the two-node case, from the closed-form quadratic
TWO_NODE_V = np.array(
    [
        0.9938722000679934 - 0.009500000000000001j,
        -0.505163341369949 - 0.8559685733740119j,
        -0.48870885869804437 + 0.8654685733740124j,
    ]
)


def two_node():
    return FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, np.full(3, S))])


def test_closed_form_oracle_is_frozen():
    v = oracles.two_node_closed_form(Z, S, oracles.BALANCED)
    np.testing.assert_allclose(v, TWO_NODE_V, rtol=0, atol=1e-15)


@pytest.mark.parametrize("method", ["zbus", "jacobi"])
def test_two_node_matches_closed_form(method):
    f = two_node()
    report = solve(compress(build(f)), f, SolveOptions(tol=1e-12, method=method))
    assert report.converged and report.status == "converged"
    np.testing.assert_allclose(report.v[:, 1], TWO_NODE_V, rtol=0, atol=1e-10)
    np.testing.assert_array_equal(report.v[:, 0], f.slack_voltage)


def test_two_node_losses_are_line_losses():
    f = two_node()
    report = solve(compress(build(f)), f, SolveOptions(tol=1e-12))
    i_line = np.conj(S / TWO_NODE_V)
    expected = Z * np.sum(np.abs(i_line) ** 2)
    assert abs(report.losses - expected) < 1e-10


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 12),
    shunt=st.booleans(),
    delta=st.booleans(),
)
def test_zbus_matches_newton(seed, n, shunt, delta):
    f = oracles.random_feeder(np.random.default_rng(seed), n, shunt=shunt, delta=delta)
    Y = compress(build(f))
    report = solve(Y, f, SolveOptions(tol=1e-12))
    assert report.converged
    np.testing.assert_allclose(report.v, oracles.newton_solve(f), rtol=0, atol=1e-10)
    # power balance: slack injection minus load equals losses
    slack_power = np.sum(report.v[:, 0] * np.conj(report.i[:, 0]))
    assert abs(slack_power - total_load(f) - report.losses) < 1e-10
    assert abs(report.losses - oracles.branch_losses(f, report.v)) < 1e-10


def test_jacobi_agrees_with_zbus_on_a_star():
    rng = np.random.default_rng(5)
    branches = [Branch(0, k, oracles.random_impedance(rng)) for k in range(1, 6)]
    loads = [Load(k, np.full(3, 0.02 + 0.01j)) for k in range(1, 6)]
    f = FeederModel(6, 0, branches, loads)
    Y = compress(build(f))
    a = solve(Y, f, SolveOptions(tol=1e-12, method="jacobi"))
    b = solve(Y, f, SolveOptions(tol=1e-12, method="zbus"))
    assert a.converged and b.converged
    np.testing.assert_allclose(a.v, b.v, atol=1e-10)


def test_fixed_point_step_residual_and_slack():
    f = bench.generate_radial(10, 0)
    Y = compress(build(f))
    v0 = f.flat_start()
    v1, r = fixed_point_step(Y, v0, f)
    np.testing.assert_array_equal(v1[:, 0], v0[:, 0])
    assert r == pytest.approx(np.abs(v1 - v0).max())
    # a fixed point of the load flow is a fixed point of the sweep
    v = solve(Y, f, SolveOptions(tol=1e-13)).v
    assert fixed_point_step(Y, v, f)[1] < 1e-10


def test_fixed_point_step_zero_diagonal():
    f = FeederModel(3, 0, [Branch(0, 1, np.eye(3) * Z)])  # node 2 isolated
    with pytest.raises(ZeroDiagonalError, match="node 2"):
        fixed_point_step(compress(build(f)), f.flat_start(), f)


def test_implicit_step_is_exact_for_a_fixed_point():
    f = bench.generate_radial(15, 3)
    Y = compress(build(f))
    v = solve(Y, f, SolveOptions(tol=1e-13)).v
    assert ImplicitStep(Y, f)(v)[1] < 1e-12


def test_max_iter_status():
    f = bench.generate_radial(20, 1)
    report = solve(compress(build(f)), f, SolveOptions(max_iter=1))
    assert report.status == "max_iter" and not report.converged
    assert report.iterations == 1


@pytest.mark.parametrize("method", ["zbus", "jacobi"])
def test_overload_reports_divergence(method):
    f = FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, np.full(3, 10.0 + 5j))])
    report = solve(compress(build(f)), f, SolveOptions(method=method))
    assert not report.converged
    assert report.status in ("diverged", "max_iter")
    assert np.all(np.isfinite(report.v))


def test_jacobi_diverges_on_deep_coupled_trees():
    # the scalar-diagonal splitting does not contract on deep, fully coupled feeders
    f = bench.generate_radial(119, 7, "full")
    report = solve(compress(build(f)), f, SolveOptions(method="jacobi"))
    assert report.status == "diverged"


@pytest.mark.parametrize(
    "kwargs",
    [{"tol": 0}, {"tol": -1}, {"max_iter": 0}, {"method": "newton"}, {"balance_tol": 0}],
)
def test_options_validation(kwargs):
    with pytest.raises(ValueError):
        SolveOptions(**kwargs)


def test_report_json_is_deterministic():
    f = bench.generate_radial(8, 2)
    Y = compress(build(f))
    a = solve(Y, f).to_json()
    assert a == solve(Y, f).to_json()
    doc = json.loads(a)
    assert doc["converged"] is True
    assert np.array(doc["v"]).shape == (3, 8, 2)


def test_transform_matrix():
    np.testing.assert_array_equal(TRANSFORM_M, [[1, -1, 0], [0, 1, -1], [-1, 0, 1]])
    assert not TRANSFORM_M.flags.writeable


def test_line_to_line_of_equal_phases_is_zero():
    v = np.tile([[0.9 + 0.1j], [0.9 + 0.1j], [0.9 + 0.1j]], (1, 4))
    assert np.all(line_to_line_voltages(v) == 0)


def test_balanced_line_to_line_values():
    vll = line_to_line_voltages(oracles.BALANCED[:, None])[:, 0]
    expected = np.sqrt(3) * oracles.BALANCED * np.exp(1j * np.pi / 6)
    np.testing.assert_allclose(vll, expected, rtol=0, atol=1e-14)


@settings(max_examples=50)
@given(
    st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=6, max_size=6)
)
def test_delta_line_currents_sum_to_zero(values):
    i_delta = np.array(values).reshape(3, 2)
    i_line = delta_to_line_currents(i_delta)
    assert np.all(np.abs(i_line.sum(axis=0)) <= 1e-14 * max(1.0, np.abs(i_delta).max()))


def test_delta_load_matches_leg_currents():
    v = oracles.BALANCED * np.array([1.0, 0.97, 1.02])
    f = FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, [0.1, 0.05 + 0.01j, 0.07j], "delta")])
    vv = np.stack([f.slack_voltage, v], axis=1)
    np.testing.assert_allclose(
        load_injection(f.loads[0], vv), oracles.drawn_currents(f, vv)[:, 1], rtol=1e-14
    )
    np.testing.assert_allclose(nodal_injections(f, vv), -oracles.drawn_currents(f, vv), rtol=1e-14)


def test_undervoltage_guard():
    f = two_node()
    v = f.flat_start()
    v[0, 1] = 0
    with pytest.raises(UndervoltageError):
        nodal_injections(f, v)


def test_compute_losses_matches_current_field():
    f = bench.generate_radial(6, 0)
    Y = compress(build(f))
    rng = np.random.default_rng(0)
    v = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    i = apply_sparse(Y, v)
    assert compute_losses(v, i) == pytest.approx(np.vdot(i, v))


def test_radial4_residuals_decrease():
    f = load_feeder(fixtures_dir() / "radial4.json")
    report = solve(compress(build(f)), f)
    assert report.converged
    trace = report.residual_trace
    assert all(b < a for a, b in zip(trace[1:], trace[2:]))


@pytest.mark.parametrize("method", ["zbus", "jacobi"])
def test_unloaded_feeder_is_solved_by_flat_start(method):
    f = bench.generate_radial(25, 0)
    f = FeederModel(f.n_nodes, f.slack, f.branches)
    report = solve(compress(build(f)), f, SolveOptions(method=method))
    assert report.converged and report.iterations == 1
    assert report.residual_trace[0] < 1e-13  # row sums vanish up to round-off
    assert abs(report.losses) < 1e-12


def test_converged_solution_closes_the_power_balance():
    f = bench.generate_radial(30, 11)
    Y = compress(build(f))
    report = solve(Y, f)
    assert report.residual_trace[-1] <= 1e-8
    assert power_mismatch(Y, f, report.v) <= 1e-10
    # the residual in current space stays within tol times the largest self-admittance
    mismatch = np.abs(report.i - nodal_injections(f, report.v))[:, 1:].max()
    assert mismatch <= 1e-8 * np.abs(Y.D).max()


@pytest.mark.parametrize(
    "v, expected",
    [(np.array([1, 0, 0]), np.array([1, 0, -1]))],
)
def test_line_to_line_direct(v, expected):
    np.testing.assert_array_equal(line_to_line_voltages(v[:, None])[:, 0], expected)


@pytest.mark.parametrize(
    "i_delta, expected",
    [([0, 0, 0], [0, 0, 0]), ([1, 1, 1], [0, 0, 0]), ([1, 0, 0], [1, -1, 0])],
)
def test_delta_to_line_examples(i_delta, expected):
    out = delta_to_line_currents(np.array(i_delta, dtype=complex)[:, None])[:, 0]
    np.testing.assert_array_equal(out, expected)


def test_delta_unit_load_on_balanced_voltages():
    f = FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, [1, 0, 0], "delta")])
    i = load_injection(f.loads[0], f.flat_start())
    np.testing.assert_allclose(np.abs(i), [1 / np.sqrt(3), 1 / np.sqrt(3), 0], atol=1e-15)


def test_wye_unit_load():
    f = FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, [1, 0, 0])])
    v = np.ones((3, 2), dtype=complex)
    np.testing.assert_array_equal(load_injection(f.loads[0], v), [1, 0, 0])


def test_flat_start_is_exact_without_loads():
    f = bench.generate_radial(12, 5)
    f = FeederModel(f.n_nodes, f.slack, f.branches)
    v, r = fixed_point_step(compress(build(f)), f.flat_start(), f)
    assert r < 1e-13


def test_overload_also_defeats_the_newton_oracle():
    # 100x the two-node load is beyond the nose of the PV curve
    f = FeederModel(2, 0, [Branch(0, 1, np.eye(3) * Z)], [Load(1, np.full(3, 100 * S))])
    w = Z * np.conj(100 * S)
    assert (1 - 2 * w.real) ** 2 - 4 * abs(w) ** 2 < 0  # no real |v|^2 root
    assert not solve(compress(build(f)), f).converged


@pytest.mark.parametrize("name", ["two_node.json", "radial4.json", "radial119.json", "mixed119.json"])
def test_bundled_fixtures_match_newton(name):
    f = load_feeder(fixtures_dir() / name)
    report = solve(compress(build(f)), f)
    assert report.converged
    assert np.abs(report.v - oracles.newton_solve(f)).max() <= 1e-8
