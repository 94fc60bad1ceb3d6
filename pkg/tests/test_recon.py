"""Conservation penalty, SCA pressure recovery and closed-form flow recovery."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import MIXED_CELLS
from oracles import fd_gradient, grid_minimise_2d, projected_gradient_flow
from wdntsp.errors import RecoveryError
from wdntsp.experiment import band, make_scenario
from wdntsp.hydraulics import HeadLossModel, orient_to_flow
from wdntsp.network import generate_synthetic
from wdntsp.recon import (ScaConfig, g_value_grad, implied_flows, nmse, reconstruct_flow,
                          sca_reconstruct_pressure, solve_subproblem)
from wdntsp.sampling import SamplingSet, interpolate, interpolation_operator, maxdet_place
from wdntsp.spectral import eig_sym
from wdntsp.topology import build_b1, build_complex


# ------------------------------------------------------------------ nmse

def test_nmse_examples():
    t = np.array([1.0, -2.0, 3.0])
    assert nmse(t, t) == 0.0
    assert nmse(np.zeros(3), t) == 1.0
    assert nmse(2 * t, t) == 1.0
    with pytest.raises(ValueError):
        nmse(t, np.zeros(3))
    with pytest.raises(ValueError):
        nmse(t[:2], t)


# ------------------------------------------------------------------ penalty

def test_penalty_vanishes_when_flows_balance(triangle, rng):
    B1 = build_b1(triangle).entries.astype(float)
    C = np.array([1.0, 2.0, 3.0])
    p = rng.uniform(10, 20, 3)
    d = B1 @ implied_flows(p, B1, C, 1.852)
    val, grad, converged = g_value_grad(p, B1, C, 1.852, d)
    assert val == 0.0 and converged and not np.any(grad)


def test_penalty_of_constant_heads_without_demand(triangle):
    B1 = build_b1(triangle).entries
    val, _, converged = g_value_grad(np.full(3, 7.0), B1, np.ones(3), 2.0, np.zeros(3))
    assert val == 0.0 and converged


@pytest.mark.parametrize("alpha", [1.852, 2.0])
def test_gradient_matches_finite_differences_on_triangle(triangle, rng, alpha):
    B1 = build_b1(triangle).entries.astype(float)
    C = rng.uniform(0.5, 2.0, 3)
    d = np.array([-0.3, 0.1, 0.2])
    for _ in range(10):
        p = rng.uniform(1.0, 10.0, 3)
        _, grad, _ = g_value_grad(p, B1, C, alpha, d)
        fd = fd_gradient(p, B1, C, alpha, d)
        assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(fd)


def test_tiny_head_drops_are_floored(triangle):
    B1 = build_b1(triangle).entries.astype(float)
    val, grad, _ = g_value_grad(np.full(3, 5.0), B1, np.ones(3), 1.852, np.array([-1.0, 0.5, 0.5]))
    assert np.isfinite(val) and np.all(np.isfinite(grad))


# ------------------------------------------------------------------ subproblem

def test_large_tau_keeps_feasible_point(rng):
    W = rng.normal(size=(4, 4))
    p_nu = rng.uniform(1, 2, 4)
    out = solve_subproblem(p_nu, np.zeros(4), W, rng.normal(size=4), 0.0, 1e9)
    np.testing.assert_allclose(out, p_nu, atol=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_two_variable_subproblem_matches_grid(seed):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(2, 2)) + 2 * np.eye(2)
    y = rng.uniform(-1, 2, 2)
    p_nu = rng.uniform(0, 1, 2)
    grad = rng.normal(size=2)
    lam, tau, mu = 0.7, 0.2, 1e-6

    def F(p):
        dp = p - p_nu
        r = W @ p - y
        return np.sqrt(r @ r + mu * mu) + lam * grad @ dp + tau * dp @ dp

    out = solve_subproblem(p_nu, grad, W, y, lam, tau, mu)
    ref = grid_minimise_2d(F, [0.0, 0.0], [6.0, 6.0])
    assert np.max(np.abs(out - ref)) <= 1e-4
    assert F(out) <= F(ref) + 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0, 5), tau=st.floats(0.01, 5))
def test_subproblem_output_is_nonnegative(seed, lam, tau):
    rng = np.random.default_rng(seed)
    n = 6
    W = np.eye(n) - rng.uniform(0, 0.3, (n, n))
    out = solve_subproblem(rng.uniform(0, 3, n), rng.normal(size=n) * 5, W,
                           rng.normal(size=n), lam, tau)
    assert np.all(out >= 0)


def test_subproblem_rejects_nonpositive_tau():
    with pytest.raises(ValueError):
        solve_subproblem(np.ones(2), np.zeros(2), np.eye(2), np.ones(2), 0.0, 0.0)


def test_config_validation():
    for bad in ({"lam": -1}, {"tau": 0}, {"gamma0": 0}, {"alpha_bar": 1.5},
                {"max_outer": 0}, {"tol_outer": 0}):
        with pytest.raises(ValueError):
            ScaConfig(**bad)


# ------------------------------------------------------------------ SCA

@pytest.fixture(scope="module")
def seed7():
    net = generate_synthetic(7, 50, 0.4)
    scn = make_scenario(net, "hazen_williams", n_snapshots=5, seed=7)
    cx = build_complex(net)
    return scn, cx


def test_full_sampling_without_penalty_returns_observations(seed7):
    scn, cx = seed7
    N = scn.network.n_nodes
    basis = eig_sym(cx.laplacians.L0)
    S = SamplingSet(range(N))
    rep = sca_reconstruct_pressure(scn.state.heads, S, basis.U[:, :5], cx.b1, scn.model.c,
                                   scn.model.alpha, scn.state.demand, ScaConfig(lam=0.0))
    np.testing.assert_allclose(rep.estimate, scn.state.heads, atol=1e-8)


def test_band_limited_truth_matches_interpolation(seed7):
    scn, cx = seed7
    N = scn.network.n_nodes
    basis = eig_sym(cx.laplacians.L0)
    U = basis.U[:, :6]
    truth = U @ np.array([400.0, 3.0, -2.0, 1.5, 1.0, -0.5])
    assert np.all(truth > 0)
    S = maxdet_place(U, 6)
    y = np.where(S.mask(N), truth, 0.0)
    rep = sca_reconstruct_pressure(y, S, U, cx.b1, scn.model.c, scn.model.alpha,
                                   scn.state.demand, ScaConfig(lam=0.0), truth)
    assert np.max(np.abs(rep.estimate - interpolate(y, S, U))) <= 1e-6


def test_cost_trace_is_monotone_and_short(seed7):
    scn, cx = seed7
    N = scn.network.n_nodes
    X = np.column_stack([s.heads for s in scn.snapshots])
    basis = band(X, eig_sym(cx.laplacians.L0), 0.05, budget=30)
    S = maxdet_place(basis.U_sel, 30)
    rep = sca_reconstruct_pressure(np.where(S.mask(N), scn.state.heads, 0.0), S, basis.U_sel,
                                   cx.b1, scn.model.c, scn.model.alpha, scn.state.demand,
                                   ScaConfig(lam=1.0), scn.state.heads)
    assert rep.converged and rep.iterations <= 100
    assert np.all(np.diff(rep.cost_trace) <= 1e-12)
    assert len(rep.surrogate_trace) == rep.iterations
    assert np.all(rep.estimate >= 0)


def test_singular_operator_is_rejected(seed7):
    scn, cx = seed7
    U = np.eye(50)[:, [0, 1]]
    with pytest.raises(RecoveryError):
        sca_reconstruct_pressure(np.zeros(50), SamplingSet([5, 6]), U, cx.b1, scn.model.c,
                                 scn.model.alpha, scn.state.demand, ScaConfig(lam=0.0))


def test_report_export(tmp_path, seed7):
    scn, cx = seed7
    S = SamplingSet(range(50))
    rep = sca_reconstruct_pressure(scn.state.heads, S, np.eye(50)[:, :3], cx.b1, scn.model.c,
                                   scn.model.alpha, scn.state.demand, ScaConfig(lam=0.5),
                                   scn.state.heads)
    rep.write(tmp_path / "r")
    payload = json.loads((tmp_path / "r.json").read_text())
    assert payload["iterations"] == rep.iterations and payload["config"]["lam"] == 0.5
    assert len((tmp_path / "r_estimate.csv").read_text().splitlines()) == 51
    assert len((tmp_path / "r_trace.csv").read_text().splitlines()) == len(rep.cost_trace) + 1


# ------------------------------------------------------------------ flows

def random_flow_instance(seed, n_edges):
    """Oriented solved network with ``n_edges`` pipes, plus a sample set."""
    rng = np.random.default_rng(seed)
    n_nodes = max(3, int(round(n_edges / 1.4)))
    frac = min(1.0, (n_edges - n_nodes + 1) / n_nodes)
    net = generate_synthetic(seed, n_nodes, frac)
    scn = make_scenario(net, "hazen_williams", n_snapshots=3, seed=seed)
    net2, st2 = orient_to_flow(scn.network, scn.state)
    B1 = build_b1(net2).entries.astype(float)
    E = B1.shape[1]
    basis = eig_sym(build_complex(net2).laplacians.L1)
    k = int(rng.integers(1, max(2, E // 3)))
    U = basis.U[:, :k]
    F = maxdet_place(U, int(rng.integers(k, E + 1)))
    return B1, st2.flows, st2.demand, U, F


def test_full_sampling_passes_observations_through(mixed_complex, rng):
    f = rng.uniform(0, 1, 9)
    U = eig_sym(mixed_complex.laplacians.L1).U[:, :3]
    est = reconstruct_flow(f, SamplingSet(range(9)), U, mixed_complex.b1, np.zeros(6), 0.0)
    np.testing.assert_allclose(est.estimate, f, atol=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_closed_form_matches_projected_gradient(seed):
    B1, truth, d, U, F = random_flow_instance(seed, 9 + 4 * seed)
    E = B1.shape[1]
    y = np.where(F.mask(E), truth, 0.0)
    est = reconstruct_flow(y, F, U, B1, d, 0.3)
    ref = projected_gradient_flow(interpolation_operator(F, U), y, B1, d, 0.3)
    if est.clamped == 0:
        assert np.max(np.abs(est.estimate - ref)) <= 1e-6


def test_rank_deficient_normal_matrix(mixed_complex):
    U = np.eye(9)[:, [0, 1, 2]]
    with pytest.raises(RecoveryError, match="singular"):
        reconstruct_flow(np.zeros(9), SamplingSet([4, 5]), U, mixed_complex.b1, np.zeros(6), 0.0)


def test_negative_beta(mixed_complex):
    with pytest.raises(ValueError):
        reconstruct_flow(np.zeros(9), SamplingSet(range(9)), np.eye(9), mixed_complex.b1,
                         np.zeros(6), -0.1)


def test_conservation_helps_on_small_complex(mixed_network):
    scn = make_scenario(mixed_network, "hazen_williams", n_snapshots=5, seed=3)
    net2, st2 = orient_to_flow(scn.network, scn.state)
    sign = np.where(scn.state.flows < 0, -1.0, 1.0)
    cx = build_complex(net2, cells=MIXED_CELLS)
    X = np.column_stack([sign * s.flows for s in scn.snapshots])
    basis = band(X, eig_sym(cx.laplacians.L1), 0.05, budget=5)
    F = maxdet_place(basis.U_sel, 5)
    y = np.where(F.mask(9), st2.flows, 0.0)
    plain = reconstruct_flow(y, F, basis.U_sel, cx.b1, st2.demand, 0.0)
    reg = reconstruct_flow(y, F, basis.U_sel, cx.b1, st2.demand, 0.3)
    assert nmse(reg.estimate, st2.flows) < nmse(plain.estimate, st2.flows)


def test_model_law_reaches_penalty():
    net = generate_synthetic(1, 3, 1.0)
    model = HeadLossModel.from_network(net, "darcy_weisbach")
    assert model.alpha == 2.0
