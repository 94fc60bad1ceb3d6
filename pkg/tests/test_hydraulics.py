"""Head-loss laws, the steady-state solver and edge reorientation."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from conftest import make_network
from wdntsp.errors import StructuralError
from wdntsp.hydraulics import (HeadLossModel, HydraulicState, head_loss, head_loss_derivative,
                               loop_residual, normalize_law, orient_to_flow,
                               solve_steady_state)
from wdntsp.network import Edge, Network, Node, generate_synthetic
from wdntsp.topology import build_b1, build_complex


def _model(law, c):
    alpha = {"darcy_weisbach": 2.0, "hazen_williams": 1.852}[law]
    return HeadLossModel(law, alpha, np.atleast_1d(np.asarray(c, dtype=float)))


def test_head_loss_values():
    dw = _model("darcy_weisbach", 2.0)
    assert head_loss([0.0], dw)[0] == 0.0
    assert head_loss([3.0], dw)[0] == pytest.approx(18.0)
    assert head_loss([-3.0], dw)[0] == pytest.approx(-18.0)
    hw = _model("hazen_williams", 1.0)
    assert head_loss([2.0], hw)[0] == pytest.approx(2.0 ** 1.852)
    assert head_loss([2.0], hw)[0] == pytest.approx(3.6100, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(f=st.floats(1e-3, 5.0), c=st.floats(0.1, 1e3), sign=st.sampled_from([-1.0, 1.0]),
       law=st.sampled_from(["darcy_weisbach", "hazen_williams"]))
def test_head_loss_derivative_matches_central_difference(f, c, sign, law):
    m = _model(law, c)
    x = sign * f
    h = 1e-6 * f
    fd = (head_loss([x + h], m)[0] - head_loss([x - h], m)[0]) / (2 * h)
    assert head_loss_derivative([x], m)[0] == pytest.approx(fd, rel=1e-6)


def test_model_validation():
    with pytest.raises(ValueError):
        HeadLossModel("darcy_weisbach", 1.852, np.ones(2))
    with pytest.raises(ValueError):
        HeadLossModel("hazen_williams", 1.852, np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        normalize_law("manning")
    assert normalize_law("Hazen-Williams") == "hazen_williams"
    assert normalize_law("dw") == "darcy_weisbach"


def test_resistance_formulas():
    net = make_network(2, [(0, 1)], lengths=[250.0], diameter=0.3, roughness=110.0)
    hw = HeadLossModel.from_network(net, "hazen_williams").c[0]
    assert hw == pytest.approx(10.667 * 250.0 / (0.3 ** 4.871 * 110.0 ** 1.852))
    dw = HeadLossModel.from_network(net, "darcy_weisbach").c[0]
    assert dw == pytest.approx(8 * 0.02 * 250.0 / (9.80665 * np.pi ** 2 * 0.3 ** 5))


def test_single_pipe_analytic():
    net = Network([Node("R", "reservoir", 10.0, 0.0, 10.0), Node("J", "junction", 0.0, 0.01)],
                  [Edge("P", "pipe", 0, 1, 1.0, 0.1, 100.0)])
    state = solve_steady_state(net, _model("darcy_weisbach", 100.0))
    assert abs(state.flows[0] - 0.01) <= 1e-10
    assert abs(state.heads[1] - 9.99) <= 1e-10
    assert state.demand[0] == pytest.approx(-0.01)


def test_symmetric_triangle_matches_root_finder():
    net = make_network(3, [(0, 1), (0, 2), (1, 2)], demand=0.02)
    model = HeadLossModel.from_network(net, "hazen_williams")
    state = solve_steady_state(net, model)
    assert state.flows[0] == pytest.approx(state.flows[1], rel=1e-10)
    assert abs(state.flows[2]) < 1e-9

    B1 = build_b1(net).entries.astype(float)
    d = net.demands()

    def equations(x):
        f, p = x[:3], np.concatenate([[50.0], x[3:]])
        return np.concatenate([(B1 @ f - d)[1:], B1.T @ p + head_loss(f, model)])

    root = scipy.optimize.fsolve(equations, np.concatenate([np.full(3, 0.01), [49.0, 49.0]]),
                                 xtol=1e-14)
    np.testing.assert_allclose(state.flows, root[:3], atol=1e-9)
    np.testing.assert_allclose(state.heads[1:], root[3:], atol=1e-8)


@pytest.mark.parametrize("law", ["hazen_williams", "darcy_weisbach"])
def test_seed7_residuals(law):
    net = generate_synthetic(7, 50, 0.4)
    model = HeadLossModel.from_network(net, law)
    state = solve_steady_state(net, model)
    assert state.residual_mass <= 1e-8 and state.residual_energy <= 1e-8
    assert state.alpha == model.alpha
    cx = build_complex(net)
    assert np.max(np.abs(loop_residual(state, cx.b2, model))) <= 1e-6
    fixed = net.fixed_head_mask()
    assert -state.demand[fixed].sum() == pytest.approx(state.demand[~fixed].sum(), rel=1e-10)


def test_pump_is_rejected():
    net = make_network(3, [(0, 1), (1, 2), (2, 0)], kinds=["pipe", "pipe", "pump"])
    model = HeadLossModel("hazen_williams", 1.852, np.ones(2))
    with pytest.raises(StructuralError, match="e2"):
        solve_steady_state(net, model)


def test_missing_reservoir():
    net = Network([Node("a", "junction", 0, 0.01), Node("b", "junction", 0, 0.01)],
                  [Edge("p", "pipe", 0, 1, 10, 0.1, 100)])
    with pytest.raises(StructuralError, match="fixed-head"):
        solve_steady_state(net, _model("darcy_weisbach", 1.0))


def test_orient_flips_negative_edges():
    net = make_network(3, [(0, 1), (1, 2)])
    state = HydraulicState(np.array([-1.0, 2.0]), np.zeros(3), np.zeros(3), 0.0, 0.0, 0)
    net2, st2 = orient_to_flow(net, state)
    np.testing.assert_array_equal(st2.flows, [1.0, 2.0])
    assert (net2.edges[0].tail, net2.edges[0].head) == (1, 0)
    assert net2.edges[1] == net.edges[1]


def test_orient_identity_on_nonnegative_flows():
    net = make_network(3, [(0, 1), (1, 2)])
    state = HydraulicState(np.array([1.0, 0.0]), np.zeros(3), np.zeros(3), 0.0, 0.0, 0)
    net2, st2 = orient_to_flow(net, state)
    assert net2 == net
    np.testing.assert_array_equal(st2.flows, state.flows)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 3000), law=st.sampled_from(["hazen_williams", "darcy_weisbach"]))
def test_solved_networks_satisfy_balances(seed, law):
    net = generate_synthetic(seed, 30, 0.4)
    model = HeadLossModel.from_network(net, law)
    state = solve_steady_state(net, model)
    assert state.residual_mass <= 1e-8 and state.residual_energy <= 1e-8
    assert np.max(np.abs(loop_residual(state, build_complex(net).b2, model))) <= 1e-6
    net2, st2 = orient_to_flow(net, state)
    assert np.all(st2.flows >= 0)
    B1 = build_b1(net2).entries
    assert np.max(np.abs(B1 @ st2.flows - st2.demand)) <= 1e-10
