"""Incidence matrices, cell selection and Hodge Laplacians."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import MIXED_CELLS, make_network
from wdntsp.errors import StructuralError
from wdntsp.network import generate_synthetic
from wdntsp.topology import b2_from_cells, build_b1, build_b2, build_complex, laplacians

nx = pytest.importorskip("networkx")


def rank(A):
    return int(np.linalg.matrix_rank(np.asarray(A, dtype=float))) if np.size(A) else 0


def test_triangle_b1(triangle):
    B1 = build_b1(triangle).entries
    assert B1.shape == (3, 3)
    for col in B1.T:
        assert sorted(col.tolist()) == [-1, 0, 1]


def test_head_is_plus_tail_is_minus(triangle):
    B1 = build_b1(triangle).entries
    assert B1[0, 0] == -1 and B1[1, 0] == 1


def test_seven_node_nine_edge_b1():
    pairs = [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (5, 6), (6, 2), (1, 5)]
    assert build_b1(make_network(7, pairs)).shape == (7, 9)


def test_path_rank():
    B1 = build_b1(make_network(3, [(0, 1), (1, 2)])).entries
    assert B1.shape == (3, 2) and rank(B1) == 2


def test_active_edges_are_dropped_on_request():
    net = make_network(4, [(0, 1), (1, 2), (2, 3), (3, 0)], kinds=["pipe", "pipe", "pipe", "pump"])
    assert build_b1(net).cols == 4
    b1 = build_b1(net, include_active=False)
    assert b1.cols == 3 and b1.edge_index == (0, 1, 2)


def test_passive_disconnection_is_structural():
    net = make_network(3, [(0, 1), (1, 2)], kinds=["pipe", "pump"])
    with pytest.raises(StructuralError):
        build_b1(net, include_active=False)


def test_triangle_b2(triangle):
    b1 = build_b1(triangle)
    B2 = build_b2(b1, p_max=3).entries
    assert B2.shape == (3, 1) and rank(B2) == 1
    assert not np.any(b1.entries @ B2)


def test_tree_has_no_cells():
    net = make_network(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
    for p_max in (3, 10, 30):
        assert build_b2(build_b1(net), p_max).cols == 0


def test_p_max_below_three():
    with pytest.raises(ValueError):
        build_b2(build_b1(make_network(3, [(0, 1), (1, 2), (2, 0)])), 2)


def test_length_cap_excludes_long_cycles():
    ring = make_network(6, [(i, (i + 1) % 6) for i in range(6)])
    assert build_b2(build_b1(ring), 5).cols == 0
    assert build_b2(build_b1(ring), 6).cols == 1


def test_mixed_complex(mixed_complex):
    B1, B2 = mixed_complex.b1.entries, mixed_complex.b2.entries
    assert B1.shape == (6, 9) and B2.shape == (9, 3)
    assert not np.any(B1 @ B2)
    assert sorted(np.abs(B2).sum(axis=0).tolist()) == [3, 3, 4]
    assert mixed_complex.harmonic_dimension == 1
    L1 = mixed_complex.laplacians.L1.astype(float)
    assert int(np.sum(np.linalg.eigvalsh(L1) < 1e-9)) == 1


def test_mixed_auto_cells_fill_every_cycle(mixed_network):
    # Without explicit cells every independent short cycle is filled.
    cx = build_complex(mixed_network, p_max=30)
    assert cx.b2.cols == 4 and cx.harmonic_dimension == 0


def test_dependent_cell_is_rejected(mixed_network):
    b1 = build_b1(mixed_network)
    with pytest.raises(StructuralError, match="dependent"):
        b2_from_cells(b1, MIXED_CELLS + [[0, 1, 2, 3, 4, 5]])
    with pytest.raises(StructuralError, match="no edge"):
        b2_from_cells(b1, [[0, 3, 5]])


def test_filled_triangle_laplacians(triangle):
    cx = build_complex(triangle, p_max=3)
    L = cx.laplacians
    np.testing.assert_array_equal(L.L1, 3 * np.eye(3))
    np.testing.assert_allclose(np.linalg.eigvalsh(L.L1_down.astype(float)), [0, 3, 3], atol=1e-12)
    np.testing.assert_array_equal(L.L2, [[3]])


def test_l0_row_sums_vanish(mixed_complex):
    assert not np.any(mixed_complex.laplacians.L0.sum(axis=1))


def test_laplacian_shape_mismatch(triangle):
    b1 = build_b1(triangle)
    other = build_b2(build_b1(make_network(4, [(0, 1), (1, 2), (2, 3), (3, 0)])), 4)
    with pytest.raises(ValueError):
        laplacians(b1, other)


def _nx_graph(net):
    g = nx.Graph()
    g.add_nodes_from(range(net.n_nodes))
    g.add_edges_from((e.tail, e.head) for e in net.edges)
    return g


@pytest.mark.parametrize("seed", range(10))
def test_cells_form_minimum_cycle_basis(seed):
    net = generate_synthetic(seed, 50, 0.4)
    cx = build_complex(net, p_max=net.n_nodes)
    B2 = cx.b2.entries
    assert not np.any(cx.b1.entries @ B2)
    assert B2.shape[1] == rank(B2) == net.cyclomatic_number()
    oracle = nx.minimum_cycle_basis(_nx_graph(net))
    assert int(np.abs(B2).sum()) == sum(len(c) for c in oracle)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 5000), n=st.integers(3, 40), frac=st.floats(0.0, 0.8),
       p_max=st.integers(3, 12))
def test_cell_invariants(seed, n, frac, p_max):
    net = generate_synthetic(seed, n, frac)
    cx = build_complex(net, p_max=p_max)
    B1, B2 = cx.b1.entries, cx.b2.entries
    assert not np.any(B1 @ B2)
    r = rank(B2)
    assert r == B2.shape[1] <= net.cyclomatic_number()
    lengths = np.abs(B2).sum(axis=0)
    assert np.all(lengths <= p_max) and np.all(np.diff(lengths) >= 0)
    for j in range(B2.shape[1]):
        assert rank(np.delete(B2, j, axis=1)) == r - 1
    zeros = int(np.sum(np.linalg.eigvalsh(cx.laplacians.L1.astype(float)) < 1e-8))
    assert zeros == cx.harmonic_dimension


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 5000), n=st.integers(3, 30), frac=st.floats(0.1, 0.8))
def test_short_cycles_are_spanned(seed, n, frac):
    # Every cycle of the minimum basis within the cap lies in the span of B2.
    net = generate_synthetic(seed, n, frac)
    p_max = 5
    cx = build_complex(net, p_max=p_max)
    B2 = cx.b2.entries.astype(float)
    lookup = {frozenset((e.tail, e.head)): k for k, e in enumerate(net.edges)}
    for cyc in nx.minimum_cycle_basis(_nx_graph(net)):
        if len(cyc) > p_max:
            continue
        order = nx.find_cycle(_nx_graph(net).subgraph(cyc))
        vec = np.zeros(net.n_edges)
        for a, b in order:
            k = lookup[frozenset((a, b))]
            vec[k] = 1.0 if (net.edges[k].tail, net.edges[k].head) == (a, b) else -1.0
        assert rank(np.column_stack([B2, vec])) == rank(B2)
