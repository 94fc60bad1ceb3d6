"""Shared fixtures: small hand-built networks and complexes."""

from __future__ import annotations

import numpy as np
import pytest

from wdntsp.network import Edge, Network, Node
from wdntsp.topology import build_complex

# Six nodes, nine edges; two triangles and a quadrilateral are filled and
# the triangle 1-2-3 is left open, so one harmonic direction remains.
MIXED_EDGES = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2), (4, 5), (5, 0), (1, 3)]
MIXED_CELLS = [[0, 1, 2], [2, 3, 4], [0, 2, 4, 5]]


def make_network(n_nodes, pairs, reservoir=0, demand=0.01, head=50.0,
                 lengths=None, diameter=0.2, roughness=120.0, kinds=None):
    nodes = []
    for i in range(n_nodes):
        if i == reservoir:
            nodes.append(Node(f"n{i}", "reservoir", head, 0.0, head))
        else:
            nodes.append(Node(f"n{i}", "junction", 0.0, demand))
    edges = []
    for k, (a, b) in enumerate(pairs):
        length = 100.0 if lengths is None else float(lengths[k])
        kind = "pipe" if kinds is None else kinds[k]
        edges.append(Edge(f"e{k}", kind, a, b, length, diameter, roughness))
    return Network(nodes, edges)


@pytest.fixture
def triangle():
    return make_network(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def mixed_network():
    lengths = [100 + 37 * k % 90 for k in range(len(MIXED_EDGES))]
    return make_network(6, MIXED_EDGES, lengths=lengths)


@pytest.fixture
def mixed_complex(mixed_network):
    return build_complex(mixed_network, cells=MIXED_CELLS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
