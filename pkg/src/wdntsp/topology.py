"""Second-order cell complex of a network: incidence matrices and Laplacians.

B1 uses the head=+1 / tail=-1 convention so that ``B1 @ f`` is the net
inflow at every node.  Columns of B2 are independent cycles of length at
most ``p_max``, shortest first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from . import _kernels
from .errors import StructuralError
from .network import ACTIVE_EDGE_KINDS, Network, _components


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed integer incidence matrix.

    For B1, ``edge_index[k]`` is the network edge behind column ``k``.  For
    B2, ``cycles[j]`` lists the edge indices (column order of B1) of cell
    ``j`` in traversal order.
    """

    entries: np.ndarray
    kind: str
    edge_index: tuple[int, ...] = ()
    cycles: tuple[tuple[int, ...], ...] = ()

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """(tail, head) node index per column of a B1 matrix."""
        if self.kind != "B1":
            raise TypeError("endpoints() is only defined for B1")
        tails = np.argmax(self.entries == -1, axis=0)
        heads = np.argmax(self.entries == 1, axis=0)
        return tails, heads


@dataclass(frozen=True)
class LaplacianSet:
    L0: np.ndarray
    L1_down: np.ndarray
    L1_up: np.ndarray
    L1: np.ndarray
    L2: np.ndarray


@dataclass(frozen=True)
class CellComplex:
    network: Network
    b1: IncidenceMatrix
    b2: IncidenceMatrix
    laplacians: LaplacianSet = field(repr=False)

    @property
    def harmonic_dimension(self) -> int:
        cyclomatic = self.b1.cols - self.b1.rows + n_components(self.b1)
        return cyclomatic - self.b2.cols


def build_b1(network: Network, include_active: bool = True) -> IncidenceMatrix:
    """Node-edge incidence matrix; pump/valve columns dropped unless ``include_active``."""
    keep = [k for k, e in enumerate(network.edges)
            if include_active or e.kind not in ACTIVE_EDGE_KINDS]
    if not include_active:
        pairs = [(network.edges[k].tail, network.edges[k].head) for k in keep]
        if len(_components(network.n_nodes, pairs)) > 1:
            raise StructuralError(
                "network is disconnected once pump/valve edges are removed")
    B = np.zeros((network.n_nodes, len(keep)), dtype=np.int64)
    for col, k in enumerate(keep):
        e = network.edges[k]
        B[e.tail, col] = -1
        B[e.head, col] = 1
    return IncidenceMatrix(B, "B1", tuple(keep))


def n_components(b1: IncidenceMatrix) -> int:
    tails, heads = b1.endpoints()
    return len(_components(b1.rows, zip(tails.tolist(), heads.tolist())))


def _adjacency(n, tails, heads):
    """CSR adjacency sorted by (neighbour, edge) for deterministic BFS."""
    rows = [[] for _ in range(n)]
    for k, (a, b) in enumerate(zip(tails, heads)):
        rows[a].append((b, k))
        rows[b].append((a, k))
    indptr = np.zeros(n + 1, dtype=np.int64)
    nbr, nedge = [], []
    for i, r in enumerate(rows):
        r.sort()
        nbr += [v for v, _ in r]
        nedge += [k for _, k in r]
        indptr[i + 1] = len(nbr)
    return indptr, np.asarray(nbr, dtype=np.int64), np.asarray(nedge, dtype=np.int64)


def _orient(cycle_edges, tails, heads) -> tuple[list[int], list[int]]:
    """Walk a cycle from its lowest-index edge along that edge's direction.

    Returns edges in traversal order and the matching +1/-1 signs.
    """
    remaining = set(cycle_edges)
    start = min(remaining)
    remaining.discard(start)
    order, signs = [start], [1]
    node = heads[start]
    origin = tails[start]
    while remaining:
        nxt = None
        for k in sorted(remaining):
            if tails[k] == node:
                nxt, sign, node_next = k, 1, heads[k]
                break
            if heads[k] == node:
                nxt, sign, node_next = k, -1, tails[k]
                break
        if nxt is None:
            raise StructuralError(f"edges {sorted(cycle_edges)} do not form a closed cycle")
        remaining.discard(nxt)
        order.append(nxt)
        signs.append(sign)
        node = node_next
    if node != origin:
        raise StructuralError(f"edges {sorted(cycle_edges)} do not form a closed cycle")
    return order, signs


class _ExactRank:
    """Incremental rank test over the rationals.

    Vectors are integer dicts {column: value}; the accepted rows are kept in
    reduced echelon form with fraction-free updates and gcd normalisation, so
    no rounding ever enters the independence decision.
    """

    def __init__(self):
        self.rows: dict[int, dict[int, int]] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _reduce(self, vec: dict[int, int]) -> dict[int, int]:
        v = {k: x for k, x in vec.items() if x}
        # rows are fully reduced, so eliminating one pivot never touches another
        for piv in [p for p in v if p in self.rows]:
            x = v[piv]
            row = self.rows[piv]
            a = row[piv]
            g = gcd(a, x)
            ma, mx = a // g, x // g
            out = {k: ma * val for k, val in v.items()}
            for k, val in row.items():
                out[k] = out.get(k, 0) - mx * val
            v = {k: val for k, val in out.items() if val}
        if v:
            g = 0
            for val in v.values():
                g = gcd(g, val)
            if g > 1:
                v = {k: val // g for k, val in v.items()}
        return v

    def add(self, vec: dict[int, int]) -> bool:
        """Accept ``vec`` if it is independent of the rows seen so far."""
        v = self._reduce(vec)
        if not v:
            return False
        piv = min(v)
        a = v[piv]
        for p, row in list(self.rows.items()):
            x = row.get(piv, 0)
            if not x:
                continue
            g = gcd(a, x)
            ma, mx = a // g, x // g
            out = {k: ma * val for k, val in row.items()}
            for k, val in v.items():
                out[k] = out.get(k, 0) - mx * val
            out = {k: val for k, val in out.items() if val}
            gg = 0
            for val in out.values():
                gg = gcd(gg, val)
            if gg > 1:
                out = {k: val // gg for k, val in out.items()}
            self.rows[p] = out
        self.rows[piv] = v
        return True


def _chord_coordinates(signs_by_edge: dict[int, int], chord_pos: np.ndarray) -> dict[int, int]:
    return {int(chord_pos[k]): s for k, s in signs_by_edge.items() if chord_pos[k] >= 0}


def _spanning_chords(n, tails, heads, E):
    """Column position of each non-forest edge (``-1`` for forest edges)."""
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    pos = np.full(E, -1, dtype=np.int64)
    count = 0
    for k in range(E):
        ra, rb = find(int(tails[k])), find(int(heads[k]))
        if ra == rb:
            pos[k] = count
            count += 1
        else:
            parent[ra] = rb
    return pos, count


def build_b2(b1: IncidenceMatrix, p_max: int = 30) -> IncidenceMatrix:
    """Edge-cell incidence from independent cycles of length <= ``p_max``.

    Candidates are the Horton cycles (BFS path root->x, edge x-y, path
    y->root) of every root; they contain a minimum cycle basis, so accepting
    independent candidates in (length, sorted edge tuple) order yields the
    shortest cells first and spans every cycle of length <= ``p_max``.
    """
    if p_max < 3:
        raise ValueError(f"p_max must be >= 3, got {p_max}")
    N, E = b1.shape
    tails, heads = b1.endpoints()
    tails = tails.astype(np.int64)
    heads = heads.astype(np.int64)
    chord_pos, target = _spanning_chords(N, tails, heads, E)
    if target == 0 or E == 0:
        return IncidenceMatrix(np.zeros((E, 0), dtype=np.int64), "B2")

    indptr, nbr, nedge = _adjacency(N, tails.tolist(), heads.tolist())
    trees = []
    cand_len, cand_root, cand_edge = [], [], []
    all_edges = np.arange(E)
    for root in range(N):
        dist, parent, pedge, branch = _kernels.bfs_tree(N, indptr, nbr, nedge, root)
        trees.append((parent, pedge))
        dx, dy = dist[tails], dist[heads]
        reach = dx >= 0
        tree_edge = (pedge[heads] == all_edges) | (pedge[tails] == all_edges)
        length = dx + dy + 1
        simple = (tails == root) | (heads == root) | (branch[tails] != branch[heads])
        ok = reach & ~tree_edge & simple & (length <= p_max)
        idx = np.nonzero(ok)[0]
        cand_len.append(length[idx])
        cand_root.append(np.full(len(idx), root, dtype=np.int64))
        cand_edge.append(idx)
    cand_len = np.concatenate(cand_len)
    cand_root = np.concatenate(cand_root)
    cand_edge = np.concatenate(cand_edge)

    def path_edges(root, node):
        parent, pedge = trees[root]
        out = []
        while node != root:
            out.append(int(pedge[node]))
            node = int(parent[node])
        return out

    basis = _ExactRank()
    cells: list[tuple[list[int], list[int]]] = []
    for ell in np.unique(cand_len):
        level = np.nonzero(cand_len == ell)[0]
        found = set()
        for i in level:
            root, k = int(cand_root[i]), int(cand_edge[i])
            edges = path_edges(root, int(tails[k])) + path_edges(root, int(heads[k])) + [k]
            found.add(tuple(sorted(edges)))
        for key in sorted(found):
            order, signs = _orient(key, tails, heads)
            if basis.add(_chord_coordinates(dict(zip(order, signs)), chord_pos)):
                cells.append((order, signs))
                if basis.rank == target:
                    break
        if basis.rank == target:
            break
    return _assemble_b2(E, cells)


def _assemble_b2(E, cells) -> IncidenceMatrix:
    B2 = np.zeros((E, len(cells)), dtype=np.int64)
    for j, (order, signs) in enumerate(cells):
        B2[order, j] = signs
    return IncidenceMatrix(B2, "B2", cycles=tuple(tuple(o) for o, _ in cells))


def b2_from_cells(b1: IncidenceMatrix, cells) -> IncidenceMatrix:
    """B2 from explicitly chosen cells, each a closed node sequence.

    Cells are oriented with the same lowest-edge rule as :func:`build_b2`
    and must be linearly independent.
    """
    tails, heads = b1.endpoints()
    lookup = {}
    for k, (a, b) in enumerate(zip(tails.tolist(), heads.tolist())):
        lookup.setdefault(frozenset((a, b)), k)
    chord_pos, _ = _spanning_chords(b1.rows, tails, heads, b1.cols)
    basis = _ExactRank()
    out = []
    for nodes in cells:
        nodes = list(nodes)
        if len(nodes) < 3 or len(set(nodes)) != len(nodes):
            raise StructuralError(f"cell {nodes} is not a simple cycle")
        edges = []
        for a, b in zip(nodes, nodes[1:] + nodes[:1]):
            key = frozenset((a, b))
            if key not in lookup:
                raise StructuralError(f"cell {nodes}: no edge between {a} and {b}")
            edges.append(lookup[key])
        order, signs = _orient(edges, tails, heads)
        if not basis.add(_chord_coordinates(dict(zip(order, signs)), chord_pos)):
            raise StructuralError(f"cell {nodes} is linearly dependent on earlier cells")
        out.append((order, signs))
    return _assemble_b2(b1.cols, out)


def laplacians(b1: IncidenceMatrix, b2: IncidenceMatrix) -> LaplacianSet:
    B1 = np.asarray(b1.entries, dtype=np.int64)
    B2 = np.asarray(b2.entries, dtype=np.int64)
    if B1.shape[1] != B2.shape[0]:
        raise ValueError(f"B1 {B1.shape} and B2 {B2.shape} are not compatible")
    down = B1.T @ B1
    up = B2 @ B2.T
    return LaplacianSet(B1 @ B1.T, down, up, down + up, B2.T @ B2)


def build_complex(network: Network, p_max: int = 30, include_active: bool = False,
                  cells=None) -> CellComplex:
    """B1, B2 and Laplacians in one call (passive edges only by default)."""
    b1 = build_b1(network, include_active=include_active)
    b2 = build_b2(b1, p_max) if cells is None else b2_from_cells(b1, cells)
    return CellComplex(network, b1, b2, laplacians(b1, b2))


def write_dense(matrix, path) -> None:
    np.savetxt(path, np.asarray(getattr(matrix, "entries", matrix)), delimiter=",", fmt="%d")


def write_triplets(matrix, path) -> None:
    M = np.asarray(getattr(matrix, "entries", matrix))
    rows, cols = np.nonzero(M)
    with open(path, "w") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        for i, j in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{i} {j} {M[i, j]}\n")
