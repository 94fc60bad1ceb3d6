"""Canonical network model, EPANET INP ingest, synthetic generator and CSV tables.

Units are SI everywhere: metres for lengths and heads, m^3/s for flows and
demands.  Junction demands are consumptions (non-negative); reservoirs and
tanks carry a fixed head instead of a demand.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ParseError, StructuralError

NODE_KINDS = ("junction", "reservoir", "tank")
EDGE_KINDS = ("pipe", "pump", "valve")
ACTIVE_EDGE_KINDS = ("pump", "valve")


@dataclass(frozen=True)
class Node:
    id: str
    kind: str = "junction"
    elevation: float = 0.0
    demand: float = 0.0
    fixed_head: float | None = None


@dataclass(frozen=True)
class Edge:
    id: str
    kind: str
    tail: int
    head: int
    length: float = 0.0
    diameter: float = 0.0
    roughness: float = 0.0

    def reversed(self) -> "Edge":
        return Edge(self.id, self.kind, self.head, self.tail,
                    self.length, self.diameter, self.roughness)


@dataclass(frozen=True)
class Network:
    """Immutable water network.

    ``warnings`` collects non-fatal findings (skipped INP sections, a passive
    subgraph that is not connected, ...).  It does not take part in equality.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    metadata: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        self._validate()
        if not self.passive_connected():
            msg = "graph is not connected once pump/valve edges are removed"
            if msg not in self.warnings:
                object.__setattr__(self, "warnings", self.warnings + (msg,))

    # ------------------------------------------------------------------
    # validation

    def _validate(self):
        seen = set()
        for node in self.nodes:
            if node.id in seen:
                raise StructuralError(f"duplicate node id {node.id!r}")
            seen.add(node.id)
            if node.kind not in NODE_KINDS:
                raise StructuralError(f"node {node.id!r}: unknown kind {node.kind!r}")
            if node.kind == "junction":
                if not node.demand >= 0:
                    raise StructuralError(
                        f"junction {node.id!r} has negative demand {node.demand}")
            elif node.fixed_head is None:
                raise StructuralError(f"{node.kind} {node.id!r} has no fixed head")
        seen = set()
        n = len(self.nodes)
        for edge in self.edges:
            if edge.id in seen:
                raise StructuralError(f"duplicate edge id {edge.id!r}")
            seen.add(edge.id)
            if edge.kind not in EDGE_KINDS:
                raise StructuralError(f"edge {edge.id!r}: unknown kind {edge.kind!r}")
            if not (0 <= edge.tail < n and 0 <= edge.head < n):
                raise StructuralError(f"edge {edge.id!r} references a missing node")
            if edge.tail == edge.head:
                raise StructuralError(f"edge {edge.id!r} is a self-loop")

    # ------------------------------------------------------------------
    # accessors

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def edge_ids(self) -> list[str]:
        return [e.id for e in self.edges]

    def node_index(self, node_id: str) -> int:
        for i, node in enumerate(self.nodes):
            if node.id == node_id:
                return i
        raise KeyError(node_id)

    def demands(self) -> np.ndarray:
        return np.array([n.demand for n in self.nodes], dtype=float)

    def elevations(self) -> np.ndarray:
        return np.array([n.elevation for n in self.nodes], dtype=float)

    def fixed_head_mask(self) -> np.ndarray:
        return np.array([n.fixed_head is not None for n in self.nodes], dtype=bool)

    def active_edges(self) -> list[int]:
        return [k for k, e in enumerate(self.edges) if e.kind in ACTIVE_EDGE_KINDS]

    def passive(self) -> "Network":
        """Copy without pump and valve edges."""
        edges = [e for e in self.edges if e.kind not in ACTIVE_EDGE_KINDS]
        return Network(self.nodes, edges, dict(self.metadata), self.warnings)

    def cyclomatic_number(self) -> int:
        return self.n_edges - self.n_nodes + self.n_components()

    def n_components(self, passive_only: bool = False) -> int:
        return len(_components(self.n_nodes, self._pairs(passive_only)))

    def passive_connected(self) -> bool:
        return self.n_components(passive_only=True) <= 1

    def _pairs(self, passive_only=False):
        return [(e.tail, e.head) for e in self.edges
                if not (passive_only and e.kind in ACTIVE_EDGE_KINDS)]

    # ------------------------------------------------------------------
    # canonical JSON

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "nodes": [
                {"id": n.id, "kind": n.kind, "elevation": n.elevation,
                 "demand": n.demand, "fixed_head": n.fixed_head}
                for n in self.nodes
            ],
            "edges": [
                {"id": e.id, "kind": e.kind, "tail": e.tail, "head": e.head,
                 "length": e.length, "diameter": e.diameter, "roughness": e.roughness}
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        try:
            nodes = [Node(d["id"], d["kind"], float(d["elevation"]), float(d["demand"]),
                          None if d["fixed_head"] is None else float(d["fixed_head"]))
                     for d in data["nodes"]]
            edges = [Edge(d["id"], d["kind"], int(d["tail"]), int(d["head"]),
                          float(d["length"]), float(d["diameter"]), float(d["roughness"]))
                     for d in data["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad network JSON: {exc}") from exc
        return cls(nodes, edges, data.get("metadata", {}))

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def _components(n: int, pairs: Iterable[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


# ----------------------------------------------------------------------
# EPANET INP

_FLOW_TO_SI = {
    "CFS": 0.028316846592, "GPM": 6.30901964e-05, "MGD": 0.0438126364,
    "IMGD": 0.0526167374, "AFD": 0.0142764101,
    "LPS": 1e-3, "LPM": 1e-3 / 60.0, "MLD": 1e3 / 86400.0,
    "CMH": 1.0 / 3600.0, "CMD": 1.0 / 86400.0,
}
_US_UNITS = {"CFS", "GPM", "MGD", "IMGD", "AFD"}
_FT = 0.3048
_INCH = 0.0254

_HANDLED = {"JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "PUMPS", "VALVES",
            "DEMANDS", "COORDINATES", "OPTIONS", "TITLE", "END"}

_SECTION_RE = re.compile(r"^\[([A-Za-z_]+)\]$")


class _Units:
    def __init__(self, flow_units: str):
        flow_units = flow_units.upper()
        if flow_units not in _FLOW_TO_SI:
            raise ValueError(flow_units)
        self.name = flow_units
        self.flow = _FLOW_TO_SI[flow_units]
        us = flow_units in _US_UNITS
        self.length = _FT if us else 1.0
        self.diameter = _INCH if us else 1e-3


def _split_sections(text: str):
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1).upper()
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError("data outside of any [SECTION]", lineno)
        sections[current].append((lineno, line.split()))
    return sections


def _num(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {token!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what}: non-finite value {token!r}", lineno)
    return value


def _need(cols: list[str], n: int, lineno: int, section: str):
    if len(cols) < n:
        raise ParseError(f"[{section}] row needs at least {n} columns, got {len(cols)}",
                         lineno)


def parse_inp(text: str, name: str = "inp") -> Network:
    """Parse the steady-state subset of an EPANET INP file.

    Sections other than junctions, reservoirs, tanks, pipes, pumps, valves,
    demands, coordinates and options are skipped and reported in
    ``Network.warnings``.  Closed pipes are dropped with a warning.
    """
    sections = _split_sections(text)
    notes: list[str] = []
    for required in ("JUNCTIONS", "PIPES"):
        if required not in sections:
            raise ParseError(f"missing required section [{required}]")
    for sec in sections:
        if sec not in _HANDLED:
            notes.append(f"skipped unsupported section [{sec}]")

    flow_units = "GPM"
    for lineno, cols in sections.get("OPTIONS", []):
        if cols[0].upper() == "UNITS" and len(cols) > 1:
            flow_units = cols[1].upper()
            if flow_units not in _FLOW_TO_SI:
                raise ParseError(f"unknown flow units {cols[1]!r}", lineno)
    units = _Units(flow_units)

    nodes: list[Node] = []
    index: dict[str, int] = {}

    def add_node(node: Node, lineno: int):
        if node.id in index:
            raise StructuralError(f"duplicate node id {node.id!r} (line {lineno})")
        index[node.id] = len(nodes)
        nodes.append(node)

    for lineno, cols in sections.get("JUNCTIONS", []):
        _need(cols, 2, lineno, "JUNCTIONS")
        elev = _num(cols[1], lineno, "elevation") * units.length
        demand = _num(cols[2], lineno, "demand") * units.flow if len(cols) > 2 else 0.0
        add_node(Node(cols[0], "junction", elev, demand), lineno)
    for lineno, cols in sections.get("RESERVOIRS", []):
        _need(cols, 2, lineno, "RESERVOIRS")
        head = _num(cols[1], lineno, "head") * units.length
        add_node(Node(cols[0], "reservoir", head, 0.0, head), lineno)
    for lineno, cols in sections.get("TANKS", []):
        _need(cols, 3, lineno, "TANKS")
        elev = _num(cols[1], lineno, "elevation") * units.length
        level = _num(cols[2], lineno, "initial level") * units.length
        add_node(Node(cols[0], "tank", elev, 0.0, elev + level), lineno)

    overridden: set[str] = set()
    for lineno, cols in sections.get("DEMANDS", []):
        _need(cols, 2, lineno, "DEMANDS")
        nid = cols[0]
        if nid not in index:
            raise StructuralError(f"[DEMANDS] references unknown node {nid!r} (line {lineno})")
        i = index[nid]
        value = _num(cols[1], lineno, "demand") * units.flow
        old = nodes[i]
        base = old.demand if nid in overridden else 0.0
        overridden.add(nid)
        nodes[i] = Node(old.id, old.kind, old.elevation, base + value, old.fixed_head)

    edges: list[Edge] = []
    edge_seen: set[str] = set()

    def endpoints(cols, lineno):
        for nid in cols[1:3]:
            if nid not in index:
                raise StructuralError(
                    f"edge {cols[0]!r} references unknown node {nid!r} (line {lineno})")
        return index[cols[1]], index[cols[2]]

    def add_edge(edge: Edge, lineno: int):
        if edge.id in edge_seen:
            raise StructuralError(f"duplicate edge id {edge.id!r} (line {lineno})")
        if edge.tail == edge.head:
            raise StructuralError(f"edge {edge.id!r} is a self-loop (line {lineno})")
        edge_seen.add(edge.id)
        edges.append(edge)

    for lineno, cols in sections.get("PIPES", []):
        _need(cols, 6, lineno, "PIPES")
        tail, head = endpoints(cols, lineno)
        length = _num(cols[3], lineno, "length") * units.length
        diameter = _num(cols[4], lineno, "diameter") * units.diameter
        rough = _num(cols[5], lineno, "roughness")
        status = cols[7].upper() if len(cols) > 7 else "OPEN"
        if status == "CLOSED":
            notes.append(f"dropped closed pipe {cols[0]!r}")
            continue
        add_edge(Edge(cols[0], "pipe", tail, head, length, diameter, rough), lineno)
    for lineno, cols in sections.get("PUMPS", []):
        _need(cols, 3, lineno, "PUMPS")
        tail, head = endpoints(cols, lineno)
        add_edge(Edge(cols[0], "pump", tail, head), lineno)
    for lineno, cols in sections.get("VALVES", []):
        _need(cols, 3, lineno, "VALVES")
        tail, head = endpoints(cols, lineno)
        diameter = _num(cols[3], lineno, "diameter") * units.diameter if len(cols) > 3 else 0.0
        add_edge(Edge(cols[0], "valve", tail, head, 0.0, diameter), lineno)

    coords = {}
    for lineno, cols in sections.get("COORDINATES", []):
        _need(cols, 3, lineno, "COORDINATES")
        coords[cols[0]] = [_num(cols[1], lineno, "x"), _num(cols[2], lineno, "y")]

    metadata = {"name": name, "source": "inp", "flow_units": units.name}
    if coords:
        metadata["coordinates"] = coords
    return Network(nodes, edges, metadata, notes)


def read_inp(path) -> Network:
    path = Path(path)
    return parse_inp(path.read_text(), name=path.stem)


def network_to_inp(network: Network) -> str:
    """Write an SI (LPS) INP text that :func:`parse_inp` reads back."""
    lines = ["[TITLE]", network.metadata.get("name", "network"), "",
             "[OPTIONS]", " Units LPS", "", "[JUNCTIONS]"]
    for n in network.nodes:
        if n.kind == "junction":
            lines.append(f" {n.id} {n.elevation!r} {n.demand * 1e3!r}")
    lines += ["", "[RESERVOIRS]"]
    for n in network.nodes:
        if n.kind == "reservoir":
            lines.append(f" {n.id} {n.fixed_head!r}")
    lines += ["", "[TANKS]"]
    for n in network.nodes:
        if n.kind == "tank":
            lines.append(f" {n.id} {n.elevation!r} {n.fixed_head - n.elevation!r} 0 0 0 0")
    sections = {"pipe": ["", "[PIPES]"], "pump": ["", "[PUMPS]"], "valve": ["", "[VALVES]"]}
    for e in network.edges:
        a, b = network.nodes[e.tail].id, network.nodes[e.head].id
        if e.kind == "pipe":
            sections["pipe"].append(
                f" {e.id} {a} {b} {e.length!r} {e.diameter * 1e3!r} {e.roughness!r} 0 Open")
        elif e.kind == "pump":
            sections["pump"].append(f" {e.id} {a} {b} HEAD 1")
        else:
            sections["valve"].append(f" {e.id} {a} {b} {e.diameter * 1e3!r} PRV 0 0")
    for block in sections.values():
        lines += block
    lines += ["", "[END]", ""]
    return "\n".join(lines)


# ----------------------------------------------------------------------
# synthetic networks

def generate_synthetic(seed: int, n_nodes: int, loop_fraction: float,
                       reservoir_head: float = 100.0, diameter: float = 0.3,
                       roughness: float = 130.0) -> Network:
    """Random planar looped network.

    Nodes are scattered in the unit square; a random spanning tree of their
    Delaunay graph is completed with ``floor(loop_fraction * n_nodes)`` chords
    (capped by the number of node pairs still free), preferring Delaunay
    edges so the result stays planar.  One random node is the reservoir.
    """
    if n_nodes < 3:
        raise ValueError(f"n_nodes must be >= 3, got {n_nodes}")
    if not 0.0 <= loop_fraction <= 1.0:
        raise ValueError(f"loop_fraction must lie in [0, 1], got {loop_fraction}")
    from scipy.spatial import Delaunay

    rng = np.random.default_rng(seed)
    pts = rng.random((n_nodes, 2))
    tri = Delaunay(pts)
    planar = set()
    for simplex in tri.simplices:
        for a, b in ((0, 1), (1, 2), (0, 2)):
            i, j = sorted((int(simplex[a]), int(simplex[b])))
            planar.add((i, j))
    planar = sorted(planar)

    # Kruskal over random weights gives a uniform-ish random spanning tree.
    weights = rng.random(len(planar))
    parent = list(range(n_nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree, rest = [], []
    for k in np.argsort(weights, kind="stable"):
        i, j = planar[k]
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
        else:
            rest.append((i, j))

    max_chords = n_nodes * (n_nodes - 1) // 2 - (n_nodes - 1)
    n_chords = min(int(math.floor(loop_fraction * n_nodes)), max_chords)
    chords = rest[:n_chords]
    if len(chords) < n_chords:
        used = set(tree) | set(chords)
        spare = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)
                 if (i, j) not in used]
        pick = rng.permutation(len(spare))[: n_chords - len(chords)]
        chords += [spare[k] for k in sorted(pick)]

    reservoir = int(rng.integers(n_nodes))
    demands = rng.uniform(0.001, 0.01, n_nodes)
    nodes = []
    for i in range(n_nodes):
        if i == reservoir:
            nodes.append(Node(f"R{i}", "reservoir", 0.0, 0.0, float(reservoir_head)))
        else:
            nodes.append(Node(f"J{i}", "junction", 0.0, float(demands[i])))
    pairs = tree + chords
    lengths = rng.uniform(100.0, 1000.0, len(pairs))
    flips = rng.random(len(pairs)) < 0.5
    edges = []
    for k, (i, j) in enumerate(pairs):
        tail, head = (j, i) if flips[k] else (i, j)
        edges.append(Edge(f"P{k}", "pipe", tail, head, float(lengths[k]),
                          float(diameter), float(roughness)))
    metadata = {
        "name": f"synthetic-{seed}-{n_nodes}-{loop_fraction}",
        "source": "synthetic",
        "coordinates": {nodes[i].id: [float(pts[i, 0]), float(pts[i, 1])]
                        for i in range(n_nodes)},
    }
    return Network(nodes, edges, metadata)


# ----------------------------------------------------------------------
# signal tables

@dataclass(frozen=True)
class SignalTable:
    orientation: str
    ids: tuple[str, ...]
    values: np.ndarray
    snapshot_id: str = "0"

    def __post_init__(self):
        if self.orientation not in ("node", "edge"):
            raise ValueError(f"orientation must be 'node' or 'edge', got {self.orientation!r}")
        object.__setattr__(self, "ids", tuple(self.ids))
        values = np.asarray(self.values, dtype=float).ravel()
        if len(values) != len(self.ids):
            raise ValueError(f"{len(values)} values for {len(self.ids)} ids")
        object.__setattr__(self, "values", values)

    @classmethod
    def for_network(cls, network: Network, orientation: str, values: Sequence[float],
                    snapshot_id: str = "0") -> "SignalTable":
        ids = network.node_ids if orientation == "node" else network.edge_ids
        return cls(orientation, ids, values, snapshot_id)

    def check(self, network: Network):
        known = set(network.node_ids if self.orientation == "node" else network.edge_ids)
        missing = [i for i in self.ids if i not in known]
        if missing:
            raise StructuralError(f"table ids not in network: {missing[:5]}")

    def aligned(self, network: Network) -> np.ndarray:
        """Values reordered to the network's element order (NaN where absent)."""
        self.check(network)
        order = network.node_ids if self.orientation == "node" else network.edge_ids
        lookup = dict(zip(self.ids, self.values))
        return np.array([lookup.get(i, np.nan) for i in order])


def write_table(table: SignalTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "value"])
        for i, v in zip(table.ids, table.values):
            writer.writerow([i, format(float(v), ".17g")])


def read_table(path, orientation: str = "node", snapshot_id: str | None = None) -> SignalTable:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "value"]:
            raise FormatError(f"{path}: expected header 'id,value', got {header!r}")
        ids, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns")
            try:
                values.append(float(row[1]))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad value {row[1]!r}") from None
            ids.append(row[0])
    return SignalTable(orientation, ids, values, snapshot_id or path.stem)

